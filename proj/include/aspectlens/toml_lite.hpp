#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace aspectlens::toml_lite {

// Flat subset of TOML: `key = value` lines with strings, integers, floats,
// booleans and single-line arrays. Tables are not supported.
struct Value {
  std::variant<std::string, std::int64_t, double, bool, std::vector<Value>> data;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<std::vector<Value>>(data); }
  const std::string& as_string() const;
  double as_number() const;
  std::int64_t as_integer() const;
  bool as_bool() const;
  const std::vector<Value>& as_array() const;
};

using Table = std::map<std::string, Value>;

Table parse(std::string_view text);

}  // namespace aspectlens::toml_lite
