#include "aspectlens/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <stdexcept>

#include "aspectlens/error.hpp"

namespace aspectlens::toml_lite {

namespace {

class Parser {
 public:
  Parser(std::string_view line, std::size_t line_no) : s_(line), line_no_(line_no) {}

  Value value() {
    skip_ws();
    if (at_end()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return Value{basic_string()};
    if (c == '\'') return Value{literal_string()};
    if (c == '[') return array();
    return scalar();
  }

  void expect_end() {
    skip_ws();
    if (!at_end() && s_[pos_] != '#') fail("unexpected trailing characters");
  }

  std::string key() {
    skip_ws();
    const auto start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                         s_[pos_] == '-')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a key");
    std::string k(s_.substr(start, pos_ - start));
    skip_ws();
    if (at_end() || s_[pos_] != '=') fail("expected '='");
    ++pos_;
    return k;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("config line " + std::to_string(line_no_) + ": " + what);
  }
  bool at_end() const { return pos_ >= s_.size(); }
  void skip_ws() {
    while (!at_end() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  std::string basic_string() {
    ++pos_;
    std::string out;
    while (!at_end() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (at_end()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (at_end()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string literal_string() {
    ++pos_;
    const auto end = s_.find('\'', pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(s_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  Value array() {
    ++pos_;
    std::vector<Value> items;
    while (true) {
      skip_ws();
      if (at_end()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        break;
      }
      items.push_back(value());
      skip_ws();
      if (!at_end() && s_[pos_] == ',') {
        ++pos_;
      } else if (at_end() || s_[pos_] != ']') {
        fail("expected ',' or ']'");
      }
    }
    return Value{std::move(items)};
  }

  Value scalar() {
    const auto start = pos_;
    while (!at_end() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' &&
           s_[pos_] != ' ' && s_[pos_] != '\t') {
      ++pos_;
    }
    std::string tok(s_.substr(start, pos_ - start));
    if (tok == "true") return Value{true};
    if (tok == "false") return Value{false};
    std::string clean;
    for (char c : tok) {
      if (c != '_') clean += c;
    }
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), v);
      if (ec == std::errc{} && p == clean.data() + clean.size()) return Value{v};
    } else {
      try {
        std::size_t used = 0;
        const double d = std::stod(clean, &used);
        if (used == clean.size()) return Value{d};
      } catch (const std::exception&) {
      }
    }
    fail("cannot parse value \"" + tok + "\"");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_no_;
};

}  // namespace

const std::string& Value::as_string() const {
  if (auto p = std::get_if<std::string>(&data)) return *p;
  throw FormatError("config value is not a string");
}

double Value::as_number() const {
  if (auto p = std::get_if<double>(&data)) return *p;
  if (auto p = std::get_if<std::int64_t>(&data)) return static_cast<double>(*p);
  throw FormatError("config value is not a number");
}

std::int64_t Value::as_integer() const {
  if (auto p = std::get_if<std::int64_t>(&data)) return *p;
  throw FormatError("config value is not an integer");
}

bool Value::as_bool() const {
  if (auto p = std::get_if<bool>(&data)) return *p;
  throw FormatError("config value is not a boolean");
}

const std::vector<Value>& Value::as_array() const {
  if (auto p = std::get_if<std::vector<Value>>(&data)) return *p;
  throw FormatError("config value is not an array");
}

Table parse(std::string_view text) {
  Table table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    if (line[first] == '[') {
      throw FormatError("config line " + std::to_string(line_no) + ": tables are not supported");
    }
    Parser p(line, line_no);
    auto key = p.key();
    auto v = p.value();
    p.expect_end();
    if (!table.emplace(key, std::move(v)).second) {
      throw FormatError("config line " + std::to_string(line_no) + ": duplicate key \"" + key +
                        "\"");
    }
  }
  return table;
}

}  // namespace aspectlens::toml_lite
