#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "aspectlens/pipeline.hpp"

namespace aspectlens::service {

inline constexpr std::string_view kVersion = "0.1.0";

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Read-only HTTP/JSON front end over loaded pipeline assets. Routing is
// transport-independent so it can be exercised without a socket.
class Service {
 public:
  explicit Service(pipeline::PipelineAssets assets);

  Response handle(std::string_view method, std::string_view path, std::string_view body) const;

  const pipeline::PipelineAssets& assets() const { return assets_; }

 private:
  Response health() const;
  Response post(std::string_view id) const;
  Response query(std::string_view body) const;
  Response sentiment(std::string_view body) const;
  Response report() const;
  Response projection() const;
  Response image(std::string_view id) const;

  pipeline::PipelineAssets assets_;
  std::optional<std::string> report_json_;
  std::string projection_;
};

// Parses "host:port".
std::pair<std::string, int> parse_address(std::string_view address);

// Blocks serving until the process is stopped. Throws on bind failure.
void serve(const pipeline::PipelineConfig& config, std::string_view address);

}  // namespace aspectlens::service
