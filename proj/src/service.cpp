#include "aspectlens/service.hpp"
#include "aspectlens/service_http.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace aspectlens::service {

using nlohmann::json;

namespace {

Response json_response(int status, const json& body) {
  return Response{status, "application/json", body.dump()};
}

Response error_response(int status, std::string_view message) {
  return json_response(status, json{{"error", message}});
}

json distribution_json(const sentiment::Distribution& p) {
  json out = json::object();
  for (auto l : sentiment::kAllLabels) {
    out[std::string(sentiment::to_string(l))] = p[static_cast<std::size_t>(l)];
  }
  out["label"] = sentiment::to_string(sentiment::argmax(p));
  return out;
}

json gallery_json(const corpus::GalleryPost& g) {
  return json{{"gallery_id", g.gallery_id},   {"author_id", g.author_id},
              {"timestamp", g.timestamp},     {"title", g.title},
              {"description", g.description}, {"hashtags", g.hashtags},
              {"image_ids", g.image_ids}};
}

bool safe_component(std::string_view id) {
  return !id.empty() && id.find('/') == std::string_view::npos &&
         id.find('\\') == std::string_view::npos && id != "." && id != "..";
}

}  // namespace

Service::Service(pipeline::PipelineAssets assets) : assets_(std::move(assets)) {
  const auto& cfg = assets_.config;
  if (!cfg.query_image.empty()) {
    report_json_ = pipeline::report_to_json(pipeline::run_pipeline(assets_, cfg.query_image),
                                            cfg.max_examples);
  }
  const auto& idx = *assets_.index;
  if (cfg.pca_dim >= 1 && cfg.pca_dim <= idx.dimension() && idx.size() > cfg.pca_dim) {
    const auto model = index::pca_fit(index::index_matrix(idx), cfg.pca_dim);
    projection_ = index::projection_jsonl(idx, model, assets_.labels.empty() ? nullptr : &assets_.labels);
  }
}

Response Service::handle(std::string_view method, std::string_view path,
                         std::string_view body) const {
  try {
    if (method == "GET") {
      if (path == "/health") return health();
      if (path == "/report") return report();
      if (path == "/projection") return projection();
      if (path.starts_with("/posts/")) return post(path.substr(7));
      if (path.starts_with("/images/")) return image(path.substr(8));
    } else if (method == "POST") {
      if (path == "/query") return query(body);
      if (path == "/sentiment") return sentiment(body);
    }
    return error_response(404, "no route for " + std::string(method) + " " + std::string(path));
  } catch (const json::exception& e) {
    return error_response(400, e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(400, e.what());
  } catch (const std::out_of_range& e) {
    return error_response(404, e.what());
  }
}

Response Service::health() const {
  return json_response(200, json{{"status", "ok"}, {"version", kVersion}});
}

Response Service::post(std::string_view id) const {
  for (const auto& g : assets_.galleries) {
    if (g.gallery_id == id) return json_response(200, gallery_json(g));
  }
  for (const auto& g : assets_.galleries) {
    for (const auto& img : g.image_ids) {
      if (img == id) return json_response(200, gallery_json(g));
    }
  }
  return error_response(404, "unknown post \"" + std::string(id) + "\"");
}

Response Service::query(std::string_view body) const {
  const auto req = json::parse(body);
  const auto& idx = *assets_.index;
  std::vector<float> vec;
  if (req.contains("image_id")) {
    const auto id = req.at("image_id").get<std::string>();
    if (!idx.contains(id)) return error_response(404, "unknown image \"" + id + "\"");
    const auto v = idx.vector(id);
    vec.assign(v.begin(), v.end());
  } else if (req.contains("vector")) {
    vec = req.at("vector").get<std::vector<float>>();
  } else {
    return error_response(400, "query needs image_id or vector");
  }
  std::vector<index::QueryResult> hits;
  if (req.contains("top") && !req.at("top").is_null()) {
    hits = idx.query_knn(vec, req.at("top").get<std::size_t>());
  } else {
    const double r = req.contains("radius") && !req.at("radius").is_null()
                         ? req.at("radius").get<double>()
                         : assets_.config.radius;
    hits = idx.query_radius(vec, r);
  }
  json out = json::array();
  for (const auto& h : hits) out.push_back({{"image_id", h.image_id}, {"distance", h.distance}});
  return json_response(200, out);
}

Response Service::sentiment(std::string_view body) const {
  const auto req = json::parse(body);
  const auto text = assets_.transform ? assets_.transform(req.at("text").get<std::string>())
                                      : req.at("text").get<std::string>();
  json out;
  const auto& mm = assets_.message_model;
  out["message"] = distribution_json(sentiment::forward_message(mm, mm.encode(text)));
  if (req.contains("aspect") && !req.at("aspect").is_null()) {
    const std::vector<std::string> aspect{req.at("aspect").get<std::string>()};
    out["target"] = distribution_json(pipeline::target_distribution(assets_.target_model, text, aspect));
  }
  return json_response(200, out);
}

Response Service::report() const {
  if (!report_json_) return error_response(404, "no query_image configured; run `report` instead");
  return Response{200, "application/json", *report_json_};
}

Response Service::projection() const {
  if (projection_.empty()) return error_response(404, "projection unavailable for this index");
  return Response{200, "application/x-ndjson", projection_};
}

Response Service::image(std::string_view id) const {
  const auto& dir = assets_.config.images;
  if (dir.empty() || !safe_component(id)) return error_response(404, "no image");
  for (const char* ext : {"", ".pgm"}) {
    const auto path = dir / (std::string(id) + ext);
    if (std::filesystem::is_regular_file(path)) {
      std::ifstream in(path, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      return Response{200, "image/x-portable-graymap", buf.str()};
    }
  }
  return error_response(404, "no image \"" + std::string(id) + "\"");
}

std::pair<std::string, int> parse_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw std::invalid_argument("address must be host:port");
  }
  int port = 0;
  const auto digits = address.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || port <= 0 || port > 65535) {
    throw std::invalid_argument("bad port in address " + std::string(address));
  }
  return {std::string(address.substr(0, colon)), port};
}

void install_routes(httplib::Server& server, const Service& svc,
                    const std::filesystem::path& static_dir) {
  if (!static_dir.empty()) server.set_mount_point("/", static_dir.string());
  auto route = [&svc](const httplib::Request& req, httplib::Response& res) {
    const auto r = svc.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get(".*", route);
  server.Post(".*", route);
}

void serve(const pipeline::PipelineConfig& config, std::string_view address) {
  const auto [host, port] = parse_address(address);
  const Service svc(pipeline::load_assets(config));
  httplib::Server server;
  install_routes(server, svc, config.static_dir);
  if (!server.bind_to_port(host, port)) {
    throw Error("cannot bind " + std::string(address));
  }
  server.listen_after_bind();
}

}  // namespace aspectlens::service
