#include <gtest/gtest.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "aspectlens/service.hpp"
#include "aspectlens/service_http.hpp"
#include "test_util.hpp"

using namespace aspectlens;
using namespace aspectlens::service;
using nlohmann::json;

namespace {

const std::filesystem::path kFixture = FIXTURE_DIR;

const Service& fixture_service() {
  static const Service svc(pipeline::load_assets(pipeline::load_config(kFixture / "pipeline.toml")));
  return svc;
}

Response get(std::string_view path) { return fixture_service().handle("GET", path, ""); }
Response post(std::string_view path, std::string_view body) {
  return fixture_service().handle("POST", path, body);
}

}  // namespace

TEST(Service, Health) {
  const auto r = get("/health");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "application/json");
  EXPECT_EQ(json::parse(r.body), (json{{"status", "ok"}, {"version", "0.1.0"}}));
}

TEST(Service, ReportMatchesPipelineExport) {
  const auto r = get("/report");
  ASSERT_EQ(r.status, 200);
  const auto& a = fixture_service().assets();
  EXPECT_EQ(r.body, pipeline::report_to_json(pipeline::run_pipeline(a, "e01"), a.config.max_examples));
  EXPECT_EQ(json::parse(r.body).at("retrieved_count"), 7);
}

TEST(Service, ReportAbsentWithoutQueryImage) {
  auto a = fixture_service().assets();
  a.config.query_image.clear();
  const Service svc(a);
  EXPECT_EQ(svc.handle("GET", "/report", "").status, 404);
}

TEST(Service, ProjectionIsNdjsonWithOneLinePerImage) {
  const auto r = get("/projection");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "application/x-ndjson");
  std::istringstream in(r.body);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = json::parse(line);
    EXPECT_TRUE(j.contains("image_id"));
  }
  EXPECT_EQ(lines, fixture_service().assets().index->size());
}

TEST(Service, ProjectionUnavailableWhenDimensionTooLarge) {
  auto a = fixture_service().assets();
  a.config.pca_dim = 100;
  const Service svc(a);
  EXPECT_EQ(svc.handle("GET", "/projection", "").status, 404);
}

TEST(Service, PostsByGalleryOrImage) {
  auto r = get("/posts/p03");
  ASSERT_EQ(r.status, 200);
  const auto by_gallery = json::parse(r.body);
  EXPECT_EQ(by_gallery.at("gallery_id"), "p03");
  r = get("/posts/e04");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body), by_gallery);
  EXPECT_EQ(get("/posts/nope").status, 404);
}

TEST(Service, QueryByRadiusKnnAndVector) {
  auto r = post("/query", R"({"image_id": "e01"})");
  ASSERT_EQ(r.status, 200);
  auto hits = json::parse(r.body);
  ASSERT_EQ(hits.size(), 9u);  // default radius 1.0 is strict
  EXPECT_EQ(hits[0].at("image_id"), "e01");
  EXPECT_DOUBLE_EQ(hits[0].at("distance").get<double>(), 0.0);

  r = post("/query", R"({"image_id": "e01", "top": 3})");
  hits = json::parse(r.body);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[1].at("image_id"), "e02");

  r = post("/query", R"({"image_id": "e01", "radius": 0.25})");
  EXPECT_EQ(json::parse(r.body).size(), 3u);

  r = post("/query", R"({"vector": [0,0,0,0,0,0,0,0], "top": 1})");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body)[0].at("image_id"), "e01");
}

TEST(Service, QueryErrors) {
  EXPECT_EQ(post("/query", R"({"image_id": "nope"})").status, 404);
  EXPECT_EQ(post("/query", R"({"top": 3})").status, 400);
  EXPECT_EQ(post("/query", "not json").status, 400);
  EXPECT_EQ(post("/query", R"({"vector": [1, 2]})").status, 400);
  EXPECT_EQ(post("/query", R"({"image_id": "e01", "radius": -1})").status, 400);
  EXPECT_EQ(post("/query", R"({"image_id": "e01", "top": 0})").status, 400);
  const auto r = post("/query", R"({"top": 3})");
  EXPECT_TRUE(json::parse(r.body).contains("error"));
}

TEST(Service, SentimentHeads) {
  auto r = post("/sentiment", R"({"text": "The Elbphilharmonie is beautiful"})");
  ASSERT_EQ(r.status, 200);
  auto j = json::parse(r.body);
  const auto& m = j.at("message");
  EXPECT_NEAR(m.at("negative").get<double>() + m.at("neutral").get<double>() + m.at("positive").get<double>(),
              1.0, 1e-12);
  EXPECT_TRUE(m.at("label").is_string());
  EXPECT_FALSE(j.contains("target"));

  r = post("/sentiment", R"({"text": "The Elbphilharmonie is beautiful", "aspect": "Elbphilharmonie"})");
  j = json::parse(r.body);
  ASSERT_TRUE(j.contains("target"));
  const auto& mm = fixture_service().assets().message_model;
  const auto p = sentiment::forward_message(mm, mm.encode("The Elbphilharmonie is beautiful"));
  EXPECT_DOUBLE_EQ(j.at("message").at("positive").get<double>(), p[2]);

  EXPECT_EQ(post("/sentiment", R"({"aspect": "x"})").status, 400);
}

TEST(Service, ImagesServedFromConfiguredDirectory) {
  const auto r = get("/images/elphi_1");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/x-portable-graymap");
  EXPECT_EQ(r.body, testutil::read_file(kFixture / "landmarks" / "elphi_1.pgm"));
  EXPECT_EQ(get("/images/elphi_1.pgm").status, 200);
  EXPECT_EQ(get("/images/nope").status, 404);
  EXPECT_EQ(get("/images/..").status, 404);
  EXPECT_EQ(get("/images/../pipeline.toml").status, 404);
}

TEST(Service, UnknownRoutes) {
  EXPECT_EQ(get("/nope").status, 404);
  EXPECT_EQ(fixture_service().handle("DELETE", "/health", "").status, 404);
  EXPECT_EQ(post("/health", "").status, 404);
}

TEST(Address, Parse) {
  EXPECT_EQ(parse_address("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_EQ(parse_address("localhost:1"), (std::pair<std::string, int>{"localhost", 1}));
  EXPECT_THROW(parse_address("8080"), std::invalid_argument);
  EXPECT_THROW(parse_address(":8080"), std::invalid_argument);
  EXPECT_THROW(parse_address("host:0"), std::invalid_argument);
  EXPECT_THROW(parse_address("host:70000"), std::invalid_argument);
  EXPECT_THROW(parse_address("host:80x"), std::invalid_argument);
}

TEST(Http, RoutesOverRealSocket) {
  httplib::Server server;
  install_routes(server, fixture_service());
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body).at("version"), "0.1.0");

  res = client.Post("/query", R"({"image_id": "e01", "top": 2})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body).size(), 2u);

  res = client.Get("/posts/missing");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  res = client.Get("/projection");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/x-ndjson");

  server.stop();
  t.join();
}
