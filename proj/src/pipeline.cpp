#include "aspectlens/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "aspectlens/features_io.hpp"
#include "aspectlens/sentiment_data.hpp"
#include "aspectlens/toml_lite.hpp"

namespace aspectlens::pipeline {

using nlohmann::json;
using sentiment::Label;

void PipelineConfig::validate() const {
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  if (terms.empty()) throw std::invalid_argument("at least one mention term is required");
  if (years.first > years.last) throw std::invalid_argument("empty year range");
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  const auto table = toml_lite::parse(text);
  PipelineConfig cfg;
  auto path_of = [&](const toml_lite::Value& v) {
    std::filesystem::path p(v.as_string());
    return p.is_relative() ? base_dir / p : p;
  };
  auto strings_of = [](const toml_lite::Value& v) {
    std::vector<std::string> out;
    for (const auto& item : v.as_array()) out.push_back(item.as_string());
    return out;
  };
  for (const auto& [key, value] : table) {
    if (key == "radius") {
      cfg.radius = value.as_number();
    } else if (key == "terms") {
      cfg.terms = strings_of(value);
    } else if (key == "aspects") {
      cfg.aspects = strings_of(value);
    } else if (key == "years") {
      if (value.is_array()) {
        const auto& a = value.as_array();
        if (a.size() != 2) throw FormatError("years must be [first, last]");
        cfg.years = {static_cast<int>(a[0].as_integer()), static_cast<int>(a[1].as_integer())};
      } else {
        cfg.years = corpus::parse_year_range(value.as_string());
      }
    } else if (key == "corpus") {
      cfg.corpus = path_of(value);
    } else if (key == "features") {
      cfg.features = path_of(value);
    } else if (key == "message_model") {
      cfg.message_model = path_of(value);
    } else if (key == "target_model") {
      cfg.target_model = path_of(value);
    } else if (key == "labels") {
      cfg.labels = path_of(value);
    } else if (key == "images") {
      cfg.images = path_of(value);
    } else if (key == "static") {
      cfg.static_dir = path_of(value);
    } else if (key == "query_image") {
      cfg.query_image = value.as_string();
    } else if (key == "max_examples") {
      cfg.max_examples = static_cast<std::size_t>(value.as_integer());
    } else if (key == "pca_dim") {
      cfg.pca_dim = static_cast<std::size_t>(value.as_integer());
    } else {
      throw FormatError("unknown config key \"" + key + "\"");
    }
  }
  if (cfg.aspects.empty()) cfg.aspects = sentiment::default_aspects();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

PipelineAssets load_assets(const PipelineConfig& config) {
  config.validate();
  for (const auto* p : {&config.corpus, &config.features, &config.message_model,
                        &config.target_model}) {
    if (p->empty()) throw std::invalid_argument("config is missing a required path");
    if (!std::filesystem::exists(*p)) throw Error("missing file: " + p->string());
  }
  PipelineAssets a;
  a.config = config;
  if (a.config.aspects.empty()) a.config.aspects = sentiment::default_aspects();
  a.galleries = corpus::merge_galleries(
      std::span<const corpus::Post>(corpus::load_corpus(config.corpus, config.years)));
  std::vector<vlad::GlobalFeature> features;
  for (const auto& r : import_embeddings(config.features)) features.push_back(vlad::from_record(r));
  a.index = std::make_shared<const index::FeatureIndex>(features);
  a.message_model = sentiment::load_model(config.message_model);
  a.target_model = sentiment::load_model(config.target_model);
  if (a.message_model.head() != sentiment::Head::message) {
    throw Error(config.message_model.string() + " is not a message-level model");
  }
  if (a.target_model.head() != sentiment::Head::target) {
    throw Error(config.target_model.string() + " is not a target-level model");
  }
  if (!config.labels.empty()) a.labels = index::load_labels(config.labels);
  a.transform = [](std::string_view s) { return std::string(s); };
  return a;
}

namespace {

std::string join_nonempty(std::initializer_list<std::string_view> parts) {
  std::string out;
  for (auto p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

void fill_examples(ExamplesByClass& out, std::vector<std::pair<std::size_t, sentiment::Distribution>>& scored,
                   const std::vector<const corpus::GalleryPost*>& posts,
                   const std::vector<std::string>& texts, std::size_t max_examples) {
  for (std::size_t c = 0; c < sentiment::kClasses; ++c) {
    std::vector<PostExample> bucket;
    for (const auto& [i, dist] : scored) {
      if (static_cast<std::size_t>(sentiment::argmax(dist)) != c) continue;
      bucket.push_back({posts[i]->gallery_id, texts[i], dist[c]});
    }
    std::stable_sort(bucket.begin(), bucket.end(), [](const PostExample& a, const PostExample& b) {
      if (a.probability != b.probability) return a.probability > b.probability;
      return a.gallery_id < b.gallery_id;
    });
    if (bucket.size() > max_examples) bucket.resize(max_examples);
    out[c] = std::move(bucket);
  }
}

}  // namespace

std::string message_text(const corpus::GalleryPost& post) {
  std::string tags;
  for (const auto& h : post.hashtags) {
    if (!tags.empty()) tags += ' ';
    tags += h;
  }
  return join_nonempty({post.title, post.description, tags});
}

std::string target_text(const corpus::GalleryPost& post) {
  return join_nonempty({post.title, post.description});
}

sentiment::Distribution target_distribution(const sentiment::SentimentModel& model,
                                            std::string_view text,
                                            std::span<const std::string> aspects) {
  if (aspects.empty()) throw std::invalid_argument("at least one aspect is required");
  const auto tokens = model.encode(text);
  sentiment::Distribution acc{};
  for (const auto& a : aspects) {
    const auto p = sentiment::forward_target(model, tokens, model.encode(a));
    for (std::size_t c = 0; c < sentiment::kClasses; ++c) acc[c] += p[c];
  }
  for (auto& v : acc) v /= static_cast<double>(aspects.size());
  return acc;
}

PipelineReport run_pipeline(const PipelineAssets& assets, std::string_view query_image_id) {
  const auto& cfg = assets.config;
  if (!assets.index->contains(query_image_id)) {
    throw std::invalid_argument("unknown query image \"" + std::string(query_image_id) + "\"");
  }
  PipelineReport report;
  report.query_image_id = std::string(query_image_id);
  report.radius = cfg.radius;
  report.retrieved = assets.index->query_radius(assets.index->vector(query_image_id), cfg.radius);

  std::unordered_map<std::string, std::size_t> gallery_of_image;
  for (std::size_t g = 0; g < assets.galleries.size(); ++g) {
    for (const auto& id : assets.galleries[g].image_ids) gallery_of_image.emplace(id, g);
  }
  std::vector<corpus::GalleryPost> joined;
  std::unordered_set<std::size_t> seen;
  for (const auto& hit : report.retrieved) {
    auto it = gallery_of_image.find(hit.image_id);
    if (it == gallery_of_image.end() || !seen.insert(it->second).second) continue;
    joined.push_back(assets.galleries[it->second]);
    report.galleries.push_back(joined.back().gallery_id);
  }
  report.retrieved_count = joined.size();
  report.mention = corpus::search_mentions(joined, cfg.terms);

  const auto transform = assets.transform ? assets.transform
                                          : TextTransform([](std::string_view s) { return std::string(s); });
  const auto& aspects = cfg.aspects.empty() ? sentiment::default_aspects() : cfg.aspects;

  std::vector<const corpus::GalleryPost*> posts;
  std::vector<std::string> msg_texts;
  std::vector<std::pair<std::size_t, sentiment::Distribution>> msg_scores;
  for (const auto& g : joined) {
    const auto text = transform(message_text(g));
    const auto p = sentiment::forward_message(assets.message_model, assets.message_model.encode(text));
    ++report.message_hist[static_cast<std::size_t>(sentiment::argmax(p))];
    msg_scores.emplace_back(posts.size(), p);
    posts.push_back(&g);
    msg_texts.push_back(text);
  }
  fill_examples(report.message_examples, msg_scores, posts, msg_texts, cfg.max_examples);

  std::vector<const corpus::GalleryPost*> tposts;
  std::vector<std::string> tgt_texts;
  std::vector<std::pair<std::size_t, sentiment::Distribution>> tgt_scores;
  for (const auto& g : joined) {
    if (!corpus::contains_any(g.title, cfg.terms) && !corpus::contains_any(g.description, cfg.terms)) {
      continue;
    }
    const auto text = transform(target_text(g));
    const auto p = target_distribution(assets.target_model, text, aspects);
    ++report.target_hist[static_cast<std::size_t>(sentiment::argmax(p))];
    tgt_scores.emplace_back(tposts.size(), p);
    tposts.push_back(&g);
    tgt_texts.push_back(text);
  }
  report.target_subset_count = tposts.size();
  fill_examples(report.target_examples, tgt_scores, tposts, tgt_texts, cfg.max_examples);
  return report;
}

PipelineReport run_pipeline(const PipelineConfig& config, std::string_view query_image_id) {
  return run_pipeline(load_assets(config), query_image_id);
}

// ---------------------------------------------------------------- report JSON

namespace {

json histogram_json(const Histogram& h) {
  json out = json::object();
  for (auto l : sentiment::kAllLabels) {
    out[std::string(sentiment::to_string(l))] = h[static_cast<std::size_t>(l)];
  }
  return out;
}

Histogram histogram_from(const json& j) {
  Histogram h{};
  for (auto l : sentiment::kAllLabels) {
    h[static_cast<std::size_t>(l)] = j.at(std::string(sentiment::to_string(l))).get<std::size_t>();
  }
  return h;
}

json examples_json(const ExamplesByClass& ex, std::size_t max_examples) {
  json out = json::object();
  for (auto l : sentiment::kAllLabels) {
    json arr = json::array();
    const auto& bucket = ex[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < bucket.size() && i < max_examples; ++i) {
      arr.push_back({{"gallery_id", bucket[i].gallery_id},
                     {"text", bucket[i].text},
                     {"probability", bucket[i].probability}});
    }
    out[std::string(sentiment::to_string(l))] = std::move(arr);
  }
  return out;
}

ExamplesByClass examples_from(const json& j) {
  ExamplesByClass ex;
  for (auto l : sentiment::kAllLabels) {
    for (const auto& e : j.at(std::string(sentiment::to_string(l)))) {
      ex[static_cast<std::size_t>(l)].push_back({e.at("gallery_id").get<std::string>(),
                                                 e.at("text").get<std::string>(),
                                                 e.at("probability").get<double>()});
    }
  }
  return ex;
}

}  // namespace

std::string report_to_json(const PipelineReport& r, std::size_t max_examples) {
  json retrieved = json::array();
  for (const auto& q : r.retrieved) {
    retrieved.push_back({{"image_id", q.image_id}, {"distance", q.distance}});
  }
  const auto& m = r.mention;
  json doc = {
      {"query_image_id", r.query_image_id},
      {"radius", r.radius},
      {"retrieved", std::move(retrieved)},
      {"retrieved_images", r.retrieved.size()},
      {"galleries", r.galleries},
      {"retrieved_count", r.retrieved_count},
      {"mention",
       {{"total", m.total},
        {"any_mention", m.any_mention},
        {"in_hashtags", m.in_hashtags},
        {"in_description", m.in_description},
        {"in_title", m.in_title},
        {"coverage", m.coverage},
        {"text_missed", m.text_missed()},
        {"text_missed_fraction",
         m.total == 0 ? 0.0 : static_cast<double>(m.text_missed()) / static_cast<double>(m.total)}}},
      {"message_hist", histogram_json(r.message_hist)},
      {"target_hist", histogram_json(r.target_hist)},
      {"target_subset_count", r.target_subset_count},
      {"examples",
       {{"message", examples_json(r.message_examples, max_examples)},
        {"target", examples_json(r.target_examples, max_examples)}}},
  };
  return doc.dump(2) + "\n";
}

PipelineReport report_from_json(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    PipelineReport r;
    r.query_image_id = doc.at("query_image_id").get<std::string>();
    r.radius = doc.at("radius").get<double>();
    for (const auto& q : doc.at("retrieved")) {
      r.retrieved.push_back({q.at("image_id").get<std::string>(), q.at("distance").get<double>()});
    }
    r.galleries = doc.at("galleries").get<std::vector<std::string>>();
    r.retrieved_count = doc.at("retrieved_count").get<std::size_t>();
    const auto& m = doc.at("mention");
    r.mention.total = m.at("total").get<std::size_t>();
    r.mention.any_mention = m.at("any_mention").get<std::size_t>();
    r.mention.in_hashtags = m.at("in_hashtags").get<std::size_t>();
    r.mention.in_description = m.at("in_description").get<std::size_t>();
    r.mention.in_title = m.at("in_title").get<std::size_t>();
    r.mention.coverage = m.at("coverage").get<double>();
    r.message_hist = histogram_from(doc.at("message_hist"));
    r.target_hist = histogram_from(doc.at("target_hist"));
    r.target_subset_count = doc.at("target_subset_count").get<std::size_t>();
    r.message_examples = examples_from(doc.at("examples").at("message"));
    r.target_examples = examples_from(doc.at("examples").at("target"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

void export_report(const PipelineReport& report, const std::filesystem::path& path,
                   std::size_t max_examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report " + path.string());
  out << report_to_json(report, max_examples);
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
}

PipelineReport import_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

}  // namespace aspectlens::pipeline
