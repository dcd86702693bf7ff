// Command-line front end for the retrieval and sentiment pipeline.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aspectlens/corpus.hpp"
#include "aspectlens/features_io.hpp"
#include "aspectlens/image.hpp"
#include "aspectlens/imagefeat.hpp"
#include "aspectlens/index.hpp"
#include "aspectlens/metrics.hpp"
#include "aspectlens/pipeline.hpp"
#include "aspectlens/sentiment_data.hpp"
#include "aspectlens/service.hpp"
#include "aspectlens/training.hpp"
#include "aspectlens/vlad.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aspectlens;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

index::FeatureIndex load_index(const fs::path& path) {
  std::vector<vlad::GlobalFeature> features;
  for (const auto& r : import_embeddings(path)) features.push_back(vlad::from_record(r));
  return index::FeatureIndex(features);
}

json results_json(const std::vector<index::QueryResult>& hits) {
  json out = json::array();
  for (const auto& h : hits) out.push_back({{"image_id", h.image_id}, {"distance", h.distance}});
  return out;
}

json distribution_json(const sentiment::Distribution& p) {
  json out;
  for (auto l : sentiment::kAllLabels) out[std::string(sentiment::to_string(l))] = p[static_cast<int>(l)];
  out["label"] = sentiment::to_string(sentiment::argmax(p));
  return out;
}

json metrics_json(const sentiment::EvalMetrics& m) {
  return json{{"accuracy", m.accuracy},
              {"macro_f1", m.macro_f1},
              {"confusion", m.confusion},
              {"per_class_f1", m.per_class_f1},
              {"warnings", m.warnings}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-retrieval driven aspect-based sentiment analysis of social-media posts"};
  app.require_subcommand(1);

  // corpus
  std::string corpus_path, years_text = "2016:2019", out_path, galleries_path, terms_text;
  auto* ingest = app.add_subcommand("ingest", "Load a JSONL corpus, filter by year, merge galleries");
  ingest->add_option("--corpus", corpus_path, "corpus.jsonl")->required();
  ingest->add_option("--years", years_text, "inclusive year range, e.g. 2016:2019");
  ingest->add_option("--out", out_path, "galleries.jsonl")->required();

  auto* mentions = app.add_subcommand("mentions", "Count term mentions per text field");
  mentions->add_option("--galleries", galleries_path)->required();
  mentions->add_option("--terms", terms_text, "comma-separated terms")
      ->default_val("elbphilharmonie,elphi,philharmonie");

  // image features
  std::string images_dir, descriptors_path, vocab_path, features_path, in_path;
  std::size_t top = imagefeat::kDefaultTop;
  auto* extract = app.add_subcommand("extract", "Detect and describe keypoints in PGM images");
  extract->add_option("--images", images_dir, "directory of P5 PGM files")->required();
  extract->add_option("--top", top, "descriptors kept per image")->default_val(64);
  extract->add_option("--out", out_path)->required();

  auto* import_cmd = app.add_subcommand("import-embeddings", "Validate an embedding file");
  import_cmd->add_option("--in", in_path)->required();

  std::size_t k = vlad::kDefaultWords;
  std::uint64_t seed = 42;
  auto* vocab_cmd = app.add_subcommand("vocab", "Train a k-means visual vocabulary");
  vocab_cmd->add_option("--descriptors", descriptors_path)->required();
  vocab_cmd->add_option("--k", k)->default_val(16);
  vocab_cmd->add_option("--seed", seed)->default_val(42);
  vocab_cmd->add_option("--out", out_path)->required();

  auto* aggregate = app.add_subcommand("aggregate", "Aggregate local descriptors into VLAD vectors");
  aggregate->add_option("--vocab", vocab_path)->required();
  aggregate->add_option("--descriptors", descriptors_path)->required();
  aggregate->add_option("--out", out_path)->required();

  // index
  std::string image_id, labels_path, n_text = "3,5";
  double radius = index::kDefaultRadius;
  std::size_t knn = 0, pca = 0;
  auto* index_cmd = app.add_subcommand("index", "Build an exact L2 index and print a summary");
  index_cmd->add_option("--features", features_path)->required();

  auto* query = app.add_subcommand("query", "Radius or top-n query around an indexed image");
  query->add_option("--features", features_path)->required();
  query->add_option("--image-id", image_id)->required();
  auto* radius_opt = query->add_option("--radius", radius);
  auto* top_opt = query->add_option("--top", knn);
  radius_opt->excludes(top_opt);

  auto* eval = app.add_subcommand("eval", "Top-n same-class retrieval accuracy");
  eval->add_option("--features", features_path)->required();
  eval->add_option("--labels", labels_path, "labels.tsv")->required();
  eval->add_option("--n", n_text)->default_val("3,5");
  eval->add_option("--pca", pca, "also evaluate after projecting to this many dimensions");

  auto* project = app.add_subcommand("project", "Export a PCA projection as JSON lines");
  project->add_option("--features", features_path)->required();
  project->add_option("--pca", pca)->default_val(2);
  project->add_option("--labels", labels_path);
  project->add_option("--out", out_path)->required();

  // sentiment
  std::string data_path, head_text = "message", model_path, text, aspect, fixture_path;
  sentiment::Hyperparams hyper;
  auto* train = app.add_subcommand("train", "Train a message- or target-level sentiment model");
  train->add_option("--data", data_path, "train.tsv")->required();
  train->add_option("--head", head_text)->check(CLI::IsMember({"message", "target"}));
  train->add_option("--seed", seed)->default_val(42);
  train->add_option("--out", out_path)->required();
  train->add_option("--dim", hyper.dim)->default_val(25);
  train->add_option("--lr", hyper.learning_rate)->default_val(0.05);
  train->add_option("--batch", hyper.batch_size)->default_val(16);
  train->add_option("--epochs", hyper.epochs)->default_val(100);

  auto* predict = app.add_subcommand("predict", "Classify one text");
  predict->add_option("--model", model_path)->required();
  predict->add_option("--text", text)->required();
  predict->add_option("--aspect", aspect);

  auto* score = app.add_subcommand("score", "Accuracy and macro-F1 on an annotated fixture");
  score->add_option("--model", model_path)->required();
  score->add_option("--fixture", fixture_path)->required();

  // pipeline
  std::string config_path, query_image, addr = "127.0.0.1:8080";
  auto* report = app.add_subcommand("report", "Run the full pipeline and write report.json");
  report->add_option("--config", config_path, "pipeline.toml")->required();
  report->add_option("--query-image", query_image, "defaults to query_image in the config");
  report->add_option("--out", out_path)->required();

  auto* serve = app.add_subcommand("serve", "Serve the pipeline over HTTP/JSON");
  serve->add_option("--config", config_path)->required();
  serve->add_option("--addr", addr)->default_val("127.0.0.1:8080");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      const auto posts = corpus::load_corpus(corpus_path, corpus::parse_year_range(years_text));
      const auto galleries = corpus::merge_galleries(std::span<const corpus::Post>(posts));
      corpus::write_galleries(out_path, galleries);
      std::cout << json{{"posts", posts.size()}, {"galleries", galleries.size()}}.dump() << '\n';
    } else if (mentions->parsed()) {
      const auto galleries = corpus::load_galleries(galleries_path);
      const auto r = corpus::search_mentions(galleries, split_csv(terms_text));
      std::cout << json{{"total", r.total},
                        {"any_mention", r.any_mention},
                        {"in_hashtags", r.in_hashtags},
                        {"in_description", r.in_description},
                        {"in_title", r.in_title},
                        {"coverage", r.coverage},
                        {"text_missed", r.text_missed()}}
                       .dump()
                << '\n';
    } else if (extract->parsed()) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(images_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      std::vector<ImageDescriptors> all;
      for (const auto& f : files) {
        const auto descs = imagefeat::detect_and_describe(read_pgm(f));
        all.push_back({f.stem().string(), imagefeat::select_top(descs, top)});
      }
      write_local_descriptors(out_path, all);
      std::cout << json{{"images", all.size()}}.dump() << '\n';
    } else if (import_cmd->parsed()) {
      const auto recs = import_embeddings(in_path);
      std::cout << json{{"records", recs.size()},
                        {"dimension", recs.empty() ? 0 : recs.front().vector.size()}}
                       .dump()
                << '\n';
    } else if (vocab_cmd->parsed()) {
      MatrixD pooled;
      for (const auto& img : read_local_descriptors(descriptors_path)) {
        const auto m = vlad::descriptor_matrix(img.descriptors);
        for (std::size_t i = 0; i < m.rows(); ++i) pooled.append_row(m.row(i));
      }
      const auto vocab = vlad::train_vocabulary(pooled, k, seed);
      vlad::write_vocabulary(out_path, vocab);
      std::cout << json{{"k", vocab.k()}, {"d", vocab.d()}, {"descriptors", pooled.rows()}}.dump()
                << '\n';
    } else if (aggregate->parsed()) {
      const auto vocab = vlad::read_vocabulary(vocab_path);
      std::vector<EmbeddingRecord> recs;
      for (const auto& img : read_local_descriptors(descriptors_path)) {
        const auto f = vlad::make_feature(img.image_id, vlad::descriptor_matrix(img.descriptors), vocab);
        recs.push_back(vlad::to_record(f));
      }
      write_embeddings(fs::path(out_path), recs);
      std::cout << json{{"records", recs.size()}, {"dimension", vocab.k() * vocab.d()}}.dump() << '\n';
    } else if (index_cmd->parsed()) {
      const auto idx = load_index(features_path);
      std::cout << json{{"entries", idx.size()}, {"dimension", idx.dimension()}}.dump() << '\n';
    } else if (query->parsed()) {
      const auto idx = load_index(features_path);
      const auto q = idx.vector(image_id);
      const auto hits = top_opt->count() > 0 ? idx.query_knn(q, knn) : idx.query_radius(q, radius);
      std::cout << results_json(hits).dump(2) << '\n';
    } else if (eval->parsed()) {
      const auto idx = load_index(features_path);
      const auto labels = index::load_labels(labels_path);
      const auto queries = index::default_queries(labels);
      std::vector<std::size_t> ns;
      for (const auto& s : split_csv(n_text)) ns.push_back(std::stoul(s));
      json out;
      const auto orig = index::evaluate_retrieval(idx, labels, queries, ns);
      for (const auto& [n, acc] : orig.per_n) out["original"]["top" + std::to_string(n)] = acc;
      if (pca > 0) {
        const auto proj = index::evaluate_retrieval_pca(idx, labels, queries, ns, pca);
        for (const auto& [n, acc] : proj.per_n) out["pca"]["top" + std::to_string(n)] = acc;
      }
      out["queries"] = queries.size();
      std::cout << out.dump(2) << '\n';
    } else if (project->parsed()) {
      const auto idx = load_index(features_path);
      const auto model = index::pca_fit(index::index_matrix(idx), pca);
      index::Labels labels;
      if (!labels_path.empty()) labels = index::load_labels(labels_path);
      std::ofstream out(out_path, std::ios::binary);
      out << index::projection_jsonl(idx, model, labels_path.empty() ? nullptr : &labels);
      if (!out) throw Error("write failed: " + out_path);
      std::cout << json{{"points", idx.size()}, {"explained_variance", model.explained_variance}}.dump()
                << '\n';
    } else if (train->parsed()) {
      const auto head = sentiment::parse_head(head_text);
      const auto rows = sentiment::load_training_tsv(data_path);
      auto vocab = sentiment::vocabulary_for(rows);
      const auto examples = sentiment::make_examples(rows, head, vocab);
      const auto result = sentiment::train(examples, head, std::move(vocab), hyper, seed);
      sentiment::save_model(out_path, result.model);
      std::cout << json{{"examples", examples.size()},
                        {"final_loss", result.final_loss},
                        {"train_accuracy", result.train_accuracy}}
                       .dump()
                << '\n';
    } else if (predict->parsed()) {
      const auto model = sentiment::load_model(model_path);
      sentiment::Distribution p{};
      if (model.head() == sentiment::Head::target) {
        const std::vector<std::string> aspects =
            aspect.empty() ? sentiment::default_aspects() : std::vector<std::string>{aspect};
        p = pipeline::target_distribution(model, text, aspects);
      } else {
        p = sentiment::forward_message(model, model.encode(text));
      }
      std::cout << distribution_json(p).dump() << '\n';
    } else if (score->parsed()) {
      const auto model = sentiment::load_model(model_path);
      std::vector<sentiment::Label> pred, gold;
      for (const auto& post : sentiment::load_fixture(fixture_path)) {
        if (model.head() == sentiment::Head::target) {
          if (!post.aspect) continue;
          const std::vector<std::string> aspects{*post.aspect};
          pred.push_back(sentiment::argmax(pipeline::target_distribution(model, post.text, aspects)));
        } else {
          pred.push_back(sentiment::argmax(sentiment::forward_message(model, model.encode(post.text))));
        }
        gold.push_back(post.gold);
      }
      const auto m = sentiment::evaluate(pred, gold);
      for (const auto& w : m.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << metrics_json(m).dump(2) << '\n';
    } else if (report->parsed()) {
      const auto config = pipeline::load_config(config_path);
      if (query_image.empty()) query_image = config.query_image;
      if (query_image.empty()) throw std::invalid_argument("no query image: pass --query-image or set query_image");
      const auto r = pipeline::run_pipeline(config, query_image);
      pipeline::export_report(r, out_path, config.max_examples);
      std::cout << json{{"retrieved_images", r.retrieved.size()},
                        {"retrieved_count", r.retrieved_count},
                        {"target_subset_count", r.target_subset_count}}
                       .dump()
                << '\n';
    } else if (serve->parsed()) {
      const auto config = pipeline::load_config(config_path);
      std::cerr << "serving on http://" << addr << '\n';
      service::serve(config, addr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
