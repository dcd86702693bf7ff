// Writes the synthetic fixture: a small corpus with hand-countable mention
// statistics, an 8-d feature file laid out around a query image, sentiment
// training sets with trained models, and 6 x 6 landmark-style PGM images.
//
//   make_fixture <out_dir>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspectlens/corpus.hpp"
#include "aspectlens/features_io.hpp"
#include "aspectlens/image.hpp"
#include "aspectlens/random.hpp"
#include "aspectlens/sentiment_data.hpp"
#include "aspectlens/training.hpp"

namespace fs = std::filesystem;
using namespace aspectlens;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr std::int64_t kJune2017 = 1496275200;
constexpr std::int64_t kJune2015 = 1433116800;
constexpr std::size_t kDim = 8;

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

struct PostSpec {
  const char* id;
  const char* author;
  std::int64_t ts;
  const char* title;
  const char* desc;
  std::vector<std::string> tags;
  const char* image;
};

std::vector<PostSpec> corpus_posts() {
  // e01..e09 lie inside the unit ball around e01; o01 sits exactly on the
  // boundary and o02..o10 lie outside.
  return {
      {"p01", "u1", kJune2017, "Elbphilharmonie at sunset", "", {"hamburg", "elbphilharmonie"}, "e01"},
      {"p02", "u2", kJune2017 + 3600, "Harbour view", "Visiting the Elphi today", {}, "e02"},
      {"p03", "u3", kJune2017 + 7200, "Concert night", "What a beautiful building.",
       {"ELBPHILHARMONIE", "hamburg"}, "e03"},
      {"p04", "u3", kJune2017 + 7200, "Concert night", "What a beautiful building.",
       {"ELBPHILHARMONIE", "hamburg"}, "e04"},
      {"p05", "u4", kJune2017 + 86400, "Harbour at dusk", "Cranes and ships on the Elbe",
       {"hamburg", "harbour"}, "e05"},
      {"p06", "u5", kJune2017 + 2 * 86400, "Speicherstadt", "", {}, "e06"},
      {"p07", "u6", kJune2017 + 3 * 86400, "Philharmonie roof",
       "The Elbphilharmonie is a waste of money", {"elphi"}, "e07"},
      {"p08", "u7", kJune2017 + 4 * 86400, "Lovely evening walk", "Great weather in Hamburg",
       {"sunset"}, "e08"},
      {"p09", "u8", kJune2015, "Elbphilharmonie construction site", "", {"elbphilharmonie"}, "e09"},
      {"p10", "u9", kJune2017 + 5 * 86400, "Elbphilharmonie from the river", "", {}, "o01"},
      {"p11", "u9", kJune2017 + 6 * 86400, "Town hall", "Rathaus in the rain", {"rathaus"}, "o02"},
      {"p12", "u10", kJune2017 + 7 * 86400, "Holstentor", "", {"luebeck"}, "o03"},
      {"p13", "u10", kJune2017 + 8 * 86400, "Michel", "St. Michaelis church tower", {}, "o04"},
      {"p14", "u11", kJune2017 + 9 * 86400, "Street art", "Sternschanze walls", {"graffiti"}, "o05"},
      {"p15", "u11", kJune2017 + 10 * 86400, "Night skyline", "Elphi lights across the water",
       {}, "o06"},
      {"p16", "u12", kJune2017 + 11 * 86400, "Market", "", {"fischmarkt"}, "o07"},
      {"p17", "u12", kJune2017 + 12 * 86400, "Alster", "Sailing boats", {"alster"}, "o08"},
      {"p18", "u13", kJune2017 + 13 * 86400, "Bridge", "", {"hamburg", "elbphilharmonie"}, "o09"},
      {"p19", "u13", kJune2017 + 14 * 86400, "Park", "Planten un Blomen", {}, "o10"},
  };
}

void write_corpus(const fs::path& dir) {
  std::string out;
  for (const auto& p : corpus_posts()) {
    nlohmann::json j{{"post_id", p.id},     {"author_id", p.author}, {"timestamp", p.ts},
                     {"title", p.title},    {"description", p.desc}, {"hashtags", p.tags},
                     {"image_id", p.image}};
    out += j.dump() + "\n";
  }
  write_text(dir / "corpus.jsonl", out);
}

void write_features(const fs::path& dir) {
  std::vector<EmbeddingRecord> recs;
  std::string labels;
  for (int k = 1; k <= 9; ++k) {
    std::vector<float> v(kDim, 0.0f);
    if (k > 1) v[(k - 2) % kDim] = 0.1f * static_cast<float>(k - 1);
    char id[8];
    std::snprintf(id, sizeof id, "e%02d", k);
    recs.push_back({id, v});
    labels += std::string(id) + "\telbphilharmonie\n";
  }
  for (int k = 1; k <= 10; ++k) {
    std::vector<float> v(kDim, 0.0f);
    if (k == 1) {
      v[0] = 1.0f;
    } else {
      v[k % kDim] = 1.5f + 0.1f * static_cast<float>(k);
      v[(k + 3) % kDim] = 0.25f;
    }
    char id[8];
    std::snprintf(id, sizeof id, "o%02d", k);
    recs.push_back({id, v});
    labels += std::string(id) + "\trandom\n";
  }
  write_embeddings(dir / "features.emb", recs);
  write_text(dir / "labels.tsv", labels);
}

// Templated sentences with planted polarity words.
struct TrainingSets {
  std::string message;
  std::string target;
};

TrainingSets training_sets() {
  const std::array<const char*, 6> subjects{"the elbphilharmonie", "hamburg",      "the building",
                                            "the harbour",         "the new opera", "the concert hall"};
  const std::array<const char*, 8> pos{"beautiful", "lovely",  "great",   "amazing",
                                       "wonderful", "perfect", "stunning", "fascinating"};
  const std::array<const char*, 8> neg{"ugly",      "terrible", "awful",  "strange",
                                       "expensive", "boring",   "a waste of money", "disappointing"};
  const std::array<const char*, 8> neu{"is located in the harbour",
                                       "was built on an old storage building",
                                       "is a concert hall on the elbe",
                                       "is called elphi",
                                       "opened in 2017",
                                       "is in the hafencity quarter",
                                       "has a wave roof",
                                       "is next to the speicherstadt"};
  Rng rng(kSeed);
  TrainingSets sets;
  int id = 0;
  for (int round = 0; round < 30; ++round) {
    for (int cls = 0; cls < 3; ++cls) {
      const std::string subject = subjects[rng.below(subjects.size())];
      std::string text, label;
      if (cls == 0) {
        text = (rng.below(2) == 0 ? "what a " + std::string(pos[rng.below(pos.size())]) + " view of " + subject
                                  : subject + " is " + pos[rng.below(pos.size())] + " !");
        label = rng.below(2) == 0 ? "2" : "1";
      } else if (cls == 1) {
        text = subject + " " + neu[rng.below(neu.size())];
        label = "0";
      } else {
        text = subject + " is " + neg[rng.below(neg.size())];
        label = rng.below(2) == 0 ? "-2" : "-1";
      }
      const std::string row_id = "t" + std::to_string(++id);
      sets.message += row_id + "\t" + label + "\t" + text + "\n";
      sets.target += row_id + "\t" + subject + "\t" + label + "\t" + text + "\n";
    }
  }
  return sets;
}

void write_models(const fs::path& dir) {
  const auto sets = training_sets();
  write_text(dir / "train_message.tsv", sets.message);
  write_text(dir / "train_target.tsv", sets.target);
  for (auto head : {sentiment::Head::message, sentiment::Head::target}) {
    const auto name = head == sentiment::Head::message ? "message" : "target";
    const auto rows = sentiment::load_training_tsv(dir / (std::string("train_") + name + ".tsv"));
    auto vocab = sentiment::vocabulary_for(rows);
    const auto examples = sentiment::make_examples(rows, head, vocab);
    const auto result = sentiment::train(examples, head, std::move(vocab), {}, kSeed);
    sentiment::save_model(dir / (std::string(name) + ".snt"), result.model);
    std::cout << name << " model: train accuracy " << result.train_accuracy << '\n';
  }
}

// Each landmark class is a fixed arrangement of Gaussian blobs; images of a
// class jitter the arrangement and add noise. The random class scatters
// blobs anywhere.
void write_landmarks(const fs::path& dir) {
  const fs::path img_dir = dir / "landmarks";
  fs::create_directories(img_dir);
  const std::array<const char*, 6> classes{"elphi",    "sternschanze", "holstentor",
                                           "rathaus",  "michaelis",    "random"};
  constexpr std::size_t kSide = 64;
  constexpr int kBlobs = 5;
  Rng layout(derive_seed(kSeed, 7));
  std::array<std::array<std::array<double, 3>, kBlobs>, 6> arrangement{};
  for (auto& cls : arrangement) {
    for (auto& b : cls) b = {layout.uniform(12, 52), layout.uniform(12, 52), layout.uniform(1.5, 3.5)};
  }
  std::string labels;
  Rng rng(derive_seed(kSeed, 8));
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (int i = 1; i <= 6; ++i) {
      GrayImage img(kSide, kSide, 0.1);
      for (int b = 0; b < kBlobs; ++b) {
        auto [bx, by, bs] = arrangement[c][b];
        if (classes[c] == std::string("random")) {
          bx = rng.uniform(12, 52);
          by = rng.uniform(12, 52);
          bs = rng.uniform(1.5, 3.5);
        } else {
          bx += rng.uniform(-1.0, 1.0);
          by += rng.uniform(-1.0, 1.0);
        }
        for (std::size_t y = 0; y < kSide; ++y) {
          for (std::size_t x = 0; x < kSide; ++x) {
            const double dx = static_cast<double>(x) - bx, dy = static_cast<double>(y) - by;
            img.pixels[y * kSide + x] += 0.8 * std::exp(-(dx * dx + dy * dy) / (2 * bs * bs));
          }
        }
      }
      for (auto& p : img.pixels) p = std::clamp(p + rng.uniform(-0.02, 0.02), 0.0, 1.0);
      const std::string id = std::string(classes[c]) + "_" + std::to_string(i);
      write_pgm(img_dir / (id + ".pgm"), img);
      labels += id + "\t" + classes[c] + "\n";
    }
  }
  write_text(dir / "landmark_labels.tsv", labels);
}

void write_config(const fs::path& dir) {
  write_text(dir / "pipeline.toml",
             "# Synthetic fixture pipeline\n"
             "radius = 1.0\n"
             "terms = [\"elbphilharmonie\", \"elphi\", \"philharmonie\"]\n"
             "aspects = [\"\\\"Elbphilharmonie\\\"\", \"Elbphilharmonie in Hamburg\"]\n"
             "years = \"2016:2019\"\n"
             "corpus = \"corpus.jsonl\"\n"
             "features = \"features.emb\"\n"
             "message_model = \"message.snt\"\n"
             "target_model = \"target.snt\"\n"
             "labels = \"labels.tsv\"\n"
             "images = \"landmarks\"\n"
             "query_image = \"e01\"\n"
             "max_examples = 20\n"
             "pca_dim = 2\n");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <out_dir>\n";
    return 2;
  }
  try {
    const fs::path dir = argv[1];
    fs::create_directories(dir);
    write_corpus(dir);
    write_features(dir);
    write_models(dir);
    write_landmarks(dir);
    write_config(dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
