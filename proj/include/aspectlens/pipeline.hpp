#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aspectlens/corpus.hpp"
#include "aspectlens/index.hpp"
#include "aspectlens/sentiment.hpp"

namespace aspectlens::pipeline {

inline constexpr std::size_t kDefaultMaxExamples = 20;

struct PipelineConfig {
  double radius = index::kDefaultRadius;
  std::vector<std::string> terms = corpus::default_terms();
  std::vector<std::string> aspects;  // defaults to the automated aspects
  corpus::YearRange years;
  std::filesystem::path corpus;
  std::filesystem::path features;
  std::filesystem::path message_model;
  std::filesystem::path target_model;
  std::filesystem::path labels;      // optional: classes for the projection export
  std::filesystem::path images;      // optional: directory served under /images
  std::filesystem::path static_dir;  // optional: browser assets
  std::string query_image;           // optional: report served under /report
  std::size_t max_examples = kDefaultMaxExamples;
  std::size_t pca_dim = 2;

  void validate() const;
};

// Reads pipeline.toml. Relative paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);

// Hook applied to post text before classification (e.g. translation).
using TextTransform = std::function<std::string(std::string_view)>;

// Everything a run needs, loaded once and read-only afterwards.
struct PipelineAssets {
  PipelineConfig config;
  std::vector<corpus::GalleryPost> galleries;
  std::shared_ptr<const index::FeatureIndex> index;
  sentiment::SentimentModel message_model;
  sentiment::SentimentModel target_model;
  index::Labels labels;
  TextTransform transform;
};

PipelineAssets load_assets(const PipelineConfig& config);

struct PostExample {
  std::string gallery_id;
  std::string text;
  double probability = 0.0;

  bool operator==(const PostExample&) const = default;
};

using Histogram = std::array<std::size_t, sentiment::kClasses>;
using ExamplesByClass = std::array<std::vector<PostExample>, sentiment::kClasses>;

struct PipelineReport {
  std::string query_image_id;
  double radius = 0.0;
  std::vector<index::QueryResult> retrieved;  // images within the radius
  std::vector<std::string> galleries;         // posts joined to retrieved images
  std::size_t retrieved_count = 0;            // == galleries.size()
  corpus::MentionReport mention;
  Histogram message_hist{};
  Histogram target_hist{};
  std::size_t target_subset_count = 0;
  ExamplesByClass message_examples;
  ExamplesByClass target_examples;

  bool operator==(const PipelineReport&) const = default;
};

// Text fed to the message-level model: title, description and hashtags.
std::string message_text(const corpus::GalleryPost& post);
// Text fed to the target-level model: title and description only.
std::string target_text(const corpus::GalleryPost& post);

// Radius retrieval around the query image, join to gallery posts, mention
// analysis and sentiment histograms.
PipelineReport run_pipeline(const PipelineAssets& assets, std::string_view query_image_id);
PipelineReport run_pipeline(const PipelineConfig& config, std::string_view query_image_id);

// Target-head distribution averaged over the given aspects.
sentiment::Distribution target_distribution(const sentiment::SentimentModel& model,
                                            std::string_view text,
                                            std::span<const std::string> aspects);

std::string report_to_json(const PipelineReport& report,
                           std::size_t max_examples = kDefaultMaxExamples);
PipelineReport report_from_json(std::string_view json);

void export_report(const PipelineReport& report, const std::filesystem::path& path,
                   std::size_t max_examples = kDefaultMaxExamples);
PipelineReport import_report(const std::filesystem::path& path);

}  // namespace aspectlens::pipeline
