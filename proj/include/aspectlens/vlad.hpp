#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aspectlens/error.hpp"
#include "aspectlens/features_io.hpp"
#include "aspectlens/matrix.hpp"

namespace aspectlens::vlad {

inline constexpr std::size_t kDefaultWords = 16;

// k visual words of dimension d.
struct Vocabulary {
  MatrixD centroids;  // k x d
  std::uint64_t seed = 0;

  std::size_t k() const { return centroids.rows(); }
  std::size_t d() const { return centroids.cols(); }

  // Index of the closest word; ties go to the lower index.
  std::size_t nearest(std::span<const double> x) const;

  bool operator==(const Vocabulary&) const = default;
};

enum class FeatureSource { vlad, imported };

struct GlobalFeature {
  std::string image_id;
  std::vector<float> vector;
  FeatureSource source = FeatureSource::imported;

  bool operator==(const GlobalFeature&) const = default;
};

struct KMeansOptions {
  std::size_t k = kDefaultWords;
  std::uint64_t seed = 42;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // max centroid movement
  std::size_t restarts = 1;  // independent k-means++ seedings, lowest SSE kept
};

struct KMeansResult {
  Vocabulary vocabulary;
  std::vector<std::size_t> assignment;
  double sse = 0.0;
  std::size_t iterations = 0;
  // Within-cluster SSE after each assignment step of the kept restart.
  std::vector<double> sse_history;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

// k-means++ seeding followed by Lloyd iterations. Empty clusters are
// reseeded with the point farthest from its current centroid.
KMeansResult kmeans(const MatrixD& points, const KMeansOptions& options);

Vocabulary train_vocabulary(const MatrixD& descriptors, std::size_t k, std::uint64_t seed);

// Per-word residual sums, intra-normalized per block, then L2-normalized
// as a whole. No descriptors gives the zero vector of length k*d.
std::vector<double> aggregate(const MatrixD& descriptors, const Vocabulary& vocab);

GlobalFeature make_feature(std::string image_id, const MatrixD& descriptors,
                           const Vocabulary& vocab);

MatrixD descriptor_matrix(std::span<const imagefeat::LocalDescriptor> descriptors);

GlobalFeature from_record(const EmbeddingRecord& record);
EmbeddingRecord to_record(const GlobalFeature& feature);

// Vocabulary file ("VOC1"): u32 k, u32 d, u64 seed, then k*d float32.
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path);

}  // namespace aspectlens::vlad
