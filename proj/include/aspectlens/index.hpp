#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aspectlens/matrix.hpp"
#include "aspectlens/vlad.hpp"

namespace aspectlens::index {

struct QueryResult {
  std::string image_id;
  double distance = 0.0;

  bool operator==(const QueryResult&) const = default;
};

// Orders by distance, then image id.
bool result_before(const QueryResult& a, const QueryResult& b);

inline constexpr double kDefaultRadius = 1.0;

// Exact L2 index over fixed-dimension float vectors. Immutable once built;
// queries are const and safe to run concurrently.
class FeatureIndex {
 public:
  explicit FeatureIndex(std::span<const vlad::GlobalFeature> features);

  std::size_t size() const { return ids_.size(); }
  std::size_t dimension() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }

  bool contains(std::string_view image_id) const;
  std::span<const float> vector(std::string_view image_id) const;
  std::span<const float> vector_at(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  // The n closest entries, optionally skipping one id.
  std::vector<QueryResult> query_knn(std::span<const float> query, std::size_t n,
                                     std::optional<std::string_view> exclude = std::nullopt) const;

  // All entries with distance strictly below r.
  std::vector<QueryResult> query_radius(std::span<const float> query,
                                        double r = kDefaultRadius) const;

 private:
  std::vector<double> distances(std::span<const float> query) const;
  void check_query(std::span<const float> query) const;

  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> position_;
};

double l2_distance(std::span<const float> a, std::span<const float> b);

// Principal axes of a point set.
struct PcaModel {
  std::vector<double> mean;
  MatrixD components;  // p x D, orthonormal rows
  std::vector<double> explained_variance;

  std::size_t input_dimension() const { return mean.size(); }
  std::size_t output_dimension() const { return components.rows(); }
};

struct PcaOptions {
  double tolerance = 1e-9;
  std::size_t max_iterations = 1000;
};

// Sample-covariance PCA by power iteration with deflation, refined by a
// Rayleigh-Ritz rotation within the found subspace. Each component's
// largest-magnitude entry is positive. When p exceeds the rank of the data
// the surplus components are orthonormal completions with zero variance.
PcaModel pca_fit(const MatrixD& vectors, std::size_t p, const PcaOptions& options = {});

std::vector<double> pca_project(const PcaModel& model, std::span<const double> vector);
std::vector<double> pca_project(const PcaModel& model, std::span<const float> vector);

enum class Space { original, pca };

struct RetrievalEvalReport {
  std::map<std::size_t, double> per_n;  // n -> mean per-query accuracy
  Space space = Space::original;
  std::size_t queries = 0;
};

using Labels = std::unordered_map<std::string, std::string>;

inline constexpr std::string_view kRandomClass = "random";

// labels.tsv: image_id <TAB> class_name per line.
Labels load_labels(const std::filesystem::path& path);
Labels parse_labels(std::string_view text);

// Labeled ids, sorted, excluding the noise class.
std::vector<std::string> default_queries(const Labels& labels,
                                         std::string_view noise_class = kRandomClass);

// For each query, retrieves the n nearest other images and scores the
// fraction that share the query's class; reports the mean over queries.
RetrievalEvalReport evaluate_retrieval(const FeatureIndex& index, const Labels& labels,
                                       std::span<const std::string> query_ids,
                                       std::span<const std::size_t> n_values);

// Same protocol after projecting every indexed vector with a PCA fitted on
// the whole index.
RetrievalEvalReport evaluate_retrieval_pca(const FeatureIndex& index, const Labels& labels,
                                           std::span<const std::string> query_ids,
                                           std::span<const std::size_t> n_values,
                                           std::size_t p);

MatrixD index_matrix(const FeatureIndex& index);

// Rebuilds an index whose vectors are the PCA projections of `index`.
FeatureIndex project_index(const FeatureIndex& index, const PcaModel& model);

}  // namespace aspectlens::index

namespace aspectlens::index {

// JSON-lines {image_id, x, y[, class]} of the first two projected
// coordinates (y is 0 for one-dimensional projections), in index order.
std::string projection_jsonl(const FeatureIndex& index, const PcaModel& model,
                             const Labels* labels = nullptr);

}  // namespace aspectlens::index
