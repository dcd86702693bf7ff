#include "aspectlens/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "aspectlens/error.hpp"

namespace aspectlens::index {

bool result_before(const QueryResult& a, const QueryResult& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.image_id < b.image_id;
}

double l2_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += t * t;
  }
  return std::sqrt(s);
}

FeatureIndex::FeatureIndex(std::span<const vlad::GlobalFeature> features) {
  if (features.empty()) throw std::invalid_argument("cannot build an empty index");
  dim_ = features.front().vector.size();
  if (dim_ == 0) throw std::invalid_argument("feature vectors must be non-empty");
  ids_.reserve(features.size());
  data_.reserve(features.size() * dim_);
  for (const auto& f : features) {
    if (f.vector.size() != dim_) {
      throw std::invalid_argument("feature \"" + f.image_id + "\" has dimension " +
                                  std::to_string(f.vector.size()) + ", expected " +
                                  std::to_string(dim_));
    }
    if (!std::all_of(f.vector.begin(), f.vector.end(), [](float v) { return std::isfinite(v); })) {
      throw std::invalid_argument("feature \"" + f.image_id + "\" has non-finite values");
    }
    if (!position_.emplace(f.image_id, ids_.size()).second) {
      throw std::invalid_argument("duplicate image_id \"" + f.image_id + "\"");
    }
    ids_.push_back(f.image_id);
    data_.insert(data_.end(), f.vector.begin(), f.vector.end());
  }
}

bool FeatureIndex::contains(std::string_view image_id) const {
  return position_.find(std::string(image_id)) != position_.end();
}

std::span<const float> FeatureIndex::vector(std::string_view image_id) const {
  auto it = position_.find(std::string(image_id));
  if (it == position_.end()) {
    throw std::out_of_range("image_id \"" + std::string(image_id) + "\" is not indexed");
  }
  return vector_at(it->second);
}

void FeatureIndex::check_query(std::span<const float> query) const {
  if (query.size() != dim_) {
    throw std::invalid_argument("query dimension " + std::to_string(query.size()) +
                                " does not match index dimension " + std::to_string(dim_));
  }
}

std::vector<double> FeatureIndex::distances(std::span<const float> query) const {
  std::vector<double> out(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) out[i] = l2_distance(query, vector_at(i));
  return out;
}

std::vector<QueryResult> FeatureIndex::query_knn(std::span<const float> query, std::size_t n,
                                                 std::optional<std::string_view> exclude) const {
  if (n == 0) throw std::invalid_argument("n must be at least 1");
  check_query(query);
  const auto dist = distances(query);
  std::vector<QueryResult> all;
  all.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (exclude && ids_[i] == *exclude) continue;
    all.push_back({ids_[i], dist[i]});
  }
  const std::size_t take = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    result_before);
  all.resize(take);
  return all;
}

std::vector<QueryResult> FeatureIndex::query_radius(std::span<const float> query,
                                                    double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("radius must be positive");
  check_query(query);
  const auto dist = distances(query);
  std::vector<QueryResult> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (dist[i] < r) out.push_back({ids_[i], dist[i]});
  }
  std::sort(out.begin(), out.end(), result_before);
  return out;
}

// ---------------------------------------------------------------- PCA

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y = C x with C = Xc^T Xc / (n - 1), applied without forming C.
void covariance_times(const MatrixD& centered, std::span<const double> x, std::span<double> y) {
  std::fill(y.begin(), y.end(), 0.0);
  const double scale = 1.0 / static_cast<double>(centered.rows() - 1);
  for (std::size_t i = 0; i < centered.rows(); ++i) {
    const auto row = centered.row(i);
    const double proj = dot(row, x) * scale;
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += proj * row[j];
  }
}

void orthogonalize(std::span<double> v, const MatrixD& basis, std::size_t count) {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t c = 0; c < count; ++c) {
      const auto b = basis.row(c);
      const double p = dot(v, b);
      for (std::size_t j = 0; j < v.size(); ++j) v[j] -= p * b[j];
    }
  }
}

// Unit vector orthogonal to the first `count` rows of `basis`, built from
// the first standard basis vector that is not in their span.
std::vector<double> completion(const MatrixD& basis, std::size_t count, std::size_t dim) {
  for (std::size_t e = 0; e < dim; ++e) {
    std::vector<double> v(dim, 0.0);
    v[e] = 1.0;
    orthogonalize(v, basis, count);
    const double nv = norm(v);
    if (nv > 1e-6) {
      for (auto& x : v) x /= nv;
      return v;
    }
  }
  throw std::logic_error("no orthogonal completion available");
}

void fix_sign(std::span<double> v) {
  std::size_t arg = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
  }
  if (v[arg] < 0.0) {
    for (auto& x : v) x = -x;
  }
}

// Cyclic Jacobi eigen-decomposition of a small symmetric matrix. Returns
// eigenvalues; eigenvectors are the columns of `vectors`.
std::vector<double> jacobi_eigen(MatrixD a, MatrixD& vectors) {
  const std::size_t n = a.rows();
  vectors = MatrixD(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vectors(i, i) = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors(k, p);
          const double vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return values;
}

}  // namespace

PcaModel pca_fit(const MatrixD& vectors, std::size_t p, const PcaOptions& options) {
  const std::size_t n = vectors.rows();
  const std::size_t dim = vectors.cols();
  if (p == 0) throw std::invalid_argument("PCA target dimension must be at least 1");
  if (n < p + 1) throw std::invalid_argument("PCA needs at least p + 1 vectors");
  if (p > dim) throw std::invalid_argument("PCA target dimension exceeds input dimension");

  PcaModel model;
  model.mean.assign(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = vectors.row(i);
    for (std::size_t j = 0; j < dim; ++j) model.mean[j] += r[j];
  }
  for (auto& m : model.mean) m /= static_cast<double>(n);
  MatrixD centered(n, dim);
  double total_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      centered(i, j) = vectors(i, j) - model.mean[j];
      total_scale = std::max(total_scale, std::abs(centered(i, j)));
    }
  }

  MatrixD basis(p, dim, 0.0);
  std::vector<double> v(dim);
  std::vector<double> w(dim);
  // Eigenvalues below this are treated as zero (rank deficiency).
  const double zero_floor = 1e-24 * std::max(1.0, total_scale * total_scale);
  for (std::size_t c = 0; c < p; ++c) {
    // Start from the centered row with the largest residual norm.
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> r(centered.row(i).begin(), centered.row(i).end());
      orthogonalize(r, basis, c);
      const double nr = norm(r);
      if (nr > best) {
        best = nr;
        v = r;
      }
    }
    bool degenerate = best <= 1e-12 * std::max(1.0, total_scale);
    if (!degenerate) {
      for (auto& x : v) x /= best;
      for (std::size_t it = 0; it < options.max_iterations; ++it) {
        covariance_times(centered, v, w);
        orthogonalize(w, basis, c);
        const double nw = norm(w);
        if (nw <= zero_floor) {
          degenerate = true;
          break;
        }
        for (auto& x : w) x /= nw;
        double delta = 0.0;
        for (std::size_t j = 0; j < dim; ++j) delta = std::max(delta, std::abs(w[j] - v[j]));
        v.swap(w);
        if (delta < options.tolerance) break;
      }
    }
    if (degenerate) v = completion(basis, c, dim);
    std::copy(v.begin(), v.end(), basis.row(c).begin());
  }

  // Rayleigh-Ritz: diagonalize the covariance restricted to the subspace.
  MatrixD small(p, p, 0.0);
  for (std::size_t a = 0; a < p; ++a) {
    covariance_times(centered, basis.row(a), w);
    for (std::size_t b = 0; b < p; ++b) small(a, b) = dot(w, basis.row(b));
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      const double s = 0.5 * (small(a, b) + small(b, a));
      small(a, b) = small(b, a) = s;
    }
  }
  MatrixD rot;
  const auto values = jacobi_eigen(small, rot);
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  model.components = MatrixD(p, dim, 0.0);
  model.explained_variance.resize(p);
  for (std::size_t out = 0; out < p; ++out) {
    const std::size_t src = order[out];
    auto comp = model.components.row(out);
    for (std::size_t b = 0; b < p; ++b) {
      const double coef = rot(b, src);
      const auto row = basis.row(b);
      for (std::size_t j = 0; j < dim; ++j) comp[j] += coef * row[j];
    }
    const double nc = norm(comp);
    for (auto& x : comp) x /= nc;
    fix_sign(comp);
    model.explained_variance[out] = std::max(0.0, values[src]);
  }
  for (std::size_t out = 1; out < p; ++out) {
    model.explained_variance[out] =
        std::min(model.explained_variance[out], model.explained_variance[out - 1]);
  }
  return model;
}

std::vector<double> pca_project(const PcaModel& model, std::span<const double> vector) {
  if (vector.size() != model.input_dimension()) {
    throw std::invalid_argument("vector dimension does not match PCA model");
  }
  std::vector<double> out(model.output_dimension(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto comp = model.components.row(c);
    double s = 0.0;
    for (std::size_t j = 0; j < vector.size(); ++j) s += comp[j] * (vector[j] - model.mean[j]);
    out[c] = s;
  }
  return out;
}

std::vector<double> pca_project(const PcaModel& model, std::span<const float> vector) {
  const std::vector<double> v(vector.begin(), vector.end());
  return pca_project(model, std::span<const double>(v));
}

// ---------------------------------------------------------------- evaluation

Labels parse_labels(std::string_view text) {
  Labels labels;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0 || tab + 1 >= line.size()) {
      throw FormatError("labels line " + std::to_string(line_no) +
                        ": expected image_id<TAB>class");
    }
    std::string id(line.substr(0, tab));
    if (!labels.emplace(id, std::string(line.substr(tab + 1))).second) {
      throw FormatError("labels line " + std::to_string(line_no) + ": duplicate image_id \"" +
                        id + "\"");
    }
  }
  return labels;
}

Labels load_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read labels " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_labels(buf.str());
}

std::vector<std::string> default_queries(const Labels& labels, std::string_view noise_class) {
  std::vector<std::string> out;
  for (const auto& [id, cls] : labels) {
    if (cls != noise_class) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RetrievalEvalReport evaluate_retrieval(const FeatureIndex& index, const Labels& labels,
                                       std::span<const std::string> query_ids,
                                       std::span<const std::size_t> n_values) {
  if (query_ids.empty()) throw std::invalid_argument("no query images");
  RetrievalEvalReport report;
  report.queries = query_ids.size();
  for (std::size_t n : n_values) {
    double sum = 0.0;
    for (const auto& q : query_ids) {
      auto cls = labels.find(q);
      if (cls == labels.end()) throw std::invalid_argument("query \"" + q + "\" has no label");
      if (!index.contains(q)) throw std::invalid_argument("query \"" + q + "\" is not indexed");
      const auto hits = index.query_knn(index.vector(q), n, q);
      if (hits.empty()) continue;
      std::size_t same = 0;
      for (const auto& h : hits) {
        auto it = labels.find(h.image_id);
        same += (it != labels.end() && it->second == cls->second);
      }
      sum += static_cast<double>(same) / static_cast<double>(hits.size());
    }
    report.per_n[n] = sum / static_cast<double>(query_ids.size());
  }
  return report;
}

MatrixD index_matrix(const FeatureIndex& index) {
  MatrixD m(index.size(), index.dimension());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto v = index.vector_at(i);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

FeatureIndex project_index(const FeatureIndex& index, const PcaModel& model) {
  std::vector<vlad::GlobalFeature> projected;
  projected.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto p = pca_project(model, index.vector_at(i));
    projected.push_back({index.ids()[i], std::vector<float>(p.begin(), p.end()),
                         vlad::FeatureSource::imported});
  }
  return FeatureIndex(projected);
}

RetrievalEvalReport evaluate_retrieval_pca(const FeatureIndex& index, const Labels& labels,
                                           std::span<const std::string> query_ids,
                                           std::span<const std::size_t> n_values,
                                           std::size_t p) {
  const auto model = pca_fit(index_matrix(index), p);
  auto report = evaluate_retrieval(project_index(index, model), labels, query_ids, n_values);
  report.space = Space::pca;
  return report;
}

}  // namespace aspectlens::index

#include <nlohmann/json.hpp>

namespace aspectlens::index {

std::string projection_jsonl(const FeatureIndex& index, const PcaModel& model,
                             const Labels* labels) {
  std::string out;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto p = pca_project(model, index.vector_at(i));
    nlohmann::json line = {{"image_id", index.ids()[i]},
                           {"x", p.empty() ? 0.0 : p[0]},
                           {"y", p.size() < 2 ? 0.0 : p[1]}};
    if (labels != nullptr) {
      auto it = labels->find(index.ids()[i]);
      if (it != labels->end()) line["class"] = it->second;
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace aspectlens::index
