#include "aspectlens/vlad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "aspectlens/binary_io.hpp"
#include "aspectlens/random.hpp"

namespace aspectlens::vlad {

namespace {

std::size_t count_distinct(const MatrixD& points) {
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto r = points.row(i);
    rows.emplace(r.begin(), r.end());
  }
  return rows.size();
}

MatrixD seed_plus_plus(const MatrixD& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  MatrixD centroids;
  centroids.append_row(points.row(rng.below(n)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centroids.rows() < k) {
    const auto last = centroids.row(centroids.rows() - 1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), last));
      total += d2[i];
    }
    // total > 0 because there are more distinct points than centroids.
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    centroids.append_row(points.row(pick));
  }
  return centroids;
}

double assign(const MatrixD& points, const Vocabulary& vocab, std::vector<std::size_t>& labels) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    labels[i] = vocab.nearest(points.row(i));
    sse += squared_distance(points.row(i), vocab.centroids.row(labels[i]));
  }
  return sse;
}

KMeansResult lloyd(const MatrixD& points, MatrixD init, const KMeansOptions& opt,
                   std::uint64_t seed) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  const std::size_t k = init.rows();
  KMeansResult res;
  res.vocabulary.centroids = std::move(init);
  res.vocabulary.seed = seed;
  res.assignment.assign(n, 0);
  auto& centroids = res.vocabulary.centroids;

  for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
    res.sse_history.push_back(assign(points, res.vocabulary, res.assignment));
    ++res.iterations;

    MatrixD next(k, d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(res.assignment[i]);
      const auto src = points.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      ++counts[res.assignment[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      auto row = next.row(c);
      if (counts[c] > 0) {
        for (auto& v : row) v /= static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = n;
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double dist = squared_distance(points.row(i), centroids.row(res.assignment[i]));
        if (dist > best) {
          best = dist;
          far = i;
        }
      }
      taken[far] = true;
      const auto src = points.row(far);
      std::copy(src.begin(), src.end(), row.begin());
    }

    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      movement = std::max(movement, std::sqrt(squared_distance(next.row(c), centroids.row(c))));
    }
    centroids = std::move(next);
    if (movement < opt.tolerance) break;
  }
  res.sse = assign(points, res.vocabulary, res.assignment);
  return res;
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

std::size_t Vocabulary::nearest(std::span<const double> x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double dist = squared_distance(x, centroids.row(c));
    if (dist < best_d) {
      best_d = dist;
      best = c;
    }
  }
  return best;
}

KMeansResult kmeans(const MatrixD& points, const KMeansOptions& opt) {
  if (opt.k == 0) throw std::invalid_argument("k must be at least 1");
  if (opt.restarts == 0) throw std::invalid_argument("restarts must be at least 1");
  const auto distinct = count_distinct(points);
  if (distinct < opt.k) {
    throw std::invalid_argument("k-means needs at least k distinct points (have " +
                                std::to_string(distinct) + ", k = " + std::to_string(opt.k) + ")");
  }
  KMeansResult best;
  for (std::size_t r = 0; r < opt.restarts; ++r) {
    Rng rng(r == 0 ? opt.seed : derive_seed(opt.seed, r));
    auto res = lloyd(points, seed_plus_plus(points, opt.k, rng), opt, opt.seed);
    if (r == 0 || res.sse < best.sse) best = std::move(res);
  }
  return best;
}

Vocabulary train_vocabulary(const MatrixD& descriptors, std::size_t k, std::uint64_t seed) {
  KMeansOptions opt;
  opt.k = k;
  opt.seed = seed;
  return kmeans(descriptors, opt).vocabulary;
}

std::vector<double> aggregate(const MatrixD& descriptors, const Vocabulary& vocab) {
  const std::size_t k = vocab.k();
  const std::size_t d = vocab.d();
  std::vector<double> out(k * d, 0.0);
  if (descriptors.rows() == 0) return out;
  if (descriptors.cols() != d) {
    throw std::invalid_argument("descriptor dimension " + std::to_string(descriptors.cols()) +
                                " does not match vocabulary dimension " + std::to_string(d));
  }
  for (std::size_t i = 0; i < descriptors.rows(); ++i) {
    const auto x = descriptors.row(i);
    const std::size_t word = vocab.nearest(x);
    const auto c = vocab.centroids.row(word);
    for (std::size_t j = 0; j < d; ++j) out[word * d + j] += x[j] - c[j];
  }
  for (std::size_t w = 0; w < k; ++w) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += out[w * d + j] * out[w * d + j];
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < d; ++j) out[w * d + j] /= norm;
    }
  }
  double total = 0.0;
  for (double v : out) total += v * v;
  if (total > 0.0) {
    total = std::sqrt(total);
    for (auto& v : out) v /= total;
  }
  return out;
}

GlobalFeature make_feature(std::string image_id, const MatrixD& descriptors,
                           const Vocabulary& vocab) {
  const auto v = aggregate(descriptors, vocab);
  return GlobalFeature{std::move(image_id), std::vector<float>(v.begin(), v.end()),
                       FeatureSource::vlad};
}

MatrixD descriptor_matrix(std::span<const imagefeat::LocalDescriptor> descriptors) {
  MatrixD m(descriptors.size(), imagefeat::kDescriptorSize);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    std::copy(descriptors[i].vector.begin(), descriptors[i].vector.end(), m.row(i).begin());
  }
  return m;
}

GlobalFeature from_record(const EmbeddingRecord& record) {
  return GlobalFeature{record.image_id, record.vector, FeatureSource::imported};
}

EmbeddingRecord to_record(const GlobalFeature& feature) {
  return EmbeddingRecord{feature.image_id, feature.vector};
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write vocabulary " + path.string());
  binio::write_magic(out, "VOC1");
  binio::write_le(out, static_cast<std::uint32_t>(vocab.k()));
  binio::write_le(out, static_cast<std::uint32_t>(vocab.d()));
  binio::write_le(out, vocab.seed);
  for (double v : vocab.centroids.data()) binio::write_f32(out, static_cast<float>(v));
  if (!out) throw FormatError("write failed: " + path.string());
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read vocabulary " + path.string());
  binio::expect_magic(in, "VOC1");
  const auto k = binio::read_le<std::uint32_t>(in, "k");
  const auto d = binio::read_le<std::uint32_t>(in, "d");
  Vocabulary vocab;
  vocab.seed = binio::read_le<std::uint64_t>(in, "seed");
  if (k == 0 || d == 0) throw FormatError(path.string() + ": empty vocabulary");
  vocab.centroids = MatrixD(k, d);
  for (auto& v : vocab.centroids.data()) {
    v = binio::read_f32(in, "centroid");
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite centroid");
  }
  return vocab;
}

}  // namespace aspectlens::vlad
