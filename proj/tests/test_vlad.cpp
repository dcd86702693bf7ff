#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aspectlens/error.hpp"
#include "aspectlens/random.hpp"
#include "aspectlens/vlad.hpp"
#include "test_util.hpp"

using namespace aspectlens;
using namespace aspectlens::vlad;

namespace {

MatrixD points(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixD m;
  for (const auto& r : rows) {
    const std::vector<double> v(r);
    m.append_row(v);
  }
  return m;
}

MatrixD random_points(Rng& rng, std::size_t n, std::size_t d, double lo = -5, double hi = 5) {
  MatrixD m(n, d);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

Vocabulary vocab_of(const MatrixD& centroids) { return Vocabulary{centroids, 0}; }

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Minimum within-cluster SSE over every 2-partition with both parts non-empty.
double exhaustive_two_means(const MatrixD& x) {
  const std::size_t n = x.rows(), d = x.cols();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    double sse = 0.0;
    for (int side = 0; side < 2; ++side) {
      std::vector<double> mean(d, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1u) != static_cast<unsigned>(side)) continue;
        for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
        ++count;
      }
      for (auto& m : mean) m /= double(count);
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1u) != static_cast<unsigned>(side)) continue;
        sse += squared_distance(x.row(i), mean);
      }
    }
    best = std::min(best, sse);
  }
  return best;
}

}  // namespace

TEST(KMeans, FourPointExample) {
  const auto x = points({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  const auto r = kmeans(x, {.k = 2, .seed = 42});
  auto c = r.vocabulary.centroids;
  std::vector<std::pair<double, double>> got{{c(0, 0), c(0, 1)}, {c(1, 0), c(1, 1)}};
  std::sort(got.begin(), got.end());
  EXPECT_NEAR(got[0].first, 0.0, 1e-12);
  EXPECT_NEAR(got[0].second, 0.5, 1e-12);
  EXPECT_NEAR(got[1].first, 10.0, 1e-12);
  EXPECT_NEAR(got[1].second, 0.5, 1e-12);
  EXPECT_NEAR(r.sse, exhaustive_two_means(x), 1e-12);
}

TEST(KMeans, SingleWordIsMean) {
  Rng rng(2);
  const auto x = random_points(rng, 30, 3);
  const auto v = train_vocabulary(x, 1, 7);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 30; ++i) mean += x(i, j);
    EXPECT_NEAR(v.centroids(0, j), mean / 30.0, 1e-12);
  }
}

TEST(KMeans, DeterministicGivenSeed) {
  Rng rng(3);
  const auto x = random_points(rng, 200, 8);
  EXPECT_EQ(train_vocabulary(x, 5, 99), train_vocabulary(x, 5, 99));
  EXPECT_EQ(train_vocabulary(x, 5, 99).seed, 99u);
}

TEST(KMeans, SseNonIncreasingAcrossIterations) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_points(rng, 100, 4);
    const auto r = kmeans(x, {.k = 6, .seed = std::uint64_t(trial)});
    ASSERT_FALSE(r.sse_history.empty());
    for (std::size_t i = 1; i < r.sse_history.size(); ++i) {
      EXPECT_LE(r.sse_history[i], r.sse_history[i - 1] + 1e-9);
    }
    EXPECT_LE(r.iterations, 100u);
  }
}

TEST(KMeans, CentroidsDistinctAndFinite) {
  // Heavy duplication makes empty clusters likely during Lloyd steps.
  MatrixD x;
  for (int i = 0; i < 40; ++i) x.append_row(std::vector<double>{0.0, 0.0});
  for (int i = 0; i < 3; ++i) x.append_row(std::vector<double>{double(i + 1), 5.0});
  x.append_row(std::vector<double>{-3.0, 1.0});
  const auto r = kmeans(x, {.k = 5, .seed = 1});
  const auto& c = r.vocabulary.centroids;
  for (std::size_t a = 0; a < 5; ++a) {
    for (double v : c.row(a)) EXPECT_TRUE(std::isfinite(v));
    for (std::size_t b = a + 1; b < 5; ++b) EXPECT_GT(squared_distance(c.row(a), c.row(b)), 0.0);
  }
  EXPECT_NEAR(r.sse, 0.0, 1e-9);
}

TEST(KMeans, FewerDistinctPointsThanKThrows) {
  const auto x = points({{1, 1}, {1, 1}, {2, 2}});
  EXPECT_THROW(train_vocabulary(x, 3, 1), std::invalid_argument);
  EXPECT_THROW(train_vocabulary(x, 0, 1), std::invalid_argument);
  EXPECT_NO_THROW(train_vocabulary(x, 2, 1));
}

TEST(KMeans, RestartsReachExhaustiveOptimumAtToyScale) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.below(6);
    const auto x = random_points(rng, n, 2);
    const auto r = kmeans(x, {.k = 2, .seed = std::uint64_t(trial), .restarts = 10});
    EXPECT_NEAR(r.sse, exhaustive_two_means(x), 1e-9);
  }
}

TEST(Vocabulary, NearestTiesGoToLowerIndex) {
  const auto v = vocab_of(points({{-1, 0}, {1, 0}}));
  EXPECT_EQ(v.nearest(std::vector<double>{0, 0}), 0u);
  EXPECT_EQ(v.nearest(std::vector<double>{0.1, 0}), 1u);
}

TEST(Aggregate, SingleWordHandOracle) {
  const auto v = vocab_of(points({{0, 0}}));
  const auto out = aggregate(points({{3, 4}}), v);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[0], 0.6, 1e-12);
  EXPECT_NEAR(out[1], 0.8, 1e-12);
}

TEST(Aggregate, TwoWordHandOracle) {
  const auto v = vocab_of(points({{0, 0}, {10, 0}}));
  const auto out = aggregate(points({{1, 0}, {9, 0}}), v);
  const std::vector<double> want{std::sqrt(0.5), 0.0, -std::sqrt(0.5), 0.0};
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], want[i], 1e-6);
}

TEST(Aggregate, EmptyGivesZeroVector) {
  const auto v = vocab_of(points({{0, 0, 0}, {1, 1, 1}}));
  const auto out = aggregate(MatrixD(0, 3), v);
  EXPECT_EQ(out, std::vector<double>(6, 0.0));
}

TEST(Aggregate, DescriptorOnCentroidLeavesZeroBlock) {
  const auto v = vocab_of(points({{0, 0}, {10, 0}}));
  const auto out = aggregate(points({{0, 0}, {12, 0}}), v);
  EXPECT_EQ(out, (std::vector<double>{0, 0, 1, 0}));
  const auto zero = aggregate(points({{0, 0}}), v);
  EXPECT_EQ(zero, std::vector<double>(4, 0.0));
}

TEST(Aggregate, DimensionMismatchThrows) {
  const auto v = vocab_of(points({{0, 0}}));
  EXPECT_THROW(aggregate(points({{1, 2, 3}}), v), std::invalid_argument);
}

TEST(Aggregate, NormPermutationAndDuplicationInvariance) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(4), d = 1 + rng.below(5), n = rng.below(21);
    const auto v = vocab_of(random_points(rng, k, d));
    auto x = random_points(rng, n, d);
    const auto base = aggregate(x, v);
    const double nrm = norm(base);
    EXPECT_TRUE(nrm == 0.0 || std::abs(nrm - 1.0) < 1e-6) << nrm;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    MatrixD perm, dup;
    for (auto i : order) perm.append_row(x.row(i));
    for (std::size_t i = 0; i < n; ++i) {
      dup.append_row(x.row(i));
      dup.append_row(x.row(i));
    }
    if (n == 0) perm = dup = MatrixD(0, d);
    const auto p = aggregate(perm, v), q = aggregate(dup, v);
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_NEAR(p[i], base[i], 1e-9);
      EXPECT_NEAR(q[i], base[i], 1e-9);
    }
  }
}

TEST(Feature, MakeFeatureAndRecordConversion) {
  const auto v = vocab_of(points({{0, 0}, {10, 0}}));
  const auto f = make_feature("img", points({{1, 0}, {9, 0}}), v);
  EXPECT_EQ(f.source, FeatureSource::vlad);
  EXPECT_EQ(f.image_id, "img");
  ASSERT_EQ(f.vector.size(), 4u);
  EXPECT_NEAR(f.vector[0], std::sqrt(0.5), 1e-6);
  const auto rec = to_record(f);
  EXPECT_EQ(rec.vector, f.vector);
  EXPECT_EQ(from_record(rec).source, FeatureSource::imported);
}

TEST(VocabularyFile, RoundTrip) {
  testutil::TempDir dir;
  Rng rng(8);
  Vocabulary v{random_points(rng, 4, 3), 1234};
  for (auto& x : v.centroids.data()) x = static_cast<float>(x);  // stored as float32
  write_vocabulary(dir / "v.bin", v);
  EXPECT_EQ(read_vocabulary(dir / "v.bin"), v);
  testutil::write_file(dir / "bad.bin", "VOC1");
  EXPECT_THROW(read_vocabulary(dir / "bad.bin"), FormatError);
}
