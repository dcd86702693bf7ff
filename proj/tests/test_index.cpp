#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "aspectlens/index.hpp"
#include "aspectlens/random.hpp"
#include "test_util.hpp"

using namespace aspectlens;
using namespace aspectlens::index;
using vlad::GlobalFeature;

namespace {

std::vector<GlobalFeature> random_features(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<GlobalFeature> out;
  for (std::size_t i = 0; i < n; ++i) {
    GlobalFeature f{"img" + std::to_string(i), std::vector<float>(d)};
    for (auto& v : f.vector) v = static_cast<float>(rng.uniform(-1, 1));
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<GlobalFeature> line_features(std::initializer_list<float> xs) {
  std::vector<GlobalFeature> out;
  int i = 0;
  for (float x : xs) out.push_back({"p" + std::to_string(i++), {x}});
  return out;
}

// Full sort by (distance, id) over every entry.
std::vector<QueryResult> oracle_sorted(const std::vector<GlobalFeature>& f,
                                       std::span<const float> q) {
  std::vector<QueryResult> all;
  for (const auto& x : f) all.push_back({x.image_id, l2_distance(x.vector, q)});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.image_id < b.image_id;
  });
  return all;
}

MatrixD to_matrix(const std::vector<std::vector<double>>& rows) {
  MatrixD m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Independent per-query accuracy by enumerating and fully sorting all
// other images.
double oracle_eval(const std::vector<GlobalFeature>& f, const Labels& labels,
                   const std::vector<std::string>& queries, std::size_t n) {
  double sum = 0.0;
  for (const auto& q : queries) {
    const auto& qv = std::find_if(f.begin(), f.end(), [&](auto& x) { return x.image_id == q; })->vector;
    auto all = oracle_sorted(f, qv);
    std::erase_if(all, [&](const auto& r) { return r.image_id == q; });
    all.resize(std::min(n, all.size()));
    std::size_t same = 0;
    for (const auto& r : all) same += labels.at(r.image_id) == labels.at(q);
    sum += double(same) / double(all.size());
  }
  return sum / double(queries.size());
}

}  // namespace

TEST(Build, BasicShapeAndErrors) {
  std::vector<GlobalFeature> f{{"a", {1, 2, 3, 4}}, {"b", {0, 0, 0, 0}}, {"c", {1, 1, 1, 1}}};
  FeatureIndex idx(f);
  EXPECT_EQ(idx.size(), 3u);
  EXPECT_EQ(idx.dimension(), 4u);
  EXPECT_TRUE(idx.contains("b"));
  EXPECT_FALSE(idx.contains("z"));
  EXPECT_THROW(idx.vector("z"), std::out_of_range);

  auto dup = f;
  dup[2].image_id = "a";
  EXPECT_THROW(FeatureIndex{dup}, std::invalid_argument);
  auto mismatch = f;
  mismatch[1].vector.pop_back();
  EXPECT_THROW(FeatureIndex{mismatch}, std::invalid_argument);
  auto nan = f;
  nan[0].vector[0] = std::nanf("");
  EXPECT_THROW(FeatureIndex{nan}, std::invalid_argument);
  EXPECT_THROW(FeatureIndex{std::vector<GlobalFeature>{}}, std::invalid_argument);
}

TEST(Build, InsertionOrderIrrelevant) {
  Rng rng(1);
  auto f = random_features(rng, 100, 6);
  FeatureIndex a(f);
  rng.shuffle(f.begin(), f.end());
  FeatureIndex b(f);
  for (int t = 0; t < 20; ++t) {
    const auto q = random_features(rng, 1, 6)[0].vector;
    EXPECT_EQ(a.query_knn(q, 7), b.query_knn(q, 7));
    EXPECT_EQ(a.query_radius(q, 1.5), b.query_radius(q, 1.5));
  }
}

TEST(Knn, SelfFirstAtZero) {
  Rng rng(2);
  const auto f = random_features(rng, 30, 4);
  FeatureIndex idx(f);
  const auto r = idx.query_knn(f[7].vector, 3);
  EXPECT_EQ(r[0].image_id, "img7");
  EXPECT_EQ(r[0].distance, 0.0);
}

TEST(Knn, LineHandOracle) {
  FeatureIndex idx(line_features({0, 1, 3, 7}));
  const std::vector<float> q{2};
  const auto r = idx.query_knn(q, 2);
  ASSERT_EQ(r.size(), 2u);
  // 1 and 3 are both at distance 1; the tie goes to the smaller id.
  EXPECT_EQ(r[0].image_id, "p1");
  EXPECT_EQ(r[1].image_id, "p2");
}

TEST(Knn, LargeNReturnsAllSorted) {
  FeatureIndex idx(line_features({5, -1, 3}));
  const std::vector<float> q{0};
  const auto r = idx.query_knn(q, 10);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].image_id, "p1");
  EXPECT_EQ(r[1].image_id, "p2");
  EXPECT_EQ(r[2].image_id, "p0");
}

TEST(Knn, ExcludeAndErrors) {
  FeatureIndex idx(line_features({0, 1, 2}));
  const std::vector<float> q{0};
  const auto r = idx.query_knn(q, 2, "p0");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].image_id, "p1");
  EXPECT_THROW(idx.query_knn(q, 0), std::invalid_argument);
  const std::vector<float> bad{0, 0};
  EXPECT_THROW(idx.query_knn(bad, 1), std::invalid_argument);
}

TEST(Knn, MatchesFullSortOracleWithTies) {
  Rng rng(3);
  // Quantized coordinates force many exact distance ties.
  std::vector<GlobalFeature> f;
  for (int i = 0; i < 300; ++i) {
    GlobalFeature x{"id" + std::to_string(1000 - i), std::vector<float>(3)};
    for (auto& v : x.vector) v = float(rng.below(4));
    f.push_back(std::move(x));
  }
  FeatureIndex idx(f);
  for (int t = 0; t < 50; ++t) {
    std::vector<float> q(3);
    for (auto& v : q) v = float(rng.below(4));
    const std::size_t n = 1 + rng.below(40);
    auto want = oracle_sorted(f, q);
    want.resize(n);
    EXPECT_EQ(idx.query_knn(q, n), want);
  }
}

TEST(Radius, StrictBoundary) {
  FeatureIndex idx(line_features({0, 1, 0.5f}));
  const std::vector<float> q{0};
  const auto r = idx.query_radius(q, 1.0);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].image_id, "p0");
  EXPECT_EQ(r[1].image_id, "p2");
}

TEST(Radius, HugeRadiusReturnsEverything) {
  Rng rng(4);
  const auto f = random_features(rng, 50, 3);
  FeatureIndex idx(f);
  EXPECT_EQ(idx.query_radius(f[0].vector, 1e9).size(), 50u);
}

TEST(Radius, MatchesBruteForceAndIsNested) {
  Rng rng(5);
  const auto f = random_features(rng, 200, 5);
  FeatureIndex idx(f);
  for (int t = 0; t < 30; ++t) {
    const auto q = random_features(rng, 1, 5)[0].vector;
    const double r1 = t == 0 ? 0.5 : rng.uniform(0.1, 2.0);
    const double r2 = r1 + rng.uniform(0.0, 1.0);
    auto want = oracle_sorted(f, q);
    std::erase_if(want, [&](const auto& x) { return !(x.distance < r1); });
    const auto got1 = idx.query_radius(q, r1);
    EXPECT_EQ(got1, want);
    const auto got2 = idx.query_radius(q, r2);
    for (const auto& x : got1) {
      EXPECT_NE(std::find(got2.begin(), got2.end(), x), got2.end());
    }
  }
}

TEST(Radius, RejectsNonPositive) {
  FeatureIndex idx(line_features({0}));
  const std::vector<float> q{0};
  EXPECT_THROW(idx.query_radius(q, 0.0), std::invalid_argument);
  EXPECT_THROW(idx.query_radius(q, -1.0), std::invalid_argument);
}

TEST(Pca, CollinearRankOne) {
  const auto m = pca_fit(to_matrix({{0, 0}, {1, 1}, {2, 2}}), 2);
  EXPECT_NEAR(m.components(0, 0), std::sqrt(0.5), 1e-9);
  EXPECT_NEAR(m.components(0, 1), std::sqrt(0.5), 1e-9);
  EXPECT_NEAR(m.explained_variance[0], 2.0, 1e-9);  // sample variance along the line
  EXPECT_NEAR(m.explained_variance[1], 0.0, 1e-12);
  EXPECT_NEAR(dot(m.components.row(0), m.components.row(1)), 0.0, 1e-9);
  // (2,2) projects to sqrt(2) along the line, mean (1,1).
  const auto p = pca_project(m, std::vector<double>{2, 2});
  EXPECT_NEAR(p[0], std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(p[1], 0.0, 1e-9);
}

TEST(Pca, AxisAlignedOrder) {
  const auto m = pca_fit(to_matrix({{-3, 0}, {3, 0}, {0, -1}, {0, 1}}), 2);
  EXPECT_NEAR(m.components(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(m.components(0, 1), 0.0, 1e-9);
  EXPECT_NEAR(m.components(1, 0), 0.0, 1e-9);
  EXPECT_NEAR(m.components(1, 1), 1.0, 1e-9);
  EXPECT_NEAR(m.explained_variance[0], 6.0, 1e-9);
  EXPECT_NEAR(m.explained_variance[1], 2.0 / 3.0, 1e-9);
}

TEST(Pca, DeterministicAndMeanProjectsToZero) {
  Rng rng(6);
  MatrixD x(40, 6);
  for (auto& v : x.data()) v = rng.uniform(-2, 2);
  const auto a = pca_fit(x, 3), b = pca_fit(x, 3);
  EXPECT_EQ(a.components, b.components);
  EXPECT_EQ(a.explained_variance, b.explained_variance);
  for (double v : pca_project(a, a.mean)) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Pca, FullDimensionIsIsometry) {
  Rng rng(7);
  MatrixD x(12, 4);
  for (auto& v : x.data()) v = rng.uniform(-2, 2);
  const auto m = pca_fit(x, 4);
  std::vector<std::vector<double>> p;
  for (std::size_t i = 0; i < 12; ++i) p.push_back(pca_project(m, x.row(i)));
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) {
      double d0 = 0, d1 = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        d0 += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
        d1 += (p[i][k] - p[j][k]) * (p[i][k] - p[j][k]);
      }
      EXPECT_NEAR(std::sqrt(d0), std::sqrt(d1), 1e-8);
    }
  }
}

TEST(Pca, OrthonormalDescendingOnRandomData) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + rng.below(8), n = d + 1 + rng.below(20), p = 1 + rng.below(d);
    MatrixD x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.uniform(-1, 1) * double(j + 1);
    }
    const auto m = pca_fit(x, p);
    for (std::size_t a = 0; a < p; ++a) {
      EXPECT_NEAR(dot(m.components.row(a), m.components.row(a)), 1.0, 1e-6);
      for (std::size_t b = a + 1; b < p; ++b) {
        EXPECT_NEAR(dot(m.components.row(a), m.components.row(b)), 0.0, 1e-6);
      }
      if (a > 0) EXPECT_LE(m.explained_variance[a], m.explained_variance[a - 1]);
      EXPECT_GE(m.explained_variance[a], 0.0);
      // Sign convention: largest-magnitude entry positive.
      const auto row = m.components.row(a);
      const auto big = std::max_element(row.begin(), row.end(),
                                        [](double u, double v) { return std::abs(u) < std::abs(v); });
      EXPECT_GT(*big, 0.0);
    }
  }
}

TEST(Pca, Errors) {
  const auto x = to_matrix({{0, 0}, {1, 1}});
  EXPECT_THROW(pca_fit(x, 0), std::invalid_argument);
  EXPECT_THROW(pca_fit(x, 2), std::invalid_argument);  // needs p + 1 vectors
  EXPECT_THROW(pca_fit(to_matrix({{0}, {1}, {2}}), 2), std::invalid_argument);
  const auto m = pca_fit(x, 1);
  EXPECT_THROW(pca_project(m, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Eval, TwoIdenticalClustersHandOracle) {
  // Two classes of three identical vectors each, clusters far apart.
  std::vector<GlobalFeature> f;
  Labels labels;
  for (int i = 0; i < 3; ++i) {
    f.push_back({"a" + std::to_string(i), {0, 0}});
    f.push_back({"b" + std::to_string(i), {10, 0}});
    labels["a" + std::to_string(i)] = "A";
    labels["b" + std::to_string(i)] = "B";
  }
  FeatureIndex idx(f);
  const auto queries = default_queries(labels);
  const std::vector<std::size_t> ns{2, 3};
  const auto r = evaluate_retrieval(idx, labels, queries, ns);
  EXPECT_DOUBLE_EQ(r.per_n.at(2), 1.0);
  EXPECT_DOUBLE_EQ(r.per_n.at(3), 2.0 / 3.0);
  EXPECT_EQ(r.space, Space::original);
  EXPECT_EQ(r.queries, 6u);
}

TEST(Eval, SingleQueryAllSameClass) {
  std::vector<GlobalFeature> f{{"q", {0}}, {"s1", {1}}, {"s2", {2}}, {"s3", {3}}, {"x", {9}}};
  Labels labels{{"q", "A"}, {"s1", "A"}, {"s2", "A"}, {"s3", "A"}, {"x", "B"}};
  const std::vector<std::string> queries{"q"};
  const std::vector<std::size_t> ns{3};
  EXPECT_DOUBLE_EQ(evaluate_retrieval(FeatureIndex(f), labels, queries, ns).per_n.at(3), 1.0);
}

TEST(Eval, ErrorsOnUnlabeledOrUnknownQuery) {
  std::vector<GlobalFeature> f{{"q", {0}}, {"r", {1}}};
  Labels labels{{"q", "A"}};
  const std::vector<std::size_t> ns{1};
  const std::vector<std::string> unlabeled{"r"}, unknown{"zz"};
  EXPECT_THROW(evaluate_retrieval(FeatureIndex(f), labels, unlabeled, ns), std::invalid_argument);
  labels["zz"] = "A";
  EXPECT_THROW(evaluate_retrieval(FeatureIndex(f), labels, unknown, ns), std::invalid_argument);
}

TEST(Eval, DefaultQueriesSkipNoiseClass) {
  Labels labels{{"b", "x"}, {"a", "x"}, {"r", "random"}};
  EXPECT_EQ(default_queries(labels), (std::vector<std::string>{"a", "b"}));
}

TEST(Eval, PlantedClustersMatchOracleAndIsometryInvariance) {
  Rng rng(9);
  std::vector<GlobalFeature> f;
  Labels labels;
  for (int c = 0; c < 6; ++c) {
    std::vector<float> centre(8);
    for (auto& v : centre) v = float(rng.uniform(-3, 3));
    for (int i = 0; i < 6; ++i) {
      GlobalFeature x{"c" + std::to_string(c) + "_" + std::to_string(i), centre};
      for (auto& v : x.vector) v += float(rng.uniform(-1.5, 1.5));
      labels[x.image_id] = c == 5 ? "random" : "class" + std::to_string(c);
      f.push_back(std::move(x));
    }
  }
  FeatureIndex idx(f);
  const auto queries = default_queries(labels);
  const std::vector<std::size_t> ns{3, 5};
  const auto r = evaluate_retrieval(idx, labels, queries, ns);
  EXPECT_EQ(r.per_n.at(3), oracle_eval(f, labels, queries, 3));
  EXPECT_EQ(r.per_n.at(5), oracle_eval(f, labels, queries, 5));

  // Coordinate permutation, sign flips and an integer shift are exact in
  // float32, so distances and rankings are unchanged.
  auto g = f;
  for (auto& x : g) {
    std::reverse(x.vector.begin(), x.vector.end());
    for (std::size_t j = 0; j < x.vector.size(); j += 2) x.vector[j] = -x.vector[j];
  }
  const auto r2 = evaluate_retrieval(FeatureIndex(g), labels, queries, ns);
  EXPECT_EQ(r2.per_n, r.per_n);

  const auto pr = evaluate_retrieval_pca(idx, labels, queries, ns, 2);
  EXPECT_EQ(pr.space, Space::pca);
  const auto proj = project_index(idx, pca_fit(index_matrix(idx), 2));
  EXPECT_EQ(proj.dimension(), 2u);
  EXPECT_EQ(pr.per_n, evaluate_retrieval(proj, labels, queries, ns).per_n);
}

TEST(Labels, ParseAndErrors) {
  const auto l = parse_labels("a\tx\r\nb\ty z\n\n");
  EXPECT_EQ(l.size(), 2u);
  EXPECT_EQ(l.at("b"), "y z");
  EXPECT_THROW(parse_labels("a x\n"), FormatError);
  EXPECT_THROW(parse_labels("a\tx\na\ty\n"), FormatError);
  EXPECT_THROW(load_labels("/nonexistent.tsv"), FormatError);
}

TEST(Projection, JsonLinesWithClasses) {
  std::vector<GlobalFeature> f{{"a", {0, 0}}, {"b", {2, 0}}, {"c", {1, 1}}};
  FeatureIndex idx(f);
  const auto m = pca_fit(index_matrix(idx), 2);
  Labels labels{{"a", "A"}};
  const auto text = projection_jsonl(idx, m, &labels);
  std::vector<nlohmann::json> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    lines.push_back(nlohmann::json::parse(text.substr(pos, end - pos)));
    pos = end + 1;
  }
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0]["image_id"], "a");
  EXPECT_EQ(lines[0]["class"], "A");
  EXPECT_FALSE(lines[1].contains("class"));
  const auto p = pca_project(m, idx.vector("b"));
  EXPECT_DOUBLE_EQ(lines[1]["x"].get<double>(), p[0]);
  EXPECT_DOUBLE_EQ(lines[1]["y"].get<double>(), p[1]);
}
