#include <emuval/errors.hpp>
#include <emuval/regress.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

using namespace emuval;
using namespace emuval::regress;

namespace {

// Greedy CART on one feature, written independently: every split between
// distinct consecutive values is scored by Σ (label sum)² / count per side,
// the first strict maximum wins, and the threshold is the midpoint.
struct OracleNode {
  bool leaf = true;
  double threshold = 0.0;
  double value = 0.0;
  std::unique_ptr<OracleNode> left, right;

  double predict(double x) const {
    if (leaf) return value;
    return x <= threshold ? left->predict(x) : right->predict(x);
  }
};

std::unique_ptr<OracleNode> oracle_grow(std::vector<std::pair<double, int>> pts, std::size_t min_leaf) {
  auto node = std::make_unique<OracleNode>();
  const double n = static_cast<double>(pts.size());
  double ones = 0.0;
  for (auto& p : pts) ones += p.second;
  node->value = ones / n;
  if (n < 2.0 * static_cast<double>(min_leaf) || ones == 0.0 || ones == n) return node;
  std::sort(pts.begin(), pts.end());
  const double parent = ones * ones / n;
  double best = parent + 1e-9;
  std::size_t best_cut = 0;
  double sl = 0.0;
  for (std::size_t cut = 1; cut < pts.size(); ++cut) {
    sl += pts[cut - 1].second;
    if (pts[cut - 1].first == pts[cut].first) continue;
    const double wl = static_cast<double>(cut);
    const double wr = n - wl;
    if (wl < static_cast<double>(min_leaf) || wr < static_cast<double>(min_leaf)) continue;
    const double score = sl * sl / wl + (ones - sl) * (ones - sl) / wr;
    if (score > best) {
      best = score;
      best_cut = cut;
    }
  }
  if (best_cut == 0) return node;
  node->leaf = false;
  node->threshold = (pts[best_cut - 1].first + pts[best_cut].first) / 2.0;
  node->left = oracle_grow({pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(best_cut)}, min_leaf);
  node->right = oracle_grow({pts.begin() + static_cast<std::ptrdiff_t>(best_cut), pts.end()}, min_leaf);
  return node;
}

LabeledDataset random_dataset(std::size_t n, std::size_t dim, RngStream s, double shift = 0.0) {
  Rng g(s);
  std::vector<double> v;
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t label = i % 2;
    for (std::size_t d = 0; d < dim; ++d) v.push_back(g.normal() + (d == 0 ? shift * label : 0.0));
    y.push_back(label);
  }
  return LabeledDataset(Sample(dim, v), y);
}

}  // namespace

TEST(Forest, SingleTreeMatchesExhaustiveOracle) {
  const std::vector<std::pair<double, int>> pts{{0.3, 0}, {1.2, 1}, {-0.7, 0}, {2.5, 1}, {0.9, 0}, {1.7, 1}};
  std::vector<double> x;
  std::vector<std::uint8_t> y;
  for (auto& p : pts) {
    x.push_back(p.first);
    y.push_back(static_cast<std::uint8_t>(p.second));
  }
  ForestParams params;
  params.n_trees = 1;
  params.bootstrap = false;
  params.mtry = 1;
  params.min_leaf = 1;
  const auto model = fit_random_forest(LabeledDataset(Sample(1, x), y), params, {1, 1});
  const auto oracle = oracle_grow(pts, 1);
  for (double q = -1.5; q <= 3.0; q += 0.05) {
    const std::vector<double> point{q};
    EXPECT_DOUBLE_EQ(model.predict(point), oracle->predict(q)) << "x=" << q;
  }
  EXPECT_DOUBLE_EQ(model.predict(std::vector<double>{0.95}), 0.0);
  EXPECT_DOUBLE_EQ(model.predict(std::vector<double>{1.1}), 1.0);
}

TEST(Forest, RandomOneDimensionalDataMatchesOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng g({seed, 77});
    std::vector<std::pair<double, int>> pts;
    std::vector<double> x;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 40; ++i) {
      const int label = g.bernoulli(0.4) ? 1 : 0;
      const double v = std::round((g.normal() + label) * 8.0) / 8.0;  // includes ties
      pts.push_back({v, label});
      x.push_back(v);
      y.push_back(static_cast<std::uint8_t>(label));
    }
    ForestParams params;
    params.n_trees = 1;
    params.bootstrap = false;
    params.min_leaf = 3;
    const auto model = fit_random_forest(LabeledDataset(Sample(1, x), y), params, {seed, 1});
    const auto oracle = oracle_grow(pts, 3);
    for (double q = -4.0; q <= 5.0; q += 1.0 / 16.0 + 1e-4) {
      ASSERT_DOUBLE_EQ(model.predict(std::vector<double>{q}), oracle->predict(q)) << "seed " << seed;
    }
  }
}

TEST(Forest, FullDepthTreeInterpolatesDistinctPoints) {
  const auto data = random_dataset(60, 3, {5, 0});
  ForestParams params;
  params.n_trees = 1;
  params.bootstrap = false;
  params.mtry = 3;
  params.min_leaf = 1;
  const auto model = fit_random_forest(data, params, {3, 0});
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_DOUBLE_EQ(model.predict(data.points().row(i)), data.labels()[i]);
  }
}

TEST(Forest, PredictionsInUnitIntervalAndDeterministic) {
  const auto data = random_dataset(80, 4, {6, 0}, 1.0);
  const auto a = fit_random_forest(data, {}, {1, 2}).predict(data.points());
  const auto b = fit_random_forest(data, {}, {1, 2}).predict(data.points());
  EXPECT_EQ(a, b);
  for (double m : a) {
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
  }
}

TEST(Forest, RejectsBadParams) {
  const auto data = random_dataset(10, 2, {1, 0});
  ForestParams p;
  p.mtry = 3;
  EXPECT_THROW(fit_random_forest(data, p, {}), InvalidInput);
  p.mtry = 0;
  p.n_trees = 0;
  EXPECT_THROW(fit_random_forest(data, p, {}), InvalidInput);
}

TEST(Knn, MatchesHandComputedNeighbours) {
  // Query 0.0 has neighbours at distance 1 (indices 1 and 2, tie) then 2.
  const Sample pts = Sample::from_rows({{5.0}, {1.0}, {-1.0}, {2.0}, {-2.0}});
  const std::vector<std::uint8_t> y{1, 1, 0, 0, 1};
  const auto m1 = fit_knn(LabeledDataset(pts, y), 1);
  EXPECT_DOUBLE_EQ(m1.predict(std::vector<double>{0.0}), 1.0);  // lowest index wins the tie
  const auto m3 = fit_knn(LabeledDataset(pts, y), 3);
  EXPECT_DOUBLE_EQ(m3.predict(std::vector<double>{0.0}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m3.predict(std::vector<double>{4.0}), 2.0 / 3.0);
  const auto m5 = fit_knn(LabeledDataset(pts, y), 5);
  EXPECT_DOUBLE_EQ(m5.predict(std::vector<double>{100.0}), 0.6);
  EXPECT_THROW(fit_knn(LabeledDataset(pts, y), 6), InvalidInput);
  EXPECT_THROW(fit_knn(LabeledDataset(pts, y), 0), InvalidInput);
}

TEST(Knn, BruteForceAgreement) {
  const auto data = random_dataset(50, 3, {8, 0}, 0.5);
  const std::size_t k = 7;
  const auto model = fit_knn(data, k);
  Rng g({9, 0});
  for (int q = 0; q < 20; ++q) {
    std::vector<double> x{g.normal(), g.normal(), g.normal()};
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 3; ++j) s += std::pow(x[j] - data.points().at(i, j), 2);
      d.push_back({s, i});
    }
    std::sort(d.begin(), d.end());
    double ones = 0;
    for (std::size_t j = 0; j < k; ++j) ones += data.labels()[d[j].second];
    EXPECT_DOUBLE_EQ(model.predict(x), ones / k);
  }
}

TEST(Regress, ResolvedDefaults) {
  EXPECT_EQ(MethodSpec::knn().resolved_k(100), 10u);
  EXPECT_EQ(MethodSpec::knn().resolved_k(101), 11u);
  EXPECT_EQ(ForestParams{}.resolved_mtry(100), 10u);
  EXPECT_EQ(ForestParams{}.resolved_mtry(1), 1u);
  EXPECT_EQ(parse_method("rf"), Method::random_forest);
  EXPECT_THROW(parse_method("svm"), InvalidInput);
}

TEST(Regress, ConstantPredictsPi1) {
  const auto data = random_dataset(9, 2, {1, 0});
  const auto m = fit_constant(data);
  EXPECT_DOUBLE_EQ(m.predict(data.points().row(0)), 4.0 / 9.0);
}

TEST(Regress, PointSetRegressorMatchesFitPredict) {
  const auto data = random_dataset(40, 2, {10, 0}, 1.0);
  for (const auto& spec : {MethodSpec::knn(5), MethodSpec::random_forest(), MethodSpec::constant()}) {
    const PointSetRegressor reg(spec, data.points());
    std::vector<std::uint32_t> train, query;
    std::vector<std::size_t> train_sz;
    for (std::uint32_t i = 0; i < 40; ++i) {
      if (i % 3 == 0) {
        query.push_back(i);
      } else {
        train.push_back(i);
        train_sz.push_back(i);
      }
    }
    std::vector<double> out(query.size());
    reg.fit_predict(train, data.labels(), query, {4, 4}, out);
    const auto model = fit(spec, data.subset(train_sz), {4, 4});
    for (std::size_t j = 0; j < query.size(); ++j) {
      EXPECT_DOUBLE_EQ(out[j], model.predict(data.points().row(query[j]))) << spec.name();
    }
  }
}

TEST(Regress, CvErrorIsBoundedAndSeparatesSignal) {
  const auto null_data = random_dataset(100, 2, {11, 0});
  const auto signal = random_dataset(100, 2, {11, 0}, 4.0);
  const double e0 = estimate_cv_error(MethodSpec::knn(), null_data, 5, {1, 0});
  const double e1 = estimate_cv_error(MethodSpec::knn(), signal, 5, {1, 0});
  EXPECT_GT(e0, 0.2);
  EXPECT_LT(e1, 0.1);
  EXPECT_LE(e0, 1.0);
}

TEST(Regress, CvPartitionRelabelingInvariant) {
  const auto data = random_dataset(30, 2, {12, 0}, 1.0);
  std::vector<std::size_t> a(30), b(30);
  for (std::size_t i = 0; i < 30; ++i) {
    a[i] = i % 3;
    b[i] = (i % 3 + 1) % 3;
  }
  const auto spec = MethodSpec::random_forest();
  EXPECT_DOUBLE_EQ(cv_error_for_partition(spec, data, a, {2, 0}),
                   cv_error_for_partition(spec, data, b, {2, 0}));
}
