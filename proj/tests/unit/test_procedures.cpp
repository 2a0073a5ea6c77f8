#include <emuval/diagnose.hpp>
#include <emuval/errors.hpp>
#include <emuval/globaltest.hpp>
#include <emuval/localtest.hpp>
#include <emuval/parallel.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace emuval;

namespace {

// N(θ + shift, 1)ᴰ, defined for θ in [lo, hi].
class ShiftedNormal final : public models::ApproxLikelihood {
 public:
  ShiftedNormal(std::size_t dim, double shift, double lo = -1e9, double hi = 1e9)
      : dim_(dim), shift_(shift), lo_(lo), hi_(hi) {}
  std::string name() const override { return "shifted"; }
  std::size_t dim() const override { return dim_; }
  double log_density(std::span<const double> x, const Theta& theta) const override {
    double s = 0;
    for (double v : x) s += -0.5 * std::pow(v - theta[0] - shift_, 2) - 0.5 * std::log(2 * M_PI);
    return s;
  }
  Sample sample(const Theta& theta, std::size_t n, RngStream rng) const override {
    Rng g(rng);
    std::vector<double> v(n * dim_);
    for (double& x : v) x = g.normal(theta[0] + shift_, 1.0);
    return Sample(dim_, v);
  }
  bool supports(const Theta& theta) const override { return theta[0] >= lo_ && theta[0] <= hi_; }

 private:
  std::size_t dim_;
  double shift_, lo_, hi_;
};

local::Simulator normal_simulator(std::size_t dim) {
  return [dim](const Theta& theta, std::size_t n, RngStream rng) {
    return ShiftedNormal(dim, 0.0).sample(theta, n, rng);
  };
}

local::LocalTestConfig knn_config(std::size_t m = 99, std::size_t n = 50) {
  local::LocalTestConfig cfg;
  cfg.statistic = stats::TwoSampleStatistic::regression(regress::MethodSpec::knn());
  cfg.m_permutations = m;
  cfg.n_sim0 = n;
  cfg.n_sim1 = n;
  return cfg;
}

}  // namespace

TEST(LocalTest, PValueLiesOnResamplingGrid) {
  const ShiftedNormal em(2, 0.3);
  const auto cfg = knn_config(19, 30);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto r = local::local_test({0.0}, normal_simulator(2), em, cfg, {s, 0});
    const double k = r.p_value * 20.0;
    EXPECT_NEAR(k, std::round(k), 1e-9);
    EXPECT_GE(r.p_value, 1.0 / 20.0);
    EXPECT_LE(r.p_value, 1.0);
    EXPECT_EQ(r.m_used, 19u);
    EXPECT_EQ(r.null_draws.size(), 19u);
    EXPECT_EQ(r.n0, 30u);
    EXPECT_EQ(r.n1, 30u);
    EXPECT_DOUBLE_EQ(r.p_value, resampling_p_value(r.statistic, r.null_draws));
  }
}

TEST(LocalTest, CalibratedUnderNull) {
  const ShiftedNormal em(1, 0.0);
  const auto cfg = knn_config(19, 30);
  const std::size_t trials = 300;
  std::size_t rejections = 0;
  std::vector<double> ps;
  for (std::uint64_t s = 0; s < trials; ++s) {
    const auto r = local::local_test({0.5}, normal_simulator(1), em, cfg, {1000 + s, 0});
    rejections += r.p_value <= 0.05;
    ps.push_back(r.p_value);
  }
  // Exact level is 1/20; 3 SE above it.
  EXPECT_LE(static_cast<double>(rejections) / trials, 0.05 + 3 * std::sqrt(0.05 * 0.95 / trials));
  EXPECT_NEAR(std::accumulate(ps.begin(), ps.end(), 0.0) / trials, 0.525, 0.05);
}

TEST(LocalTest, DetectsLargeShift) {
  const ShiftedNormal em(1, 2.0);
  const auto r = local::local_test({0.0}, normal_simulator(1), em, knn_config(), {3, 0});
  EXPECT_DOUBLE_EQ(r.p_value, 0.01);
}

TEST(LocalTest, Deterministic) {
  const ShiftedNormal em(3, 0.2);
  auto cfg = knn_config(29, 40);
  cfg.statistic = stats::TwoSampleStatistic::regression(regress::MethodSpec::random_forest());
  const auto a = local::local_test({0.0}, normal_simulator(3), em, cfg, {9, 9});
  set_thread_count(3);
  const auto b = local::local_test({0.0}, normal_simulator(3), em, cfg, {9, 9});
  set_thread_count(1);
  EXPECT_EQ(a.statistic, b.statistic);
  EXPECT_EQ(a.null_draws, b.null_draws);
}

TEST(LocalTest, UnsupportedThetaIsInvalidInput) {
  const ShiftedNormal em(1, 0.0, 0.0, 1.0);
  try {
    local::local_test({2.0}, normal_simulator(1), em, knn_config(), {1, 1});
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("theta = (2)"), std::string::npos);
  }
}

TEST(LocalTest, SimulatorErrorsCarryTheta) {
  const ShiftedNormal em(1, 0.0);
  const local::Simulator broken = [](const Theta&, std::size_t, RngStream) -> Sample {
    throw std::runtime_error("boom");
  };
  try {
    local::local_test({0.25}, broken, em, knn_config(), {1, 1});
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("0.25"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}

TEST(LocalTest, PermutationNullMatchesIndependentReplay) {
  // Rows are reordered once with the last substream; replicate m shuffles
  // labels with substream (m, 0) and refits with (m, 1).
  const auto s0 = ShiftedNormal(2, 0.0).sample({0.0}, 20, {1, 0});
  const auto s1 = ShiftedNormal(2, 0.5).sample({0.0}, 25, {2, 0});
  auto cfg = knn_config(9);
  const RngStream rng{5, 5};
  const auto r = local::permutation_test(s0, s1, cfg, rng);
  const auto data = shuffle_rows(pool_and_label(s0, s1), derive_substream(rng, ~std::uint64_t{0}));
  EXPECT_DOUBLE_EQ(r.statistic, stats::evaluate(cfg.statistic, data, derive_substream(rng, 0)));
  for (std::size_t i = 0; i < 9; ++i) {
    const auto sub = derive_substream(rng, i + 1);
    const LabeledDataset perm(data.points(), permute_labels(data.labels(), derive_substream(sub, 0)));
    EXPECT_DOUBLE_EQ(r.null_draws[i], stats::evaluate(cfg.statistic, perm, derive_substream(sub, 1)));
  }
}

TEST(LocalTest, KnnCalibratedOnHeavilyTiedData) {
  // Poisson(1) counts: most pooled points share a lattice site with many
  // others, so the k nearest are decided by tie-breaking.
  std::size_t rejections = 0;
  for (std::uint64_t s = 0; s < 60; ++s) {
    auto draw = [&](std::uint64_t stream) {
      Rng g({900 + s, stream});
      std::vector<double> v(2 * 60);
      for (double& x : v) x = static_cast<double>(g.poisson(1.0));
      return Sample(2, std::move(v));
    };
    rejections += local::permutation_test(draw(0), draw(1), knn_config(19), {s, 3}).p_value <= 0.05;
  }
  EXPECT_LE(rejections, 8u);
}

TEST(LocalTest, McGofCalibratedAndPowerful) {
  const ShiftedNormal em(1, 0.0);
  const local::Sampler sampler = [&](std::size_t n, RngStream r) { return em.sample({0.0}, n, r); };
  const auto st = stats::TwoSampleStatistic::mmd();
  std::size_t rejections = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = em.sample({0.0}, 30, {500 + s, 1});
    rejections += local::mc_gof_test(x, sampler, 60, 19, st, {s, 2}).p_value <= 0.05;
  }
  EXPECT_LE(rejections, 12u);
  const auto far = ShiftedNormal(1, 2.0).sample({0.0}, 30, {1, 1});
  EXPECT_DOUBLE_EQ(local::mc_gof_test(far, sampler, 60, 19, st, {1, 2}).p_value, 0.05);
}

TEST(LocalTest, ConfigValidation) {
  auto cfg = knn_config();
  cfg.m_permutations = 0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = knn_config();
  cfg.n_sim1 = 0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}

TEST(Uniformity, PValueExtremes) {
  using global::Uniformity;
  EXPECT_DOUBLE_EQ(global::uniformity_pvalue(0.0, 20, Uniformity::ks, 99, {1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(global::uniformity_pvalue(1.0, 20, Uniformity::ks, 99, {1, 0}), 0.01);
  EXPECT_DOUBLE_EQ(global::uniformity_pvalue(1.0, 20, Uniformity::cvm, 99, {1, 0}), 0.01);
}

TEST(Uniformity, PValueMonotoneInStatistic) {
  double prev = 1.0;
  for (double stat = 0.0; stat <= 0.6; stat += 0.02) {
    const double p = global::uniformity_pvalue(stat, 30, global::Uniformity::ks, 199, {2, 0});
    EXPECT_LE(p, prev);
    prev = p;
  }
}

TEST(Uniformity, NullDrawsReproduceSubstreams) {
  const auto draws = global::uniformity_null_draws(7, global::Uniformity::cvm, 5, {3, 3});
  for (std::size_t k = 0; k < 5; ++k) {
    Rng g(derive_substream({3, 3}, k));
    std::vector<double> u(7);
    for (double& v : u) v = g.uniform();
    EXPECT_DOUBLE_EQ(draws[k], stats::cvm_uniformity(u));
  }
}

TEST(Uniformity, CvmNullMeanIsOneSixthOverB) {
  // E ∫ (F̂ - z)² = ∫ z(1 - z)/B dz = 1/(6B).
  const auto draws = global::uniformity_null_draws(10, global::Uniformity::cvm, 4000, {4, 0});
  EXPECT_NEAR(std::accumulate(draws.begin(), draws.end(), 0.0) / 4000.0, 1.0 / 60.0, 0.001);
}

TEST(Uniformity, NullQuantilesShrinkWithB) {
  const std::vector<std::size_t> schedule{10, 100, 1000, 10000};
  const auto rows = global::uniformity_null_quantiles(schedule, global::Uniformity::ks, 0.05, 200, {5, 0});
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].quantile, rows[i - 1].quantile);
  EXPECT_LT(rows.back().quantile, 0.02);
  // Asymptotic 95% KS point is 1.358/√B.
  EXPECT_NEAR(rows.back().quantile, 1.358 / 100.0, 0.002);
}

TEST(GlobalTest, FromPValues) {
  const std::vector<double> all_small(50, 0.01);
  const auto r = global::global_test_from_pvalues({}, all_small, global::Uniformity::ks, 999, {1, 0});
  EXPECT_DOUBLE_EQ(r.global_p, 1.0 / 1000.0);
  EXPECT_NEAR(r.statistic, 0.99, 1e-12);
  std::vector<double> spread(50);
  for (std::size_t i = 0; i < 50; ++i) spread[i] = (i + 0.5) / 50.0;
  const auto u = global::global_test_from_pvalues({}, spread, global::Uniformity::ks, 999, {1, 0});
  EXPECT_DOUBLE_EQ(u.global_p, 1.0);
  EXPECT_THROW(global::global_test_from_pvalues({}, {0.5}, global::Uniformity::ks, 9, {}), InvalidInput);
}

TEST(GlobalTest, AcceptsCorrectEmulatorRejectsBiasedOne) {
  global::GlobalTestConfig cfg;
  cfg.reference = global::ReferenceDistribution::box({{0.0, 1.0}});
  cfg.b = 30;
  cfg.local = knn_config(19, 30);
  cfg.n_null = 199;
  const auto good = global::global_test(cfg, normal_simulator(1), ShiftedNormal(1, 0.0), {1, 0});
  const auto bad = global::global_test(cfg, normal_simulator(1), ShiftedNormal(1, 1.5), {1, 0});
  EXPECT_GT(good.global_p, 0.01);
  EXPECT_LT(bad.global_p, 0.01);
  ASSERT_EQ(good.theta.size(), 30u);
  for (const auto& t : good.theta) {
    EXPECT_GE(t[0], 0.0);
    EXPECT_LE(t[0], 1.0);
  }
  EXPECT_EQ(good.theta, bad.theta);  // θ draws depend only on the seed
}

TEST(GlobalTest, FailurePropagatesWithPartialResult) {
  global::GlobalTestConfig cfg;
  cfg.reference = global::ReferenceDistribution::grid({{0.0}, {2.0}});
  cfg.b = 10;
  cfg.local = knn_config(9, 20);
  cfg.n_null = 9;
  const ShiftedNormal em(1, 0.0, -1.0, 1.0);
  try {
    global::global_test(cfg, normal_simulator(1), em, {7, 0});
    FAIL();
  } catch (const global::GlobalTestFailure& e) {
    EXPECT_TRUE(e.invalid_input);
    ASSERT_EQ(e.partial.local_p.size(), 10u);
    std::size_t finished = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      if (e.partial.theta[i][0] == 0.0) {
        EXPECT_FALSE(std::isnan(e.partial.local_p[i]));
        ++finished;
      } else {
        EXPECT_TRUE(std::isnan(e.partial.local_p[i]));
      }
    }
    EXPECT_GT(finished, 0u);
  }
}

TEST(GlobalTest, EnsembleFormUsesEachThetaOnce) {
  std::vector<models::Ensemble> ensembles;
  for (int j = 0; j < 5; ++j) {
    const Theta t{0.2 * j};
    ensembles.push_back({t, Sample(1), ShiftedNormal(1, 0.0).sample(t, 30, {static_cast<std::uint64_t>(j), 8})});
  }
  const auto r = global::global_test(ensembles, ShiftedNormal(1, 0.0), knn_config(19, 30),
                                     global::Uniformity::cvm, 99, {2, 0});
  ASSERT_EQ(r.theta.size(), 5u);
  for (int j = 0; j < 5; ++j) EXPECT_EQ(r.theta[j], ensembles[j].theta);
  EXPECT_EQ(r.uniformity, global::Uniformity::cvm);
}

TEST(Reference, Draws) {
  const auto g = global::ReferenceDistribution::gamma(2.0, 4.0);
  double total = 0;
  for (std::uint64_t i = 0; i < 20000; ++i) total += g.draw({i, 1})[0];
  EXPECT_NEAR(total / 20000.0, 0.5, 0.01);
  const auto w = global::ReferenceDistribution::weighted({{0.0}, {1.0}}, {1.0, 3.0});
  double ones = 0;
  for (std::uint64_t i = 0; i < 20000; ++i) ones += w.draw({i, 2})[0];
  EXPECT_NEAR(ones / 20000.0, 0.75, 0.015);
  EXPECT_THROW(global::ReferenceDistribution::weighted({{0.0}}, {0.0}), InvalidInput);
  EXPECT_THROW(global::ReferenceDistribution::box({{1.0, 0.0}}), InvalidInput);
  EXPECT_EQ(global::parse_uniformity("cvm"), global::Uniformity::cvm);
  EXPECT_THROW(global::parse_uniformity("ad"), InvalidInput);
}

TEST(Diagnose, BenjaminiHochbergCases) {
  const std::vector<double> p{0.01, 0.04, 0.03, 0.2};
  // Sorted: 0.01 ≤ .0125, 0.03 ≤ .025? no, 0.04 ≤ .0375? no, 0.2 ≤ .05? no.
  EXPECT_EQ(diagnose::benjamini_hochberg(p, 0.05), (std::vector<bool>{true, false, false, false}));
  // Step-up: 0.03 ≤ 3·0.1/4 rescues the smaller ones.
  EXPECT_EQ(diagnose::benjamini_hochberg(p, 0.1), (std::vector<bool>{true, true, true, false}));
  const std::vector<double> none{0.5, 0.9};
  EXPECT_EQ(diagnose::benjamini_hochberg(none, 0.05), (std::vector<bool>{false, false}));
  EXPECT_TRUE(diagnose::benjamini_hochberg(std::vector<double>{}, 0.05).empty());
  EXPECT_THROW(diagnose::benjamini_hochberg(p, 0.0), InvalidInput);
}

TEST(Diagnose, BenjaminiHochbergMonotone) {
  Rng g({1, 9});
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> p(20);
    for (double& v : p) v = g.uniform() * 0.2;
    const auto lo = diagnose::benjamini_hochberg(p, 0.05);
    const auto hi = diagnose::benjamini_hochberg(p, 0.1);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (lo[i]) EXPECT_TRUE(hi[i]);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (lo[i] && p[j] <= p[i]) EXPECT_TRUE(lo[j]);
      }
    }
  }
}

TEST(Diagnose, PartialDependence) {
  const Sample data = Sample::from_rows({{0.0, 5.0}, {1.0, -5.0}, {2.0, 0.0}});
  const auto constant = regress::fit_constant(LabeledDataset(data, {0, 1, 1}));
  const std::vector<double> grid{-1.0, 0.0, 3.0};
  for (const auto& pt : diagnose::partial_dependence(constant, data, 0, grid)) {
    EXPECT_DOUBLE_EQ(pt.mean_prediction, 2.0 / 3.0);
  }
  regress::Tree tree;
  tree.nodes = {{0, 0.5, 1, 2, 0.0}, {-1, 0.0, -1, -1, 0.2}, {-1, 0.0, -1, -1, 0.9}};
  const regress::RegressionModel model(regress::RegressionModel::Forest{2, {tree}});
  const auto pd = diagnose::partial_dependence(model, data, 0, grid);
  EXPECT_DOUBLE_EQ(pd[0].mean_prediction, 0.2);
  EXPECT_DOUBLE_EQ(pd[1].mean_prediction, 0.2);
  EXPECT_DOUBLE_EQ(pd[2].mean_prediction, 0.9);
  const auto flat = diagnose::partial_dependence(model, data, 1, grid);
  for (const auto& pt : flat) EXPECT_DOUBLE_EQ(pt.mean_prediction, (0.2 + 0.9 + 0.9) / 3.0);
  EXPECT_THROW(diagnose::partial_dependence(model, data, 2, grid), InvalidInput);
}

TEST(Diagnose, HoldoutSplitIsStratified) {
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 30; ++i) y.push_back(i < 10 ? 1 : 0);
  std::vector<double> x(30);
  std::iota(x.begin(), x.end(), 0.0);
  const LabeledDataset data(Sample(1, x), y);
  const auto split = diagnose::holdout_split(data, 0.5, {3, 0});
  EXPECT_EQ(split.train.size(), 15u);
  EXPECT_EQ(split.train.count_ones(), 5u);
  EXPECT_EQ(split.test.count_ones(), 5u);
  std::vector<double> all;
  for (const auto* part : {&split.train, &split.test}) {
    for (std::size_t i = 0; i < part->size(); ++i) {
      all.push_back(part->points().at(i, 0));
      EXPECT_EQ(part->labels()[i], part->points().at(i, 0) < 10 ? 1 : 0);
    }
  }
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, x);
}

TEST(Diagnose, FeatureSpaceTestLocalizesDifference) {
  // Groups agree for x < 0 and differ for x > 0 (group 1 piles up near 2).
  Rng g({4, 4});
  std::vector<double> x;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 400; ++i) {
    const std::uint8_t label = i % 2;
    double v = -g.uniform() * 2.0;
    if (g.bernoulli(0.5)) v = label ? 1.5 + g.uniform() : g.uniform() * 3.0;
    x.push_back(v);
    y.push_back(label);
  }
  const LabeledDataset train(Sample(1, x), y);
  const Sample test = Sample::from_rows({{-1.5}, {-0.5}, {0.5}, {1.8}, {2.2}});
  const auto rows = diagnose::feature_space_test(train, test, regress::MethodSpec::knn(40), 99, 0.05, {1, 1});
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_FALSE(rows[0].flagged);
  EXPECT_FALSE(rows[1].flagged);
  EXPECT_FALSE(rows[2].flagged && rows[2].direction > 0);
  EXPECT_TRUE(rows[3].flagged);
  EXPECT_TRUE(rows[4].flagged);
  EXPECT_EQ(rows[3].direction, 1);
  std::ostringstream csv;
  diagnose::write_diagnosis_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "x0,m_hat,deviation,direction,p_value,flagged");
}

TEST(Diagnose, FeatureSpacePValuesMatchIndependentRecomputation) {
  Rng g({6, 6});
  std::vector<double> x;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 60; ++i) {
    y.push_back(i % 3 == 0);
    x.push_back(g.normal() + y.back());
    x.push_back(g.normal());
  }
  const LabeledDataset train(Sample(2, x), y);
  const Sample test = Sample::from_rows({{0.0, 0.0}, {1.5, 0.0}, {-1.0, 1.0}});
  const auto spec = regress::MethodSpec::knn(7);
  const RngStream rng{8, 8};
  const std::size_t m = 19;
  const auto rows = diagnose::feature_space_test(train, test, spec, m, 0.1, rng);
  const double pi1 = train.pi1();
  const LabeledDataset ordered = shuffle_rows(train, derive_substream(rng, ~std::uint64_t{0}));
  auto deviations = [&](const std::vector<std::uint8_t>& labels) {
    const auto model = regress::fit_knn(LabeledDataset(ordered.points(), labels), 7);
    std::vector<double> d;
    for (std::size_t j = 0; j < test.size(); ++j) d.push_back(std::pow(model.predict(test.row(j)) - pi1, 2));
    return d;
  };
  const auto obs = deviations(ordered.labels());
  std::vector<std::size_t> exceed(test.size(), 0);
  for (std::size_t k = 0; k < m; ++k) {
    const auto sub = derive_substream(rng, k + 1);
    const auto d = deviations(permute_labels(ordered.labels(), derive_substream(sub, 0)));
    for (std::size_t j = 0; j < test.size(); ++j) exceed[j] += d[j] > obs[j];
  }
  for (std::size_t j = 0; j < test.size(); ++j) {
    EXPECT_DOUBLE_EQ(rows[j].deviation, obs[j]);
    EXPECT_DOUBLE_EQ(rows[j].p_value, (1.0 + exceed[j]) / (m + 1.0));
  }
}

TEST(Diagnose, ZeroDeviationNeverFlagged) {
  // knn with k = n predicts π̂₁ everywhere.
  const LabeledDataset train(Sample::from_rows({{0}, {1}, {2}, {3}}), {0, 1, 0, 1});
  const auto rows = diagnose::feature_space_test(train, Sample::from_rows({{0.5}}),
                                                 regress::MethodSpec::knn(4), 9, 0.5, {1, 0});
  EXPECT_DOUBLE_EQ(rows[0].deviation, 0.0);
  EXPECT_DOUBLE_EQ(rows[0].p_value, 0.1);
  EXPECT_FALSE(rows[0].flagged);
  EXPECT_EQ(rows[0].direction, 0);
}
