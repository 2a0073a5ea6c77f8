#include <emuval/errors.hpp>
#include <emuval/stats.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace emuval;
using namespace emuval::stats;

namespace {

LabeledDataset gaussian_pair(std::size_t n0, std::size_t n1, std::size_t dim, double shift,
                             RngStream s) {
  Rng g(s);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < n0 * dim; ++i) a.push_back(g.normal());
  for (std::size_t i = 0; i < n1 * dim; ++i) b.push_back(g.normal() + shift);
  return pool_and_label(Sample(dim, a), Sample(dim, b));
}

double dist(const Sample& s, std::size_t i, std::size_t j) {
  double sum = 0;
  for (std::size_t d = 0; d < s.dim(); ++d) sum += std::pow(s.at(i, d) - s.at(j, d), 2);
  return std::sqrt(sum);
}

double brute_median_bandwidth(const Sample& s) {
  std::vector<double> d;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double v = dist(s, i, j);
      if (v > 0) d.push_back(v);
    }
  }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

// V-statistic MMD² over all ordered pairs, diagonal included.
double brute_mmd(const LabeledDataset& data) {
  const Sample& s = data.points();
  const double h = brute_median_bandwidth(s);
  auto k = [&](std::size_t i, std::size_t j) { return std::exp(-std::pow(dist(s, i, j), 2) / (2 * h * h)); };
  double xx = 0, yy = 0, xy = 0, n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < s.size(); ++i) (data.labels()[i] ? n1 : n0) += 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const int li = data.labels()[i], lj = data.labels()[j];
      if (!li && !lj) xx += k(i, j);
      else if (li && lj) yy += k(i, j);
      else if (!li && lj) xy += k(i, j);
    }
  }
  return xx / (n0 * n0) + yy / (n1 * n1) - 2 * xy / (n0 * n1);
}

double brute_energy(const LabeledDataset& data) {
  const Sample& s = data.points();
  double xx = 0, yy = 0, xy = 0, n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < s.size(); ++i) (data.labels()[i] ? n1 : n0) += 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const int li = data.labels()[i], lj = data.labels()[j];
      if (!li && !lj) xx += dist(s, i, j);
      else if (li && lj) yy += dist(s, i, j);
      else if (!li && lj) xy += dist(s, i, j);
    }
  }
  return 2 * xy / (n0 * n1) - xx / (n0 * n0) - yy / (n1 * n1);
}

double brute_ks(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double best = 0;
  // F̂ is right-continuous; check both one-sided limits at every jump.
  for (std::size_t i = 0; i < v.size(); ++i) {
    best = std::max(best, std::abs((i + 1) / n - v[i]));
    best = std::max(best, std::abs(i / n - v[i]));
  }
  return best;
}

}  // namespace

TEST(Stats, MmdMatchesBruteForce) {
  for (std::size_t dim : {1u, 3u}) {
    const auto data = gaussian_pair(13, 17, dim, 0.7, {static_cast<std::uint64_t>(dim), 1});
    EXPECT_NEAR(mmd_statistic(data), brute_mmd(data), 1e-12);
    EXPECT_NEAR(median_heuristic_bandwidth(data.points()), brute_median_bandwidth(data.points()), 1e-12);
  }
}

TEST(Stats, EnergyMatchesBruteForce) {
  const auto data = gaussian_pair(11, 20, 2, 0.5, {3, 1});
  EXPECT_NEAR(energy_statistic(data), brute_energy(data), 1e-12);
}

TEST(Stats, KernelStatisticsSymmetricUnderLabelFlip) {
  const auto data = gaussian_pair(15, 15, 2, 1.0, {4, 1});
  std::vector<std::uint8_t> flipped;
  for (auto y : data.labels()) flipped.push_back(1 - y);
  const LabeledDataset swapped(data.points(), flipped);
  EXPECT_NEAR(mmd_statistic(data), mmd_statistic(swapped), 1e-12);
  EXPECT_NEAR(energy_statistic(data), energy_statistic(swapped), 1e-12);
}

TEST(Stats, MedianBandwidthFallsBackToOne) {
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(Sample::from_rows({{2.0}, {2.0}, {2.0}})), 1.0);
}

TEST(Stats, RegressionStatisticByHand) {
  // knn with k = n: m̂ ≡ π̂₁, so T = 0. k = 1 in full mode: m̂(Xᵢ) = Yᵢ, so
  // T = π̂₁(1 - π̂₁).
  const auto data = gaussian_pair(6, 4, 2, 0.0, {5, 1});
  EXPECT_NEAR(regression_statistic(data, regress::MethodSpec::knn(10), Mode::full, {}), 0.0, 1e-15);
  EXPECT_NEAR(regression_statistic(data, regress::MethodSpec::knn(1), Mode::full, {}), 0.24, 1e-15);
  EXPECT_NEAR(regression_statistic(data, regress::MethodSpec::constant(), Mode::full, {}), 0.0, 1e-15);
}

TEST(Stats, StatisticsGrowWithSeparation) {
  const auto near = gaussian_pair(60, 60, 2, 0.0, {6, 1});
  const auto far = gaussian_pair(60, 60, 2, 3.0, {6, 1});
  for (const auto& st : {TwoSampleStatistic::mmd(), TwoSampleStatistic::energy(),
                         TwoSampleStatistic::regression(regress::MethodSpec::knn()),
                         TwoSampleStatistic::regression(regress::MethodSpec::random_forest()),
                         TwoSampleStatistic::regression(regress::MethodSpec::knn(), Mode::split),
                         TwoSampleStatistic::c2st(regress::MethodSpec::knn())}) {
    EXPECT_LT(evaluate(st, near, {1, 1}), evaluate(st, far, {1, 1})) << st.name();
  }
  EXPECT_GT(c2st_statistic(far, regress::MethodSpec::knn(), {1, 1}), 0.9);
}

TEST(Stats, BoundStatisticAgreesWithEvaluate) {
  const auto data = gaussian_pair(20, 25, 3, 0.4, {7, 1});
  for (const auto& st : {TwoSampleStatistic::mmd(), TwoSampleStatistic::energy(),
                         TwoSampleStatistic::regression(regress::MethodSpec::random_forest())}) {
    const BoundStatistic bound(st, data.points());
    EXPECT_DOUBLE_EQ(bound.evaluate(data.labels(), {2, 2}), evaluate(st, data, {2, 2}));
  }
}

TEST(Stats, RejectsSingleGroup) {
  const LabeledDataset one(Sample::from_rows({{1}, {2}}), {1, 1});
  EXPECT_THROW(mmd_statistic(one), InvalidInput);
}

TEST(Stats, NamesRoundTrip) {
  EXPECT_EQ(parse_kind("mmd"), Kind::mmd);
  EXPECT_EQ(parse_mode("split"), Mode::split);
  EXPECT_THROW(parse_kind("nope"), InvalidInput);
}

TEST(Uniformity, KnownValues) {
  const std::vector<double> half{0.5};
  EXPECT_DOUBLE_EQ(ks_uniformity(half), 0.5);
  EXPECT_NEAR(cvm_uniformity(half), 1.0 / 12.0, 1e-15);
  const std::vector<double> grid{0.125, 0.375, 0.625, 0.875};
  EXPECT_DOUBLE_EQ(ks_uniformity(grid), 0.125);
  const std::vector<double> zeros(5, 0.0);
  EXPECT_DOUBLE_EQ(ks_uniformity(zeros), 1.0);
  EXPECT_NEAR(cvm_uniformity(zeros), 1.0 / 3.0, 1e-15);
  const std::vector<double> bad{1.2};
  EXPECT_THROW(ks_uniformity(bad), InvalidInput);
  EXPECT_THROW(ks_uniformity(std::vector<double>{}), InvalidInput);
}

TEST(Uniformity, MatchesClassicalFormulas) {
  Rng g({8, 1});
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(1 + rep);
    for (double& x : v) x = g.uniform();
    EXPECT_NEAR(ks_uniformity(v), brute_ks(v), 1e-15);
    // W² = 1/(12B) + Σ ((2i - 1)/(2B) - v₍ᵢ₎)² equals B times the integral.
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    const double b = static_cast<double>(s.size());
    double w2 = 1.0 / (12.0 * b);
    for (std::size_t i = 0; i < s.size(); ++i) w2 += std::pow((2.0 * i + 1.0) / (2.0 * b) - s[i], 2);
    EXPECT_NEAR(cvm_uniformity(v), w2 / b, 1e-12);
  }
}

TEST(Uniformity, OrderInvariant) {
  std::vector<double> v{0.9, 0.1, 0.4, 0.3};
  const double ks = ks_uniformity(v);
  const double cvm = cvm_uniformity(v);
  std::reverse(v.begin(), v.end());
  EXPECT_DOUBLE_EQ(ks_uniformity(v), ks);
  EXPECT_DOUBLE_EQ(cvm_uniformity(v), cvm);
}
