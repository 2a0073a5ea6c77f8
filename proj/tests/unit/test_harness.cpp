#include <emuval/errors.hpp>
#include <emuval/harness.hpp>
#include <emuval/parallel.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace emuval;
using namespace emuval::harness;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Binomial CDF by direct summation.
double binom_cdf(std::size_t k, std::size_t n, double p) {
  double total = 0;
  for (std::size_t j = 0; j <= k; ++j) {
    total += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
                      j * std::log(p) + (n - j) * std::log1p(-p));
  }
  return total;
}

TestResult fixed_result(double p, std::size_t m) {
  TestResult r;
  r.p_value = p;
  r.statistic = p;
  r.m_used = m;
  return r;
}

}  // namespace

TEST(Power, CountsAndStandardError) {
  const auto e = estimate_power(
      [](std::size_t t, RngStream) { return fixed_result(t % 4 == 0 ? 0.01 : 0.5, 99); }, 40, 0.05, {1, 0});
  EXPECT_EQ(e.trials, 40u);
  EXPECT_EQ(e.rejections, 10u);
  EXPECT_DOUBLE_EQ(e.power, 0.25);
  EXPECT_DOUBLE_EQ(e.se, std::sqrt(0.25 * 0.75 / 40.0));
  EXPECT_TRUE(e.warning.empty());
  EXPECT_EQ(e.p_values.size(), 40u);
}

TEST(Power, WarnsWhenAlphaBelowResolution) {
  const auto e = estimate_power([](std::size_t, RngStream) { return fixed_result(0.1, 9); }, 5, 0.05, {1, 0});
  EXPECT_FALSE(e.warning.empty());
  EXPECT_EQ(e.rejections, 0u);
}

TEST(Power, TrialStreamsAreSubstreams) {
  std::vector<RngStream> seen(5);
  estimate_power(
      [&](std::size_t t, RngStream s) {
        seen[t] = s;
        return fixed_result(1.0, 9);
      },
      5, 0.5, {3, 4});
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(seen[t], derive_substream({3, 4}, t));
}

TEST(Power, TrialErrorsNameTheTrial) {
  try {
    estimate_power(
        [](std::size_t t, RngStream) -> TestResult {
          if (t == 2) throw InvalidInput("bad");
          return fixed_result(1.0, 9);
        },
        4, 0.05, {});
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("trial 2"), std::string::npos);
  }
}

TEST(Power, LocalPowerSpecSeparatesNullFromAlternative) {
  const auto setting = models::SyntheticSetting::make(models::Setting::bernoulli, 2);
  LocalPowerSpec spec;
  spec.truth = [setting](const Theta& t, std::size_t n, RngStream r) { return models::simulate(setting, t, n, r); };
  spec.alternative = [setting](const Theta& t, std::size_t n, RngStream r) {
    return models::approximate_simulate(setting, t, n, r);
  };
  spec.theta = {0.5};
  spec.test.statistic = parse_statistic("knn");
  spec.test.m_permutations = 19;
  spec.test.n_sim0 = spec.test.n_sim1 = 60;
  const auto alt = estimate_power(spec, 20, 0.05, {1, 0});
  spec.alternative = spec.truth;
  const auto null = estimate_power(spec, 20, 0.05, {1, 0});
  EXPECT_GE(alt.power, 0.9);
  EXPECT_LE(null.power, 0.2);
}

TEST(Config, StatisticTagsRoundTrip) {
  for (const char* tag : {"rf", "knn", "constant", "rf-split", "knn-split", "mmd", "energy", "c2st-rf", "c2st-knn"}) {
    EXPECT_EQ(statistic_tag(parse_statistic(tag)), tag);
  }
  EXPECT_THROW(parse_statistic("svm"), InvalidInput);
}

TEST(Config, ValidationRejectsBadValues) {
  Example2Config e2;
  e2.alpha = 1.5;
  EXPECT_THROW(e2.validate(), InvalidInput);
  PoissonSynthConfig ps;
  ps.models = {"spline"};
  EXPECT_THROW(ps.validate(), InvalidInput);
  Example1Config e1;
  e1.b = 1;
  EXPECT_THROW(e1.validate(), InvalidInput);
}

TEST(Config, JsonListsEveryExperiment) {
  const auto j = to_json(ExperimentConfig{});
  EXPECT_TRUE(j.contains("example1"));
  EXPECT_TRUE(j.contains("example2"));
  EXPECT_TRUE(j.contains("poisson_synth"));
  EXPECT_EQ(j["example2"]["trials"], 100);
}

TEST(Histogram, BinomialBandMatchesSummedCdf) {
  for (const auto& [n, p] : std::vector<std::pair<std::size_t, double>>{{500, 0.05}, {100, 0.1}, {30, 0.5}}) {
    const auto [lo, hi] = binomial_band(n, p, 0.99);
    EXPECT_LE(lo, hi);
    // Each tail outside the band holds at most 0.5%, and the band is at most
    // one cell wider on each side than the tightest such band.
    const double below = lo == 0 ? 0.0 : binom_cdf(lo - 1, n, p);
    EXPECT_LE(below, 0.005 + 1e-9);
    EXPECT_LE(1.0 - binom_cdf(hi, n, p), 0.005 + 1e-9);
    std::size_t tight_lo = 0;
    while (binom_cdf(tight_lo, n, p) <= 0.005) ++tight_lo;
    std::size_t tight_hi = n;
    while (tight_hi > 0 && 1.0 - binom_cdf(tight_hi - 1, n, p) <= 0.005) --tight_hi;
    EXPECT_GE(lo + 1, tight_lo);
    EXPECT_LE(hi, tight_hi + 1);
  }
  EXPECT_EQ(binomial_band(0, 0.5, 0.99), (std::pair<std::size_t, std::size_t>{0, 0}));
}

TEST(PowerCsv, HeaderAndRow) {
  PowerRow row;
  row.experiment = "example2";
  row.setting = "mog";
  row.condition = "theta=0.25";
  row.dim = 5;
  row.statistic = "rf";
  row.n = 100;
  row.estimate.trials = 10;
  row.estimate.rejections = 3;
  row.estimate.power = 0.3;
  row.estimate.se = 0.1;
  row.median_statistic = 0.5;
  std::ostringstream out;
  write_power_csv(out, {row});
  EXPECT_EQ(out.str(),
            "experiment,setting,condition,dim,statistic,n,trials,rejections,power,se,median_statistic\n"
            "example2,mog,theta=0.25,5,rf,100,10,3,0.3,0.1,0.5\n");
}

TEST(Experiment, ReportIsReproducibleAcrossThreadCounts) {
  ExperimentConfig cfg;
  cfg.example2.settings = {"bernoulli"};
  cfg.example2.dims = {2};
  cfg.example2.grid_points = 2;
  cfg.example2.statistics = {"knn", "mmd"};
  cfg.example2.n = 30;
  cfg.example2.trials = 4;
  cfg.example2.m_permutations = 19;
  const auto base = std::filesystem::temp_directory_path() / "emuval_experiment_test";
  std::filesystem::remove_all(base);
  set_thread_count(1);
  run_experiment("example2", cfg, base / "a", 11);
  set_thread_count(3);
  run_experiment("example2", cfg, base / "b", 11);
  set_thread_count(1);
  run_experiment("example2", cfg, base / "c", 12);
  for (const char* f : {"power.csv", "local_pvalues.csv", "global.json", "histograms.csv", "manifest.json"}) {
    ASSERT_TRUE(std::filesystem::exists(base / "a" / f)) << f;
    EXPECT_EQ(slurp(base / "a" / f), slurp(base / "b" / f)) << f;
  }
  EXPECT_NE(slurp(base / "a" / "power.csv"), slurp(base / "c" / "power.csv"));
  std::istringstream power(slurp(base / "a" / "power.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(power, line)) ++rows;
  EXPECT_EQ(rows, 1u + 2u * 2u);  // header + θ grid × statistics
  EXPECT_THROW(run_experiment("example3", cfg, base / "d", 1), InvalidInput);
  std::filesystem::remove_all(base);
}

TEST(Experiment, PoissonSynthSmallRun) {
  PoissonSynthConfig cfg;
  cfg.n_train = {30};
  cfg.grid_per_axis = 2;
  cfg.n_sim = 40;
  cfg.models = {"poisson", "true"};
  cfg.trials = 2;
  cfg.m_permutations = 19;
  cfg.n_null = 99;
  cfg.statistic = parse_statistic("knn");
  const auto r = run_poisson_synth(cfg, {5, 0});
  ASSERT_EQ(r.power.size(), 2u);
  ASSERT_EQ(r.local_maps.size(), 2u);
  EXPECT_EQ(r.local_maps[0].result.local_p.size(), 4u);
  for (const auto& row : r.power) {
    EXPECT_EQ(row.estimate.trials, 2u);
    EXPECT_EQ(row.statistic, "global-knn");
  }
}

TEST(Experiment, Example1SmallRun) {
  Example1Config cfg;
  cfg.dim = 50;
  cfg.replicates = 40;
  cfg.sbc_draws = 9;
  cfg.b = 10;
  cfg.n_sim = 20;
  cfg.m_permutations = 19;
  cfg.n_null = 99;
  cfg.bins = 5;
  const auto r = run_example1(cfg, {6, 0});
  EXPECT_EQ(r.pq_true.size(), 40u);
  EXPECT_EQ(r.sbc_flat.size(), 40u);
  for (std::size_t s : r.sbc_true) EXPECT_LE(s, 9u);
  EXPECT_EQ(r.global_true.local_p.size(), 10u);
  EXPECT_TRUE(r.summary.contains("pq_ks_p"));
  std::size_t pq_rows = 0;
  for (const auto& h : r.histograms) pq_rows += h.diagnostic == "pq";
  EXPECT_EQ(pq_rows, 2u * 5u);
}
