#pragma once

#include "emuval/globaltest.hpp"
#include "emuval/localtest.hpp"
#include "emuval/models.hpp"
#include "emuval/report.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace emuval::harness {

// ---------------------------------------------------------------------------
// Power

struct PowerEstimate {
  std::size_t trials = 0;
  std::size_t rejections = 0;
  double power = 0.0;
  /// sqrt(power (1 - power) / trials)
  double se = 0.0;
  std::vector<double> p_values;
  std::vector<double> statistics;
  /// Set when alpha < 1/(M+1), where no test can reject.
  std::string warning;
};

/// One trial: run a test on fresh draws from the given stream.
using TrialFn = std::function<TestResult(std::size_t trial, RngStream rng)>;

/// Trial t runs on substream t; power is the fraction of p ≤ alpha.
PowerEstimate estimate_power(const TrialFn& trial, std::size_t trials, double alpha,
                             RngStream rng);

/// Local test of `alternative` draws against `truth` draws at θ.
struct LocalPowerSpec {
  local::Simulator truth;
  local::Simulator alternative;
  Theta theta;
  local::LocalTestConfig test;
};

PowerEstimate estimate_power(const LocalPowerSpec& spec, std::size_t trials, double alpha,
                             RngStream rng);

/// One line of power.csv.
struct PowerRow {
  std::string experiment;
  std::string setting;
  std::string condition;  // θ, grid cell or training size
  std::size_t dim = 0;
  std::string statistic;
  std::size_t n = 0;
  PowerEstimate estimate;
  /// Median raw statistic over trials.
  double median_statistic = 0.0;
};

void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows);

// ---------------------------------------------------------------------------
// Experiments

/// Flat versus true model for Beta(θ, θ) data under a Gamma(1, 1) prior.
struct Example1Config {
  std::size_t dim = 1000;
  std::size_t replicates = 500;  // PQ/SBC replicates
  std::size_t sbc_draws = 100;   // posterior draws per SBC rank
  std::size_t b = 100;
  std::size_t n_sim = 100;
  std::size_t m_permutations = 99;
  std::size_t n_null = 999;
  std::size_t bins = 20;
  stats::TwoSampleStatistic statistic =
      stats::TwoSampleStatistic::regression(regress::MethodSpec::knn());

  void validate() const;
};

/// Local test power across Table 1 settings, dimensions and statistics.
struct Example2Config {
  std::vector<std::string> settings{"bernoulli", "scaling", "mog"};
  std::vector<std::size_t> dims{1, 5, 10, 50, 100};
  std::size_t grid_points = 20;
  std::vector<std::string> statistics{"rf", "knn", "mmd", "energy", "c2st-rf", "c2st-knn"};
  std::size_t n = 100;
  std::size_t trials = 100;
  std::size_t m_permutations = 99;
  double alpha = 0.05;

  void validate() const;
};

/// Fitted Gaussian / Poisson / KDE emulators of the two-count simulator.
struct PoissonSynthConfig {
  std::vector<std::size_t> n_train{50, 100, 2000};
  std::size_t grid_per_axis = 10;
  std::size_t n_sim = 200;
  std::vector<std::string> models{"gaussian", "poisson", "kde"};
  std::size_t trials = 100;
  std::size_t m_permutations = 99;
  std::size_t n_null = 999;
  double alpha = 0.05;
  stats::TwoSampleStatistic statistic =
      stats::TwoSampleStatistic::regression(regress::MethodSpec::random_forest());
  /// Also run the global test with the MMD statistic.
  bool mmd_test = false;

  void validate() const;
};

struct ExperimentConfig {
  Example1Config example1;
  Example2Config example2;
  PoissonSynthConfig poisson_synth;
};

/// Parses "rf", "knn", "constant", "rf-split", "knn-split", "mmd", "energy",
/// "c2st-rf", "c2st-knn".
stats::TwoSampleStatistic parse_statistic(const std::string& tag);
std::string statistic_tag(const stats::TwoSampleStatistic& statistic);

report::Json to_json(const ExperimentConfig& config);

struct HistogramRow {
  std::string model;
  std::string diagnostic;  // pq, sbc or local_p
  std::size_t bin = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  /// 99% per-bin binomial band under uniformity.
  std::size_t band_lo = 0;
  std::size_t band_hi = 0;
};

struct Example1Result {
  std::vector<double> pq_true, pq_flat;
  std::vector<std::size_t> sbc_true, sbc_flat;
  global::GlobalTestResult global_true, global_flat;
  std::vector<HistogramRow> histograms;
  report::Json summary;
};

struct PoissonSynthResult {
  std::vector<PowerRow> power;
  /// Local p-values from the first trial, per (model, n_train).
  struct LocalMap {
    std::string model;
    std::size_t n_train = 0;
    global::GlobalTestResult result;
  };
  std::vector<LocalMap> local_maps;
  /// Median over trials of the per-trial median raw MMD across θ.
  struct RawMmd {
    std::string model;
    std::size_t n_train = 0;
    double median_mmd = 0.0;
  };
  std::vector<RawMmd> raw_mmd;
};

Example1Result run_example1(const Example1Config& cfg, RngStream rng);
std::vector<PowerRow> run_example2(const Example2Config& cfg, RngStream rng);
PoissonSynthResult run_poisson_synth(const PoissonSynthConfig& cfg, RngStream rng);

/// Runs the named experiment (example1, example2, poisson_synth) and writes
/// power.csv, local_pvalues.csv, global.json, histograms.csv and
/// manifest.json into `out_dir`. Files an experiment does not produce are
/// written with their header only.
void run_experiment(const std::string& name, const ExperimentConfig& config,
                    const std::filesystem::path& out_dir, std::uint64_t seed);

/// Central binomial interval at the given level for a histogram cell with
/// probability p out of `total` draws.
std::pair<std::size_t, std::size_t> binomial_band(std::size_t total, double p, double level);

}  // namespace emuval::harness
