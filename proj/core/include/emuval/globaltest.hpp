#pragma once

#include "emuval/localtest.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace emuval::global {

enum class Uniformity { ks, cvm };
Uniformity parse_uniformity(const std::string& name);
std::string to_string(Uniformity which);

/// r(θ): where in parameter space the local tests are run.
class ReferenceDistribution {
 public:
  /// Uniform over the listed points, drawn with replacement.
  static ReferenceDistribution grid(std::vector<Theta> points);
  /// Uniform over the points with the given (unnormalized) weights.
  static ReferenceDistribution weighted(std::vector<Theta> points, std::vector<double> weights);
  /// Uniform over an axis-aligned box.
  static ReferenceDistribution box(std::vector<std::pair<double, double>> bounds);
  /// One-dimensional Gamma(shape, rate).
  static ReferenceDistribution gamma(double shape, double rate);

  Theta draw(RngStream rng) const;
  std::size_t dim() const;
  std::string name() const;

 private:
  struct Points {
    std::vector<Theta> points;
    std::vector<double> cumulative;  // empty: equal weights
  };
  struct Box {
    std::vector<std::pair<double, double>> bounds;
  };
  struct Gamma {
    double shape;
    double rate;
  };
  std::variant<Points, Box, Gamma> impl_;
};

struct GlobalTestConfig {
  ReferenceDistribution reference = ReferenceDistribution::box({{0.0, 1.0}});
  std::size_t b = 100;
  local::LocalTestConfig local;
  Uniformity uniformity = Uniformity::ks;
  std::size_t n_null = 999;

  void validate() const;
};

struct GlobalTestResult {
  std::vector<Theta> theta;
  std::vector<double> local_p;
  std::vector<double> local_statistic;
  Uniformity uniformity = Uniformity::ks;
  double statistic = 0.0;
  double global_p = 1.0;
  RngStream seed;
};

/// A local test failed. `partial` holds every local result that did finish
/// (failed or unfinished entries have NaN p-values).
class GlobalTestFailure : public std::runtime_error {
 public:
  GlobalTestFailure(const std::string& what, GlobalTestResult partial, bool invalid_input)
      : std::runtime_error(what), partial(std::move(partial)), invalid_input(invalid_input) {}

  GlobalTestResult partial;
  bool invalid_input;
};

double uniformity_statistic(Uniformity which, std::span<const double> values);

/// The statistic on n_null sets of B i.i.d. uniforms; set k uses substream k.
std::vector<double> uniformity_null_draws(std::size_t b, Uniformity which, std::size_t n_null,
                                          RngStream rng);
/// (1 + #{null ≥ stat}) / (n_null + 1) against the exact finite-B null.
double uniformity_pvalue(double stat, std::size_t b, Uniformity which, std::size_t n_null,
                         RngStream rng);

/// θ₁..θ_B from the reference (substream 1), local tests on independent
/// substreams (substream 2), uniformity p-value (substream 3).
GlobalTestResult global_test(const GlobalTestConfig& cfg, const local::Simulator& simulator,
                             const models::ApproxLikelihood& emulator, RngStream rng);

/// Batch form: one local test per ensemble, with its held-out test split as
/// the simulator sample. Each θ is used exactly once (B = ensemble count), so
/// no held-out draw enters two local tests.
GlobalTestResult global_test(std::span<const models::Ensemble> ensembles,
                             const models::ApproxLikelihood& emulator,
                             const local::LocalTestConfig& local, Uniformity which,
                             std::size_t n_null, RngStream rng);

/// Uniformity stage alone, for p-values computed elsewhere.
GlobalTestResult global_test_from_pvalues(std::vector<Theta> theta, std::vector<double> local_p,
                                          Uniformity which, std::size_t n_null, RngStream rng);

struct NullQuantileRow {
  std::size_t b = 0;
  double median = 0.0;
  double quantile = 0.0;  // (1 - alpha) quantile
};

/// Null quantiles of the uniformity statistic along a schedule of B values;
/// they shrink toward 0 as B grows.
std::vector<NullQuantileRow> uniformity_null_quantiles(std::span<const std::size_t> schedule,
                                                       Uniformity which, double alpha,
                                                       std::size_t n_null, RngStream rng);

}  // namespace emuval::global
