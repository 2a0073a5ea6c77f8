#include "emuval/errors.hpp"
#include "emuval/globaltest.hpp"
#include "emuval/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace emuval::global {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Type-7 (linear interpolation) sample quantile.
double sample_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

template <typename LocalFn>
GlobalTestResult run_locals(std::vector<Theta> theta, const LocalFn& run_one, Uniformity which,
                            std::size_t n_null, RngStream rng) {
  const std::size_t b = theta.size();
  GlobalTestResult r;
  r.seed = rng;
  r.uniformity = which;
  r.theta = std::move(theta);
  r.local_p.assign(b, kNaN);
  r.local_statistic.assign(b, kNaN);
  std::vector<std::optional<std::string>> errors(b);
  std::vector<char> invalid(b, 0);
  parallel_for(b, [&](std::size_t i) {
    try {
      const TestResult t = run_one(i);
      r.local_p[i] = t.p_value;
      r.local_statistic[i] = t.statistic;
    } catch (const InvalidInput& e) {
      errors[i] = e.what();
      invalid[i] = 1;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < b; ++i) {
    if (errors[i]) {
      throw GlobalTestFailure("global test aborted: " + *errors[i], std::move(r), invalid[i] != 0);
    }
  }
  r.statistic = uniformity_statistic(which, r.local_p);
  r.global_p = uniformity_pvalue(r.statistic, b, which, n_null, derive_substream(rng, 3));
  return r;
}

}  // namespace

Uniformity parse_uniformity(const std::string& name) {
  if (name == "ks") return Uniformity::ks;
  if (name == "cvm") return Uniformity::cvm;
  throw InvalidInput("unknown uniformity test '" + name + "' (expected ks or cvm)");
}

std::string to_string(Uniformity which) { return which == Uniformity::ks ? "ks" : "cvm"; }

ReferenceDistribution ReferenceDistribution::grid(std::vector<Theta> points) {
  if (points.empty()) throw InvalidInput("reference grid is empty");
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw InvalidInput("reference grid points differ in dimension");
  }
  ReferenceDistribution r;
  r.impl_ = Points{std::move(points), {}};
  return r;
}

ReferenceDistribution ReferenceDistribution::weighted(std::vector<Theta> points,
                                                      std::vector<double> weights) {
  if (weights.size() != points.size()) throw InvalidInput("one weight per reference point required");
  ReferenceDistribution r = grid(std::move(points));
  std::vector<double> cumulative(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw InvalidInput("reference weights must be finite and nonnegative");
    }
    total += weights[i];
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw InvalidInput("reference weights sum to zero");
  std::get<Points>(r.impl_).cumulative = std::move(cumulative);
  return r;
}

ReferenceDistribution ReferenceDistribution::box(std::vector<std::pair<double, double>> bounds) {
  if (bounds.empty()) throw InvalidInput("reference box is empty");
  for (const auto& [lo, hi] : bounds) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) throw InvalidInput("invalid reference box");
  }
  ReferenceDistribution r;
  r.impl_ = Box{std::move(bounds)};
  return r;
}

ReferenceDistribution ReferenceDistribution::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw InvalidInput("gamma reference needs positive shape and rate");
  ReferenceDistribution r;
  r.impl_ = Gamma{shape, rate};
  return r;
}

Theta ReferenceDistribution::draw(RngStream rng) const {
  Rng gen(rng);
  if (const auto* p = std::get_if<Points>(&impl_)) {
    if (p->cumulative.empty()) return p->points[gen.below(p->points.size())];
    const double u = gen.uniform() * p->cumulative.back();
    const auto it = std::upper_bound(p->cumulative.begin(), p->cumulative.end(), u);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(it - p->cumulative.begin()),
                                         p->points.size() - 1);
    return p->points[i];
  }
  if (const auto* b = std::get_if<Box>(&impl_)) {
    Theta t;
    for (const auto& [lo, hi] : b->bounds) t.push_back(lo + (hi - lo) * gen.uniform());
    return t;
  }
  const auto& g = std::get<Gamma>(impl_);
  return {gen.gamma(g.shape) / g.rate};
}

std::size_t ReferenceDistribution::dim() const {
  if (const auto* p = std::get_if<Points>(&impl_)) return p->points.front().size();
  if (const auto* b = std::get_if<Box>(&impl_)) return b->bounds.size();
  return 1;
}

std::string ReferenceDistribution::name() const {
  if (const auto* p = std::get_if<Points>(&impl_)) return p->cumulative.empty() ? "grid" : "weighted";
  if (std::holds_alternative<Box>(impl_)) return "box";
  return "gamma";
}

void GlobalTestConfig::validate() const {
  if (b < 2) throw InvalidInput("the global test needs B >= 2");
  if (n_null < 1) throw InvalidInput("n_null must be at least 1");
  local.validate();
}

double uniformity_statistic(Uniformity which, std::span<const double> values) {
  return which == Uniformity::ks ? stats::ks_uniformity(values) : stats::cvm_uniformity(values);
}

std::vector<double> uniformity_null_draws(std::size_t b, Uniformity which, std::size_t n_null,
                                          RngStream rng) {
  if (b < 1) throw InvalidInput("B must be at least 1");
  std::vector<double> out(n_null);
  parallel_for(n_null, [&](std::size_t k) {
    Rng gen(derive_substream(rng, k));
    std::vector<double> u(b);
    for (double& v : u) v = gen.uniform();
    out[k] = uniformity_statistic(which, u);
  });
  return out;
}

double uniformity_pvalue(double stat, std::size_t b, Uniformity which, std::size_t n_null,
                         RngStream rng) {
  if (n_null < 1) throw InvalidInput("n_null must be at least 1");
  const auto null = uniformity_null_draws(b, which, n_null, rng);
  const auto at_least = std::count_if(null.begin(), null.end(), [&](double v) { return v >= stat; });
  return static_cast<double>(1 + at_least) / static_cast<double>(n_null + 1);
}

GlobalTestResult global_test(const GlobalTestConfig& cfg, const local::Simulator& simulator,
                             const models::ApproxLikelihood& emulator, RngStream rng) {
  cfg.validate();
  if (cfg.reference.dim() == 0) throw InvalidInput("reference distribution has no dimensions");
  const RngStream theta_rng = derive_substream(rng, 1);
  const RngStream local_rng = derive_substream(rng, 2);
  std::vector<Theta> theta(cfg.b);
  for (std::size_t i = 0; i < cfg.b; ++i) theta[i] = cfg.reference.draw(derive_substream(theta_rng, i));
  const auto& thetas = theta;
  return run_locals(
      theta,
      [&](std::size_t i) {
        return local::local_test(thetas[i], simulator, emulator, cfg.local,
                                 derive_substream(local_rng, i));
      },
      cfg.uniformity, cfg.n_null, rng);
}

GlobalTestResult global_test(std::span<const models::Ensemble> ensembles,
                             const models::ApproxLikelihood& emulator,
                             const local::LocalTestConfig& local, Uniformity which,
                             std::size_t n_null, RngStream rng) {
  if (ensembles.size() < 2) throw InvalidInput("the global test needs at least two ensembles");
  if (n_null < 1) throw InvalidInput("n_null must be at least 1");
  local.validate();
  std::vector<Theta> theta;
  for (const auto& e : ensembles) {
    if (e.test.empty()) throw InvalidInput("ensemble has no held-out test draws");
    theta.push_back(e.theta);
  }
  const RngStream local_rng = derive_substream(rng, 2);
  return run_locals(
      std::move(theta),
      [&](std::size_t i) {
        return local::local_test(ensembles[i].theta, ensembles[i].test, emulator, local,
                                 derive_substream(local_rng, i));
      },
      which, n_null, rng);
}

GlobalTestResult global_test_from_pvalues(std::vector<Theta> theta, std::vector<double> local_p,
                                          Uniformity which, std::size_t n_null, RngStream rng) {
  if (local_p.size() < 2) throw InvalidInput("the global test needs at least two local p-values");
  if (!theta.empty() && theta.size() != local_p.size()) {
    throw InvalidInput("one parameter value per local p-value required");
  }
  GlobalTestResult r;
  r.seed = rng;
  r.uniformity = which;
  r.theta = std::move(theta);
  r.local_p = std::move(local_p);
  r.local_statistic.assign(r.local_p.size(), kNaN);
  r.statistic = uniformity_statistic(which, r.local_p);
  r.global_p = uniformity_pvalue(r.statistic, r.local_p.size(), which, n_null, derive_substream(rng, 3));
  return r;
}

std::vector<NullQuantileRow> uniformity_null_quantiles(std::span<const std::size_t> schedule,
                                                       Uniformity which, double alpha,
                                                       std::size_t n_null, RngStream rng) {
  if (schedule.empty()) throw InvalidInput("B schedule is empty");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  if (n_null < 1) throw InvalidInput("n_null must be at least 1");
  std::vector<NullQuantileRow> rows;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto draws = uniformity_null_draws(schedule[k], which, n_null, derive_substream(rng, k));
    rows.push_back({schedule[k], sample_quantile(draws, 0.5), sample_quantile(draws, 1.0 - alpha)});
  }
  return rows;
}

}  // namespace emuval::global
