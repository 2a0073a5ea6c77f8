#include "emuval/errors.hpp"
#include "emuval/models.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace emuval::models {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2π))

double normal_log_density(double x, double mean, double variance) {
  const double z = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(variance) - 0.5 * z * z / variance;
}

double poisson_log_pmf(double k, double lambda) {
  if (k < 0.0 || k != std::floor(k)) return kNegInf;
  return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

std::string theta_string(const Theta& theta) {
  std::string s = "(";
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(theta[i]);
  }
  return s + ")";
}

double poisson_synth_rate(const Theta& theta) { return theta[0] < 0.5 ? 1.0 : 1e4; }

}  // namespace

double ApproxLikelihood::log_likelihood(const Sample& x, const Theta& theta) const {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += log_density(x.row(i), theta);
  return total;
}

SyntheticSetting SyntheticSetting::make(Setting tag, std::size_t dim) {
  SyntheticSetting s;
  s.tag = tag;
  switch (tag) {
    case Setting::example1: s.dim = dim == 0 ? 1000 : dim; break;
    case Setting::poisson_synth:
      if (dim != 0 && dim != 2) throw InvalidInput("poisson_synth is two-dimensional");
      s.dim = 2;
      break;
    default: s.dim = dim == 0 ? 1 : dim; break;
  }
  return s;
}

std::vector<std::pair<double, double>> SyntheticSetting::domain() const {
  switch (tag) {
    case Setting::example1: return {{0.0, std::numeric_limits<double>::infinity()}};
    case Setting::bernoulli:
    case Setting::scaling: return {{0.0, 1.0}};
    case Setting::mog: return {{-5.0, 5.0}};
    case Setting::poisson_synth: return {{0.0, 1.0}, {0.0, 1.0}};
  }
  return {};
}

void SyntheticSetting::check_theta(const Theta& theta) const {
  const auto box = domain();
  if (theta.size() != box.size()) {
    throw InvalidInput(name() + " expects a " + std::to_string(box.size()) +
                       "-dimensional parameter, got " + std::to_string(theta.size()));
  }
  for (std::size_t i = 0; i < box.size(); ++i) {
    const bool ok = tag == Setting::example1 ? theta[i] > 0.0 && std::isfinite(theta[i])
                                             : theta[i] >= box[i].first && theta[i] <= box[i].second;
    if (!ok) throw InvalidInput("parameter " + theta_string(theta) + " outside the domain of " + name());
  }
}

std::string SyntheticSetting::name() const {
  switch (tag) {
    case Setting::example1: return "example1";
    case Setting::bernoulli: return "bernoulli";
    case Setting::scaling: return "scaling";
    case Setting::mog: return "mog";
    case Setting::poisson_synth: return "poisson_synth";
  }
  return "unknown";
}

Setting parse_setting(const std::string& name) {
  if (name == "example1") return Setting::example1;
  if (name == "bernoulli") return Setting::bernoulli;
  if (name == "scaling") return Setting::scaling;
  if (name == "mog") return Setting::mog;
  if (name == "poisson_synth") return Setting::poisson_synth;
  throw InvalidInput("unknown setting '" + name + "'");
}

Sample simulate(const SyntheticSetting& setting, const Theta& theta, std::size_t n, RngStream rng) {
  setting.check_theta(theta);
  const std::size_t dim = setting.dim;
  std::vector<double> values(n * dim);
  Rng gen(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double* x = values.data() + i * dim;
    switch (setting.tag) {
      case Setting::example1:
        for (std::size_t d = 0; d < dim; ++d) x[d] = gen.beta(theta[0], theta[0]);
        break;
      case Setting::bernoulli:
        x[0] = gen.bernoulli(theta[0]) ? 1.0 : 0.0;
        for (std::size_t d = 1; d < dim; ++d) x[d] = gen.normal(theta[0], 1.0);
        break;
      case Setting::scaling:
        x[0] = gen.normal(0.0, std::sqrt(theta[0]));
        for (std::size_t d = 1; d < dim; ++d) x[d] = gen.normal();
        break;
      case Setting::mog:
        x[0] = gen.normal(gen.bernoulli(0.5) ? theta[0] : -theta[0], 1.0);
        for (std::size_t d = 1; d < dim; ++d) x[d] = gen.normal();
        break;
      case Setting::poisson_synth: {
        const double lambda = poisson_synth_rate(theta);
        x[0] = static_cast<double>(gen.poisson(lambda));
        x[1] = static_cast<double>(gen.poisson(lambda));
        if (theta[1] < 0.5 && x[0] > x[1]) std::swap(x[0], x[1]);
        break;
      }
    }
  }
  return Sample(dim, std::move(values));
}

Sample approximate_simulate(const SyntheticSetting& setting, const Theta& theta, std::size_t n,
                            RngStream rng) {
  setting.check_theta(theta);
  const std::size_t dim = setting.dim;
  std::vector<double> values(n * dim);
  Rng gen(rng);
  switch (setting.tag) {
    case Setting::example1:
      for (double& v : values) v = gen.uniform();
      break;
    case Setting::bernoulli:
      for (double& v : values) v = gen.normal(theta[0], 1.0);
      break;
    case Setting::scaling:
    case Setting::mog:
      for (double& v : values) v = gen.normal();
      break;
    case Setting::poisson_synth:
      throw InvalidInput("poisson_synth has no built-in approximate likelihood; fit one");
  }
  return Sample(dim, std::move(values));
}

SyntheticLikelihood::SyntheticLikelihood(SyntheticSetting setting, bool approximate)
    : setting_(setting), approximate_(approximate) {
  if (approximate && setting.tag == Setting::poisson_synth) {
    throw InvalidInput("poisson_synth has no built-in approximate likelihood; fit one");
  }
}

std::string SyntheticLikelihood::name() const {
  return setting_.name() + (approximate_ ? "-approx" : "-true");
}

bool SyntheticLikelihood::supports(const Theta& theta) const {
  try {
    setting_.check_theta(theta);
    return true;
  } catch (const InvalidInput&) {
    return false;
  }
}

Sample SyntheticLikelihood::sample(const Theta& theta, std::size_t n, RngStream rng) const {
  return approximate_ ? approximate_simulate(setting_, theta, n, rng)
                      : simulate(setting_, theta, n, rng);
}

double SyntheticLikelihood::log_density(std::span<const double> x, const Theta& theta) const {
  setting_.check_theta(theta);
  if (x.size() != setting_.dim) throw InvalidInput("point dimension does not match the model");
  const double t = theta[0];
  double total = 0.0;
  auto add_standard_normals = [&](std::size_t from, double mean) {
    for (std::size_t d = from; d < x.size(); ++d) total += normal_log_density(x[d], mean, 1.0);
  };
  switch (setting_.tag) {
    case Setting::example1:
      for (double v : x) {
        if (v < 0.0 || v > 1.0) return kNegInf;
      }
      if (approximate_) return 0.0;
      for (double v : x) total += (t - 1.0) * (std::log(v) + std::log1p(-v)) - log_beta_fn(t, t);
      return total;
    case Setting::bernoulli:
      if (approximate_) {
        add_standard_normals(0, t);
        return total;
      }
      if (x[0] == 1.0) {
        total = std::log(t);
      } else if (x[0] == 0.0) {
        total = std::log1p(-t);
      } else {
        return kNegInf;
      }
      add_standard_normals(1, t);
      return total;
    case Setting::scaling:
      if (approximate_) {
        add_standard_normals(0, 0.0);
        return total;
      }
      total = normal_log_density(x[0], 0.0, t);
      add_standard_normals(1, 0.0);
      return total;
    case Setting::mog:
      if (approximate_) {
        add_standard_normals(0, 0.0);
        return total;
      }
      {
        const double a = normal_log_density(x[0], -t, 1.0);
        const double b = normal_log_density(x[0], t, 1.0);
        const double m = std::max(a, b);
        total = m + std::log(0.5 * std::exp(a - m) + 0.5 * std::exp(b - m));
      }
      add_standard_normals(1, 0.0);
      return total;
    case Setting::poisson_synth: {
      const double lambda = poisson_synth_rate(theta);
      const double la = poisson_log_pmf(x[0], lambda);
      const double lb = poisson_log_pmf(x[1], lambda);
      if (theta[1] >= 0.5) return la + lb;
      if (x[0] > x[1]) return kNegInf;
      if (x[0] == x[1]) return la + lb;
      return std::numbers::ln2 + la + lb;
    }
  }
  return kNegInf;
}

std::vector<Ensemble> make_ensembles(const SyntheticSetting& setting, std::span<const Theta> grid,
                                     std::size_t n_train, std::size_t n_test, RngStream rng) {
  std::vector<Ensemble> out;
  out.reserve(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    Sample all = simulate(setting, grid[j], n_train + n_test, derive_substream(rng, j));
    std::vector<std::size_t> train_idx(n_train);
    std::vector<std::size_t> test_idx(n_test);
    for (std::size_t i = 0; i < n_train; ++i) train_idx[i] = i;
    for (std::size_t i = 0; i < n_test; ++i) test_idx[i] = n_train + i;
    out.push_back({grid[j], all.subset(train_idx), all.subset(test_idx)});
  }
  return out;
}

std::vector<Theta> midpoint_grid(std::span<const std::pair<double, double>> box,
                                 std::size_t per_axis) {
  if (box.empty() || per_axis == 0) throw InvalidInput("grid needs a box and at least one point per axis");
  std::vector<Theta> grid{Theta{}};
  for (const auto& [lo, hi] : box) {
    std::vector<Theta> next;
    for (const auto& prefix : grid) {
      for (std::size_t k = 0; k < per_axis; ++k) {
        Theta t = prefix;
        t.push_back(lo + (static_cast<double>(k) + 0.5) * (hi - lo) / static_cast<double>(per_axis));
        next.push_back(std::move(t));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

}  // namespace emuval::models
