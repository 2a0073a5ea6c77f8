#include "emuval/csv.hpp"
#include "emuval/errors.hpp"
#include "emuval/models.hpp"
#include "emuval/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

namespace emuval::models {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void check_ensembles(std::span<const Ensemble> ensembles, std::size_t min_train) {
  if (ensembles.empty()) throw InvalidInput("no ensembles to fit");
  std::set<Theta> seen;
  const std::size_t dim = ensembles.front().train.dim();
  for (const auto& e : ensembles) {
    if (e.train.size() < min_train) {
      throw InvalidInput("ensemble needs at least " + std::to_string(min_train) +
                         " training draws per parameter value");
    }
    if (e.train.dim() != dim) throw InvalidInput("ensembles have different dimensions");
    if (!seen.insert(e.theta).second) throw InvalidInput("duplicate parameter value in ensembles");
  }
}

[[noreturn]] void unfitted(const std::string& model) {
  throw InvalidInput(model + " model was not fitted at the requested parameter value");
}

void check_point(std::span<const double> x, std::size_t dim) {
  if (x.size() != dim) throw InvalidInput("point dimension does not match the model");
}

bool is_count(double v) { return v >= 0.0 && v == std::floor(v); }

// log of the upper normal tail Q(z) = P(Z > z).
double log_upper_tail(double z) {
  if (z < 30.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  return -0.5 * z * z - std::log(z) - kLogSqrt2Pi;
}

// log(Φ(b) - Φ(a)) for a < b.
double log_normal_interval(double a, double b) {
  if (a > 0.0) {
    const double la = log_upper_tail(a);
    return la + std::log1p(-std::exp(log_upper_tail(b) - la));
  }
  if (b < 0.0) return log_normal_interval(-b, -a);
  return std::log1p(-(std::exp(log_upper_tail(b)) + std::exp(log_upper_tail(-a))));
}

}  // namespace

// ---------------------------------------------------------------------------
// Ensemble files

void save_ensembles(const std::filesystem::path& dir, std::span<const Ensemble> ensembles) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = "emuval-ensembles";
  manifest["version"] = 1;
  auto& list = manifest["ensembles"] = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < ensembles.size(); ++j) {
    const auto& e = ensembles[j];
    const std::string train = "theta_" + std::to_string(j) + "_train.csv";
    const std::string test = "theta_" + std::to_string(j) + "_test.csv";
    write_sample_csv(dir / train, e.train);
    write_sample_csv(dir / test, e.test);
    list.push_back({{"theta", e.theta},
                    {"train", train},
                    {"test", test},
                    {"n_train", e.train.size()},
                    {"n_test", e.test.size()}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

std::vector<Ensemble> load_ensembles(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw InvalidInput("cannot open " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(manifest.string() + ": " + e.what());
  }
  const auto base = manifest.parent_path();
  std::vector<Ensemble> out;
  try {
    for (const auto& item : doc.at("ensembles")) {
      Ensemble e;
      e.theta = item.at("theta").get<Theta>();
      e.train = read_sample_csv(base / item.at("train").get<std::string>());
      if (item.contains("test")) e.test = read_sample_csv(base / item.at("test").get<std::string>());
      if (!e.test.empty() && e.test.dim() != e.train.dim()) {
        throw InvalidInput("train and test files differ in dimension");
      }
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(manifest.string() + ": " + e.what());
  }
  if (out.empty()) throw InvalidInput(manifest.string() + ": no ensembles listed");
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian

GaussianModel::GaussianModel(std::span<const Ensemble> ensembles) {
  check_ensembles(ensembles, 2);
  dim_ = ensembles.front().train.dim();
  const auto d = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  std::size_t total = 0;
  for (const auto& e : ensembles) {
    const std::size_t n = e.train.size();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
        e.train.values().data(), static_cast<Eigen::Index>(n), d);
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mu;
    scatter.noalias() += centered.transpose() * centered;
    total += n;
    fits_[e.theta].mean.assign(mu.data(), mu.data() + dim_);
  }
  scatter /= static_cast<double>(total - ensembles.size());
  scatter.diagonal().array() += 1e-6;

  Eigen::LLT<Eigen::MatrixXd> llt(scatter);
  if (llt.info() != Eigen::Success) throw InvalidInput("pooled covariance is not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();
  covariance_.resize(dim_ * dim_);
  cholesky_.resize(dim_ * dim_);
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t c = 0; c < dim_; ++c) {
      covariance_[r * dim_ + c] = scatter(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      cholesky_[r * dim_ + c] = lower(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  log_det_ = 2.0 * lower.diagonal().array().log().sum();
}

const std::vector<double>& GaussianModel::mean(const Theta& theta) const {
  auto it = fits_.find(theta);
  if (it == fits_.end()) unfitted("gaussian");
  return it->second.mean;
}

double GaussianModel::log_density(std::span<const double> x, const Theta& theta) const {
  check_point(x, dim_);
  const auto& mu = mean(theta);
  // Forward substitution L z = x - μ.
  std::vector<double> z(dim_);
  double quad = 0.0;
  for (std::size_t r = 0; r < dim_; ++r) {
    double v = x[r] - mu[r];
    for (std::size_t c = 0; c < r; ++c) v -= cholesky_[r * dim_ + c] * z[c];
    z[r] = v / cholesky_[r * dim_ + r];
    quad += z[r] * z[r];
  }
  return -0.5 * quad - 0.5 * log_det_ - static_cast<double>(dim_) * kLogSqrt2Pi;
}

Sample GaussianModel::sample(const Theta& theta, std::size_t n, RngStream rng) const {
  const auto& mu = mean(theta);
  Rng gen(rng);
  std::vector<double> values(n * dim_);
  std::vector<double> z(dim_);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : z) v = gen.normal();
    for (std::size_t r = 0; r < dim_; ++r) {
      double v = mu[r];
      for (std::size_t c = 0; c <= r; ++c) v += cholesky_[r * dim_ + c] * z[c];
      values[i * dim_ + r] = v;
    }
  }
  return Sample(dim_, std::move(values));
}

// ---------------------------------------------------------------------------
// Poisson

PoissonModel::PoissonModel(std::span<const Ensemble> ensembles) {
  check_ensembles(ensembles, 1);
  dim_ = ensembles.front().train.dim();
  for (const auto& e : ensembles) {
    std::vector<double> rate(dim_, 0.0);
    for (std::size_t i = 0; i < e.train.size(); ++i) {
      for (std::size_t d = 0; d < dim_; ++d) rate[d] += e.train.at(i, d);
    }
    for (double& r : rate) r = std::max(r / static_cast<double>(e.train.size()), 1e-6);
    rates_[e.theta] = std::move(rate);
  }
}

const std::vector<double>& PoissonModel::rates(const Theta& theta) const {
  auto it = rates_.find(theta);
  if (it == rates_.end()) unfitted("poisson");
  return it->second;
}

double PoissonModel::log_density(std::span<const double> x, const Theta& theta) const {
  check_point(x, dim_);
  const auto& rate = rates(theta);
  double total = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    if (!is_count(x[d])) return kNegInf;
    total += x[d] * std::log(rate[d]) - rate[d] - std::lgamma(x[d] + 1.0);
  }
  return total;
}

Sample PoissonModel::sample(const Theta& theta, std::size_t n, RngStream rng) const {
  const auto& rate = rates(theta);
  Rng gen(rng);
  std::vector<double> values(n * dim_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim_; ++d) {
      values[i * dim_ + d] = static_cast<double>(gen.poisson(rate[d]));
    }
  }
  return Sample(dim_, std::move(values));
}

// ---------------------------------------------------------------------------
// Discretized KDE

KdeModel::KdeModel(std::span<const Ensemble> ensembles) {
  check_ensembles(ensembles, 2);
  dim_ = ensembles.front().train.dim();
  for (const auto& e : ensembles) {
    const std::size_t n = e.train.size();
    const double shrink = 1.06 * std::pow(static_cast<double>(n), -0.2);
    Fit fit{e.train, std::vector<double>(dim_)};
    for (std::size_t d = 0; d < dim_; ++d) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += e.train.at(i, d);
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (e.train.at(i, d) - mean) * (e.train.at(i, d) - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      fit.bandwidth[d] = std::max(shrink * sd, 1e-3);
    }
    fits_.emplace(e.theta, std::move(fit));
  }
}

const KdeModel::Fit& KdeModel::fit(const Theta& theta) const {
  auto it = fits_.find(theta);
  if (it == fits_.end()) unfitted("kde");
  return it->second;
}

double KdeModel::log_density(std::span<const double> x, const Theta& theta) const {
  check_point(x, dim_);
  const Fit& f = fit(theta);
  for (double v : x) {
    if (v != std::floor(v)) return kNegInf;
  }
  const std::size_t n = f.points.size();
  std::vector<double> terms(n);
  double best = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    double t = 0.0;
    for (std::size_t d = 0; d < dim_ && t > kNegInf; ++d) {
      const double h = f.bandwidth[d];
      const double c = f.points.at(i, d);
      t += log_normal_interval((x[d] - 0.5 - c) / h, (x[d] + 0.5 - c) / h);
    }
    terms[i] = t;
    best = std::max(best, t);
  }
  if (best == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - best);
  return best + std::log(sum) - std::log(static_cast<double>(n));
}

Sample KdeModel::sample(const Theta& theta, std::size_t n, RngStream rng) const {
  const Fit& f = fit(theta);
  Rng gen(rng);
  std::vector<double> values(n * dim_);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = static_cast<std::size_t>(gen.below(f.points.size()));
    for (std::size_t d = 0; d < dim_; ++d) {
      values[i * dim_ + d] = std::floor(f.points.at(src, d) + f.bandwidth[d] * gen.normal() + 0.5);
    }
  }
  return Sample(dim_, std::move(values));
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "gaussian") return ModelKind::gaussian;
  if (name == "poisson") return ModelKind::poisson;
  if (name == "kde") return ModelKind::kde;
  throw InvalidInput("unknown model '" + name + "' (expected gaussian, poisson or kde)");
}

std::unique_ptr<ApproxLikelihood> fit_model(ModelKind kind, std::span<const Ensemble> ensembles) {
  switch (kind) {
    case ModelKind::gaussian: return std::make_unique<GaussianModel>(ensembles);
    case ModelKind::poisson: return std::make_unique<PoissonModel>(ensembles);
    case ModelKind::kde: return std::make_unique<KdeModel>(ensembles);
  }
  throw InvalidInput("unknown model kind");
}

// ---------------------------------------------------------------------------
// KL, posterior grid, LR p-value

KlEstimate kl_estimate(const ApproxLikelihood& model, std::span<const Ensemble> ensembles) {
  KlEstimate out;
  double total = 0.0;
  for (const auto& e : ensembles) {
    if (!model.supports(e.theta)) unfitted(model.name());
    for (std::size_t i = 0; i < e.test.size(); ++i) {
      const double l = model.log_density(e.test.row(i), e.theta);
      if (std::isfinite(l)) {
        total += l;
      } else {
        ++out.n_nonfinite;
      }
      ++out.n_points;
    }
  }
  if (out.n_points == 0) throw InvalidInput("ensembles have no test draws");
  out.value = out.n_nonfinite > 0 ? std::numeric_limits<double>::infinity()
                                  : -total / static_cast<double>(out.n_points);
  return out;
}

double GammaPrior::log_density(double theta) const {
  if (theta <= 0.0) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(theta) - rate * theta;
}

double GammaPrior::draw(Rng& rng) const { return rng.gamma(shape) / rate; }

PosteriorGrid::PosteriorGrid(const GammaPrior& prior,
                             const std::function<double(double)>& log_likelihood, std::size_t nodes,
                             double lo, double hi) {
  if (nodes < 2 || !(lo > 0.0) || !(hi > lo)) throw InvalidInput("invalid posterior grid");
  nodes_.resize(nodes);
  std::vector<double> logw(nodes);
  const double step = std::log(hi / lo) / static_cast<double>(nodes - 1);
  double best = kNegInf;
  for (std::size_t i = 0; i < nodes; ++i) {
    nodes_[i] = i + 1 == nodes ? hi : lo * std::exp(step * static_cast<double>(i));
    logw[i] = prior.log_density(nodes_[i]) + log_likelihood(nodes_[i]);
    if (std::isnan(logw[i])) logw[i] = kNegInf;
    best = std::max(best, logw[i]);
  }
  if (best == kNegInf) throw InvalidInput("posterior vanishes on the whole grid");
  cdf_.assign(nodes, 0.0);
  for (std::size_t i = 1; i < nodes; ++i) {
    const double a = std::exp(logw[i - 1] - best);
    const double b = std::exp(logw[i] - best);
    cdf_[i] = cdf_[i - 1] + 0.5 * (a + b) * (nodes_[i] - nodes_[i - 1]);
  }
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double PosteriorGrid::cdf(double theta) const {
  if (theta <= nodes_.front()) return 0.0;
  if (theta >= nodes_.back()) return 1.0;
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), theta);
  const std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
  const double w = (theta - nodes_[i - 1]) / (nodes_[i] - nodes_[i - 1]);
  return cdf_[i - 1] + w * (cdf_[i] - cdf_[i - 1]);
}

double PosteriorGrid::quantile(double u) const {
  if (u <= 0.0) return nodes_.front();
  if (u >= 1.0) return nodes_.back();
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  if (i == 0) return nodes_.front();
  const double span = cdf_[i] - cdf_[i - 1];
  const double w = span > 0.0 ? (u - cdf_[i - 1]) / span : 0.0;
  return nodes_[i - 1] + w * (nodes_[i] - nodes_[i - 1]);
}

double pq_statistic(const PosteriorGrid& posterior, double theta_tilde) {
  return posterior.cdf(theta_tilde);
}

std::size_t sbc_rank(const PosteriorGrid& posterior, double theta_tilde, std::size_t draws,
                     RngStream rng) {
  Rng gen(rng);
  std::size_t rank = 0;
  for (std::size_t l = 0; l < draws; ++l) {
    if (posterior.quantile(gen.uniform()) < theta_tilde) ++rank;
  }
  return rank;
}

std::function<double(double)> beta_log_likelihood(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) {
    const double c = std::clamp(v, 1e-300, 1.0 - 1e-16);
    s += std::log(c) + std::log1p(-c);
  }
  return beta_log_likelihood(s, x.size());
}

std::function<double(double)> beta_log_likelihood(double s, std::size_t n) {
  const double count = static_cast<double>(n);
  return [s, count](double theta) {
    return (theta - 1.0) * s - count * (2.0 * std::lgamma(theta) - std::lgamma(2.0 * theta));
  };
}

double simulate_beta_log_statistic(double theta, std::size_t n, RngStream rng) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidInput("Beta parameter must be positive");
  Rng gen(rng);
  double s = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    const auto [log_x, log_1mx] = gen.log_beta(theta, theta);
    s += log_x + log_1mx;
  }
  return s;
}

double approximate_lr_pvalue(const Sample& x, const ApproxLikelihood& model, const Theta& theta0,
                             std::vector<Theta> grid, std::size_t n_mc, RngStream rng) {
  if (n_mc == 0) throw InvalidInput("need at least one Monte-Carlo draw");
  if (x.empty()) throw InvalidInput("empty sample");
  if (std::find(grid.begin(), grid.end(), theta0) == grid.end()) grid.push_back(theta0);
  auto log_ratio = [&](const Sample& s) {
    const double at_null = model.log_likelihood(s, theta0);
    double best = at_null;
    for (const auto& t : grid) best = std::max(best, model.log_likelihood(s, t));
    return at_null - best;
  };
  const double observed = log_ratio(x);
  std::vector<double> null_draws(n_mc);
  parallel_for(n_mc, [&](std::size_t m) {
    null_draws[m] = log_ratio(model.sample(theta0, x.size(), derive_substream(rng, m + 1)));
  });
  const auto at_most = std::count_if(null_draws.begin(), null_draws.end(),
                                     [&](double v) { return v <= observed; });
  return static_cast<double>(1 + at_most) / static_cast<double>(n_mc + 1);
}

}  // namespace emuval::models
