#pragma once

#include "emuval/rng.hpp"
#include "emuval/sample.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace emuval::models {

// ---------------------------------------------------------------------------
// Likelihood interface

/// A generative model L̂(x; θ) that can be sampled and (usually) evaluated.
/// Densities are normalized over the model's support: Lebesgue measure for
/// continuous coordinates, counting measure for integer ones.
class ApproxLikelihood {
 public:
  virtual ~ApproxLikelihood() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double log_density(std::span<const double> x, const Theta& theta) const = 0;
  virtual Sample sample(const Theta& theta, std::size_t n, RngStream rng) const = 0;
  /// Whether the model is defined at θ (fitted there, or inside its domain).
  virtual bool supports(const Theta& theta) const = 0;

  /// Σ over rows of log_density.
  double log_likelihood(const Sample& x, const Theta& theta) const;
};

// ---------------------------------------------------------------------------
// Synthetic settings

enum class Setting { example1, bernoulli, scaling, mog, poisson_synth };

struct SyntheticSetting {
  Setting tag = Setting::bernoulli;
  std::size_t dim = 1;

  /// example1 defaults to 1000 coordinates, poisson_synth to 2.
  static SyntheticSetting make(Setting tag, std::size_t dim = 0);

  /// Closed parameter box, one (lo, hi) pair per θ coordinate.
  std::vector<std::pair<double, double>> domain() const;
  void check_theta(const Theta& theta) const;
  std::string name() const;
};

Setting parse_setting(const std::string& name);

/// Draws from the true likelihood L(x; θ) of the setting.
Sample simulate(const SyntheticSetting& setting, const Theta& theta, std::size_t n, RngStream rng);
/// Draws from the setting's misspecified approximation L̂(x; θ).
Sample approximate_simulate(const SyntheticSetting& setting, const Theta& theta, std::size_t n,
                            RngStream rng);

/// The true (or built-in approximate) likelihood of a synthetic setting.
class SyntheticLikelihood final : public ApproxLikelihood {
 public:
  SyntheticLikelihood(SyntheticSetting setting, bool approximate);

  std::string name() const override;
  std::size_t dim() const override { return setting_.dim; }
  double log_density(std::span<const double> x, const Theta& theta) const override;
  Sample sample(const Theta& theta, std::size_t n, RngStream rng) const override;
  bool supports(const Theta& theta) const override;

  const SyntheticSetting& setting() const { return setting_; }
  bool approximate() const { return approximate_; }

 private:
  SyntheticSetting setting_;
  bool approximate_;
};

// ---------------------------------------------------------------------------
// Ensembles

/// Batch of simulator realizations at one θ, split into a fitting part and a
/// held-out test part.
struct Ensemble {
  Theta theta;
  Sample train;
  Sample test;
};

/// Simulates n_train + n_test draws at every grid point.
std::vector<Ensemble> make_ensembles(const SyntheticSetting& setting,
                                     std::span<const Theta> grid, std::size_t n_train,
                                     std::size_t n_test, RngStream rng);

/// Evenly spaced cell midpoints: `per_axis` points on each axis of `box`.
std::vector<Theta> midpoint_grid(std::span<const std::pair<double, double>> box,
                                 std::size_t per_axis);

/// Writes <dir>/theta_<j>_{train,test}.csv and <dir>/manifest.json.
void save_ensembles(const std::filesystem::path& dir, std::span<const Ensemble> ensembles);
/// Reads a manifest written by save_ensembles (paths relative to the manifest).
std::vector<Ensemble> load_ensembles(const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------
// Fitted approximate likelihoods (per-θ, no interpolation across θ)

/// Per-θ mean with one covariance shared by every θ (pooled within-θ
/// scatter plus a 1e-6 diagonal ridge). Evaluated as a continuous density.
class GaussianModel final : public ApproxLikelihood {
 public:
  struct Fit {
    std::vector<double> mean;
  };

  explicit GaussianModel(std::span<const Ensemble> ensembles);

  std::string name() const override { return "gaussian"; }
  std::size_t dim() const override { return dim_; }
  double log_density(std::span<const double> x, const Theta& theta) const override;
  Sample sample(const Theta& theta, std::size_t n, RngStream rng) const override;
  bool supports(const Theta& theta) const override { return fits_.count(theta) > 0; }

  const std::vector<double>& mean(const Theta& theta) const;
  /// Row-major D x D shared covariance.
  const std::vector<double>& covariance() const { return covariance_; }
  const std::map<Theta, Fit>& fits() const { return fits_; }

 private:
  std::size_t dim_ = 0;
  std::map<Theta, Fit> fits_;
  std::vector<double> covariance_;
  std::vector<double> cholesky_;  // lower triangle, row-major
  double log_det_ = 0.0;
};

/// Independent Poisson coordinates with per-θ mean rates (floored at 1e-6).
class PoissonModel final : public ApproxLikelihood {
 public:
  explicit PoissonModel(std::span<const Ensemble> ensembles);

  std::string name() const override { return "poisson"; }
  std::size_t dim() const override { return dim_; }
  double log_density(std::span<const double> x, const Theta& theta) const override;
  Sample sample(const Theta& theta, std::size_t n, RngStream rng) const override;
  bool supports(const Theta& theta) const override { return rates_.count(theta) > 0; }

  const std::vector<double>& rates(const Theta& theta) const;

 private:
  std::size_t dim_ = 0;
  std::map<Theta, std::vector<double>> rates_;
};

/// Per-θ product-Gaussian KDE with normal-reference bandwidths
/// 1.06 σ̂ n^(-1/5), discretized onto the integer lattice: a draw is a
/// kernel draw rounded to the nearest integer, and the mass of lattice point
/// k is the kernel mass of the unit cell around k.
class KdeModel final : public ApproxLikelihood {
 public:
  struct Fit {
    Sample points;
    std::vector<double> bandwidth;
  };

  explicit KdeModel(std::span<const Ensemble> ensembles);

  std::string name() const override { return "kde"; }
  std::size_t dim() const override { return dim_; }
  double log_density(std::span<const double> x, const Theta& theta) const override;
  Sample sample(const Theta& theta, std::size_t n, RngStream rng) const override;
  bool supports(const Theta& theta) const override { return fits_.count(theta) > 0; }

  const Fit& fit(const Theta& theta) const;

 private:
  std::size_t dim_ = 0;
  std::map<Theta, Fit> fits_;
};

enum class ModelKind { gaussian, poisson, kde };
ModelKind parse_model_kind(const std::string& name);
std::unique_ptr<ApproxLikelihood> fit_model(ModelKind kind, std::span<const Ensemble> ensembles);

// ---------------------------------------------------------------------------
// Model comparison and inference helpers

struct KlEstimate {
  /// -(1/n) ΣⱼΣᵢ log L̂(x_ij; θⱼ), without the model-independent constant.
  double value = 0.0;
  std::size_t n_points = 0;
  /// Test points where L̂ = 0; value is +inf when nonzero.
  std::size_t n_nonfinite = 0;
};

KlEstimate kl_estimate(const ApproxLikelihood& model, std::span<const Ensemble> ensembles);

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;

  double log_density(double theta) const;
  double draw(Rng& rng) const;
};

/// One-dimensional posterior ∝ prior(θ) L̂(x; θ) tabulated on a log-spaced
/// grid and normalized in log space. The CDF is piecewise linear between
/// nodes.
class PosteriorGrid {
 public:
  PosteriorGrid(const GammaPrior& prior, const std::function<double(double)>& log_likelihood,
                std::size_t nodes = 2000, double lo = 0.001, double hi = 20.0);

  double cdf(double theta) const;
  double quantile(double u) const;
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> cdf_;
};

/// Posterior mass below the prior draw θ̃.
double pq_statistic(const PosteriorGrid& posterior, double theta_tilde);
/// #{θ_l < θ̃} over L posterior draws.
std::size_t sbc_rank(const PosteriorGrid& posterior, double theta_tilde, std::size_t draws,
                     RngStream rng);

/// Log-likelihood of θ for one example1 draw (Beta(θ, θ) coordinates),
/// through the sufficient statistic Σ log x + Σ log(1 - x).
std::function<double(double)> beta_log_likelihood(std::span<const double> x);
/// Same, from the statistic s = Σ log x + Σ log(1 - x) over n coordinates.
std::function<double(double)> beta_log_likelihood(double s, std::size_t n);
/// s for one example1 draw of n Beta(θ, θ) coordinates, taken from the
/// underlying gamma variates. Uses the same draws as simulate(), but keeps
/// the exact logs of coordinates that round to 0 or 1 in double precision.
double simulate_beta_log_statistic(double theta, std::size_t n, RngStream rng);

/// Monte-Carlo p-value of the estimated likelihood-ratio statistic for the
/// point null θ = θ₀. Small λ̂ is evidence against H₀.
double approximate_lr_pvalue(const Sample& x, const ApproxLikelihood& model, const Theta& theta0,
                             std::vector<Theta> grid, std::size_t n_mc, RngStream rng);

}  // namespace emuval::models
