#pragma once

#include "emuval/regress.hpp"
#include "emuval/sample.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>

namespace emuval::stats {

enum class Kind { regression, mmd, energy, c2st };

/// full: fit and evaluate on all points (in-sample). split: fit on a seeded
/// half, evaluate on the other half.
enum class Mode { full, split };

/// A two-sample test statistic and its settings. Larger values are stronger
/// evidence that the two groups differ.
struct TwoSampleStatistic {
  Kind kind = Kind::regression;
  regress::MethodSpec method;  // regression engine (regression) or classifier (c2st)
  Mode mode = Mode::full;

  static TwoSampleStatistic regression(regress::MethodSpec method, Mode mode = Mode::full);
  static TwoSampleStatistic mmd();
  static TwoSampleStatistic energy();
  static TwoSampleStatistic c2st(regress::MethodSpec classifier);

  std::string name() const;
};

Kind parse_kind(const std::string& name);
Mode parse_mode(const std::string& name);

/// A statistic bound to a fixed pooled point set. Whatever depends only on
/// the points (distance matrices, kernel bandwidth, neighbour lists, feature
/// orderings) is computed once; evaluate() then scores any labeling. Safe to
/// call concurrently.
class BoundStatistic {
 public:
  BoundStatistic(const TwoSampleStatistic& statistic, const Sample& points);
  ~BoundStatistic();
  BoundStatistic(BoundStatistic&&) noexcept;
  BoundStatistic& operator=(BoundStatistic&&) noexcept;

  double evaluate(std::span<const std::uint8_t> labels, RngStream rng) const;
  std::size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double evaluate(const TwoSampleStatistic& statistic, const LabeledDataset& data, RngStream rng);

/// T = (1/n) Σ (m̂(X_i) - π̂₁)².
double regression_statistic(const LabeledDataset& data, const regress::MethodSpec& method,
                            Mode mode, RngStream rng);
/// Biased squared MMD, Gaussian kernel with median-distance bandwidth.
double mmd_statistic(const LabeledDataset& data);
/// Energy distance with the Euclidean norm.
double energy_statistic(const LabeledDataset& data);
/// Held-out accuracy of the regression thresholded at 1/2.
double c2st_statistic(const LabeledDataset& data, const regress::MethodSpec& classifier,
                      RngStream rng);

/// Median of the nonzero pairwise Euclidean distances; 1.0 if there are none.
double median_heuristic_bandwidth(const Sample& points);

/// sup_z |F̂(z) - z| for values in [0, 1].
double ks_uniformity(std::span<const double> values);
/// ∫₀¹ (F̂(z) - z)² dz for values in [0, 1].
double cvm_uniformity(std::span<const double> values);

}  // namespace emuval::stats
