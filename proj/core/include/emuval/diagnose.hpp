#pragma once

#include "emuval/regress.hpp"
#include "emuval/sample.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace emuval::diagnose {

/// Where in feature space the two samples differ, at one test point.
struct PointDiagnosis {
  std::vector<double> x;
  double m_hat = 0.0;
  /// (m̂(x) - π̂₁)²
  double deviation = 0.0;
  /// sign(m̂(x) - π̂₁): +1 where group 1 is over-represented.
  int direction = 0;
  double p_value = 1.0;
  bool flagged = false;
};

/// Fits m̂ on `train`, scores every test point, and builds per-point
/// permutation nulls from one shared schedule of M train-label permutations.
/// Flags come from Benjamini-Hochberg at level alpha; a point with zero
/// deviation is never flagged.
std::vector<PointDiagnosis> feature_space_test(const LabeledDataset& train,
                                               const Sample& test_points,
                                               const regress::MethodSpec& method, std::size_t m,
                                               double alpha, RngStream rng);

/// Step-up procedure: flags every p ≤ p₍ᵣ₎ for the largest r with
/// p₍ᵣ₎ ≤ r·alpha/m.
std::vector<bool> benjamini_hochberg(std::span<const double> pvals, double alpha);

struct DependencePoint {
  double value = 0.0;
  double mean_prediction = 0.0;
};

/// Average prediction over `data` with feature d set to each grid value.
std::vector<DependencePoint> partial_dependence(const regress::RegressionModel& model,
                                                const Sample& data, std::size_t d,
                                                std::span<const double> grid);

struct HoldoutSplit {
  LabeledDataset train;
  LabeledDataset test;
};

/// Seeded split, stratified by label: round(train_fraction·n_y) points of
/// each label y go to the training part (at least one when n_y ≥ 1).
HoldoutSplit holdout_split(const LabeledDataset& data, double train_fraction, RngStream rng);

/// Columns x0..x{D-1}, m_hat, deviation, direction, p_value, flagged.
void write_diagnosis_csv(std::ostream& out, std::span<const PointDiagnosis> rows);

}  // namespace emuval::diagnose
