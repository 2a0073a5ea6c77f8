#pragma once

#include "emuval/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace emuval {

/// Parameter vector θ.
using Theta = std::vector<double>;

/// n draws of a D-dimensional feature vector, stored row-major. Integer
/// valued data (counts) are carried as reals. Every entry is finite.
class Sample {
 public:
  Sample() = default;
  explicit Sample(std::size_t dim);
  /// `values` holds n * dim entries row by row.
  Sample(std::size_t dim, std::vector<double> values);

  static Sample from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return values_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  double at(std::size_t i, std::size_t d) const { return values_[i * dim_ + d]; }
  const std::vector<double>& values() const { return values_; }

  void push_back(std::span<const double> point);
  void reserve(std::size_t n) { values_.reserve(n * dim_); }

  /// Rows at `indices`, in that order.
  Sample subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Sample&, const Sample&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// Pooled sample with origin labels Y (0 = simulator, 1 = emulator).
class LabeledDataset {
 public:
  LabeledDataset(Sample points, std::vector<std::uint8_t> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return points_.dim(); }
  const Sample& points() const { return points_; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }

  std::size_t count_ones() const;
  /// Fraction of points with Y = 1.
  double pi1() const;
  bool has_both_labels() const;

  LabeledDataset subset(std::span<const std::size_t> indices) const;

 private:
  Sample points_;
  std::vector<std::uint8_t> labels_;
};

/// Concatenates s0 then s1, labelling them 0 and 1.
LabeledDataset pool_and_label(const Sample& s0, const Sample& s1);

/// Outcome of a resampling test.
struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::vector<double> null_draws;
  std::size_t m_used = 0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  /// Fraction of pooled points from group 1.
  double pi1 = 0.0;
  RngStream seed;
};

/// (1 + #{null > observed}) / (M + 1). Null draws tied with the observed value
/// are not counted, so ties lower the p-value.
double resampling_p_value(double observed, std::span<const double> null_draws);

/// The same rows and labels in a random order. Index-based tie-breaking in a
/// statistic then no longer depends on which group was pooled first.
LabeledDataset shuffle_rows(const LabeledDataset& data, RngStream rng);

/// Random permutation of `labels`.
std::vector<std::uint8_t> permute_labels(std::span<const std::uint8_t> labels,
                                         RngStream rng);

}  // namespace emuval
