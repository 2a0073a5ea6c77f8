#include "emuval/sample.hpp"

#include "emuval/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace emuval {
namespace {

void check_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput("sample contains a NaN or infinite entry");
  }
}

}  // namespace

Sample::Sample(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InvalidInput("sample dimension must be at least 1");
}

Sample::Sample(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim == 0) throw InvalidInput("sample dimension must be at least 1");
  if (values_.size() % dim != 0) {
    throw InvalidInput("sample value count is not a multiple of its dimension");
  }
  check_finite(values_);
}

Sample Sample::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidInput("cannot infer dimension of an empty sample");
  Sample s(rows.front().size());
  s.reserve(rows.size());
  for (const auto& r : rows) s.push_back(r);
  return s;
}

void Sample::push_back(std::span<const double> point) {
  if (point.size() != dim_) {
    throw InvalidInput("point has dimension " + std::to_string(point.size()) +
                       ", sample has " + std::to_string(dim_));
  }
  check_finite(point);
  values_.insert(values_.end(), point.begin(), point.end());
}

Sample Sample::subset(std::span<const std::size_t> indices) const {
  Sample out(dim_);
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    auto r = row(i);
    out.values_.insert(out.values_.end(), r.begin(), r.end());
  }
  return out;
}

LabeledDataset::LabeledDataset(Sample points, std::vector<std::uint8_t> labels)
    : points_(std::move(points)), labels_(std::move(labels)) {
  if (points_.size() != labels_.size()) {
    throw InvalidInput("points and labels differ in length");
  }
  if (labels_.size() < 2) throw InvalidInput("a labeled dataset needs at least 2 points");
  for (auto y : labels_) {
    if (y > 1) throw InvalidInput("labels must be 0 or 1");
  }
}

std::size_t LabeledDataset::count_ones() const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), 1));
}

double LabeledDataset::pi1() const {
  return static_cast<double>(count_ones()) / static_cast<double>(size());
}

bool LabeledDataset::has_both_labels() const {
  const auto ones = count_ones();
  return ones > 0 && ones < size();
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<std::uint8_t> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(labels_[i]);
  return LabeledDataset(points_.subset(indices), std::move(labels));
}

LabeledDataset pool_and_label(const Sample& s0, const Sample& s1) {
  if (s0.empty() || s1.empty()) throw InvalidInput("cannot pool an empty sample");
  if (s0.dim() != s1.dim()) {
    throw InvalidInput("dimension mismatch: " + std::to_string(s0.dim()) + " vs " +
                       std::to_string(s1.dim()));
  }
  std::vector<double> values;
  values.reserve(s0.values().size() + s1.values().size());
  values.insert(values.end(), s0.values().begin(), s0.values().end());
  values.insert(values.end(), s1.values().begin(), s1.values().end());
  std::vector<std::uint8_t> labels(s0.size(), 0);
  labels.resize(s0.size() + s1.size(), 1);
  return LabeledDataset(Sample(s0.dim(), std::move(values)), std::move(labels));
}

double resampling_p_value(double observed, std::span<const double> null_draws) {
  const auto exceed = std::count_if(null_draws.begin(), null_draws.end(),
                                    [observed](double t) { return t > observed; });
  return (1.0 + static_cast<double>(exceed)) /
         (static_cast<double>(null_draws.size()) + 1.0);
}

LabeledDataset shuffle_rows(const LabeledDataset& data, RngStream rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng(rng).shuffle(std::span<std::size_t>(order));
  const std::size_t dim = data.dim();
  std::vector<double> values;
  values.reserve(data.size() * dim);
  std::vector<std::uint8_t> labels;
  labels.reserve(data.size());
  for (const std::size_t i : order) {
    const auto row = data.points().row(i);
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back(data.labels()[i]);
  }
  return LabeledDataset(Sample(dim, std::move(values)), std::move(labels));
}

std::vector<std::uint8_t> permute_labels(std::span<const std::uint8_t> labels,
                                         RngStream rng) {
  std::vector<std::uint8_t> out(labels.begin(), labels.end());
  Rng gen(rng);
  gen.shuffle(std::span<std::uint8_t>(out));
  return out;
}

}  // namespace emuval
