#include "emuval/regress.hpp"

#include "emuval/errors.hpp"
#include "forest_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace emuval::regress {
namespace {

// Four partial sums so the loop vectorizes; symmetric in its arguments.
double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = a.size();
  std::size_t d = 0;
  for (; d + 4 <= n; d += 4) {
    for (std::size_t j = 0; j < 4; ++j) {
      const double diff = a[d + j] - b[d + j];
      acc[j] += diff * diff;
    }
  }
  for (; d < n; ++d) {
    const double diff = a[d] - b[d];
    acc[0] += diff * diff;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

struct Neighbour {
  double dist;
  std::uint32_t idx;
  bool operator<(const Neighbour& o) const {
    return dist < o.dist || (dist == o.dist && idx < o.idx);
  }
};

// Moves the k smallest to the front in order and writes their indices.
void select_k(std::vector<Neighbour>& buf, std::size_t k, std::span<std::uint32_t> out) {
  // Max-heap of the best k so far; most candidates fail the first comparison.
  const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(k);
  std::make_heap(buf.begin(), mid);
  for (auto it = mid; it != buf.end(); ++it) {
    if (*it < buf.front()) {
      std::pop_heap(buf.begin(), mid);
      *(mid - 1) = *it;
      std::push_heap(buf.begin(), mid);
    }
  }
  std::sort_heap(buf.begin(), mid);
  for (std::size_t j = 0; j < k; ++j) out[j] = buf[j].idx;
}

constexpr std::size_t kMaxCachedPoints = 4096;

/// Indices (into `candidates`) of the k nearest candidates to x, ties broken
/// by lowest candidate index.
void k_nearest(std::span<const double> x, const Sample& points,
               std::span<const std::uint32_t> candidates, std::size_t k,
               std::vector<Neighbour>& buf, std::span<std::uint32_t> out) {
  buf.clear();
  for (std::uint32_t c : candidates) buf.push_back({squared_distance(x, points.row(c)), c});
  select_k(buf, k, out);
}

void check_k(std::size_t k, std::size_t n) {
  if (k < 1 || k > n) {
    throw InvalidInput("knn requires 1 <= k <= n (k=" + std::to_string(k) +
                       ", n=" + std::to_string(n) + ")");
  }
}

}  // namespace

std::size_t ForestParams::resolved_mtry(std::size_t dim) const {
  if (mtry != 0) return mtry;
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim))));
}

void ForestParams::validate(std::size_t dim) const {
  if (n_trees < 1) throw InvalidInput("forest needs at least one tree");
  if (min_leaf < 1) throw InvalidInput("min_leaf must be at least 1");
  const auto m = resolved_mtry(dim);
  if (m < 1 || m > dim) throw InvalidInput("mtry must lie in [1, D]");
}

MethodSpec MethodSpec::knn(std::size_t k) {
  MethodSpec s;
  s.method = Method::knn;
  s.k = k;
  return s;
}

MethodSpec MethodSpec::random_forest(ForestParams params) {
  MethodSpec s;
  s.method = Method::random_forest;
  s.forest = params;
  return s;
}

MethodSpec MethodSpec::constant() {
  MethodSpec s;
  s.method = Method::constant;
  return s;
}

std::size_t MethodSpec::resolved_k(std::size_t n_train) const {
  if (k != 0) return k;
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_train)))));
}

std::string MethodSpec::name() const {
  switch (method) {
    case Method::knn: return "knn";
    case Method::random_forest: return "rf";
    case Method::constant: return "constant";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "knn" || name == "nn") return Method::knn;
  if (name == "rf" || name == "random_forest") return Method::random_forest;
  if (name == "constant") return Method::constant;
  throw InvalidInput("unknown regression method '" + name + "'");
}

Method RegressionModel::method() const {
  switch (state_.index()) {
    case 0: return Method::knn;
    case 1: return Method::random_forest;
    default: return Method::constant;
  }
}

std::size_t RegressionModel::dim() const {
  return std::visit(
      [](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Knn>) {
          return s.points.dim();
        } else {
          return s.dim;
        }
      },
      state_);
}

double RegressionModel::predict(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw InvalidInput("prediction point has dimension " + std::to_string(x.size()) +
                       ", model expects " + std::to_string(dim()));
  }
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Knn>) {
          std::vector<Neighbour> buf;
          std::vector<std::uint32_t> nn(s.k);
          auto candidates = all_indices(s.points.size());
          k_nearest(x, s.points, candidates, s.k, buf, nn);
          double sum = 0.0;
          for (auto i : nn) sum += s.labels[i];
          return sum / static_cast<double>(s.k);
        } else if constexpr (std::is_same_v<T, Forest>) {
          double sum = 0.0;
          for (const auto& t : s.trees) sum += t.predict(x);
          return sum / static_cast<double>(s.trees.size());
        } else {
          return s.pi1;
        }
      },
      state_);
}

std::vector<double> RegressionModel::predict(const Sample& points) const {
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = predict(points.row(i));
  return out;
}

RegressionModel fit_knn(const LabeledDataset& data, std::size_t k) {
  check_k(k, data.size());
  return RegressionModel(RegressionModel::Knn{data.points(), data.labels(), k});
}

RegressionModel fit_random_forest(const LabeledDataset& data, const ForestParams& params,
                                  RngStream rng) {
  detail::ForestBuilder builder(data.points());
  auto train = all_indices(data.size());
  return RegressionModel(RegressionModel::Forest{
      data.dim(), builder.grow(train, data.labels(), params, rng)});
}

RegressionModel fit_constant(const LabeledDataset& data) {
  return RegressionModel(RegressionModel::Constant{data.dim(), data.pi1()});
}

RegressionModel fit(const MethodSpec& spec, const LabeledDataset& data, RngStream rng) {
  switch (spec.method) {
    case Method::knn: return fit_knn(data, spec.resolved_k(data.size()));
    case Method::random_forest: return fit_random_forest(data, spec.forest, rng);
    case Method::constant: return fit_constant(data);
  }
  throw InvalidInput("unknown regression method");
}

std::vector<std::uint32_t> all_indices(std::size_t n) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  return idx;
}

// ---------------------------------------------------------------------------

struct PointSetRegressor::Impl {
  MethodSpec spec;
  Sample points;
  std::unique_ptr<detail::ForestBuilder> forest;

  std::vector<std::uint32_t> default_train;
  std::vector<std::uint32_t> default_query;
  std::size_t default_k = 0;
  std::vector<std::uint32_t> default_neighbours;  // default_k per query point

  void knn_fit_predict(std::span<const std::uint32_t> train,
                       std::span<const std::uint8_t> labels,
                       std::span<const std::uint32_t> query, std::span<double> out) const {
    const std::size_t k = spec.resolved_k(train.size());
    check_k(k, train.size());
    std::vector<Neighbour> buf;
    std::vector<std::uint32_t> nn(k);
    for (std::size_t q = 0; q < query.size(); ++q) {
      k_nearest(points.row(query[q]), points, train, k, buf, nn);
      double sum = 0.0;
      for (auto i : nn) sum += labels[i];
      out[q] = sum / static_cast<double>(k);
    }
  }
};

PointSetRegressor::PointSetRegressor(const MethodSpec& spec, const Sample& points)
    : impl_(std::make_unique<Impl>()) {
  impl_->spec = spec;
  impl_->points = points;
  if (spec.method == Method::random_forest) {
    spec.forest.validate(points.dim());
    impl_->forest = std::make_unique<detail::ForestBuilder>(points);
  }
}

PointSetRegressor::PointSetRegressor(const MethodSpec& spec, const Sample& points,
                                     std::vector<std::uint32_t> default_train,
                                     std::vector<std::uint32_t> default_query)
    : PointSetRegressor(spec, points) {
  impl_->default_train = std::move(default_train);
  impl_->default_query = std::move(default_query);
  if (spec.method == Method::knn) {
    const auto& train = impl_->default_train;
    const std::size_t k = spec.resolved_k(train.size());
    check_k(k, train.size());
    impl_->default_k = k;
    impl_->default_neighbours.resize(k * impl_->default_query.size());
    std::vector<Neighbour> buf;
    const std::size_t n = points.size();
    if (n <= kMaxCachedPoints) {
      // Every pairwise distance once; queries and candidates usually overlap.
      std::vector<double> dist(n * n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          dist[i * n + j] = dist[j * n + i] = squared_distance(points.row(i), points.row(j));
        }
      }
      for (std::size_t q = 0; q < impl_->default_query.size(); ++q) {
        const double* row = dist.data() + impl_->default_query[q] * n;
        buf.clear();
        for (std::uint32_t c : train) buf.push_back({row[c], c});
        select_k(buf, k, std::span(impl_->default_neighbours).subspan(q * k, k));
      }
    } else {
      for (std::size_t q = 0; q < impl_->default_query.size(); ++q) {
        k_nearest(points.row(impl_->default_query[q]), points, train, k, buf,
                  std::span(impl_->default_neighbours).subspan(q * k, k));
      }
    }
  }
}

PointSetRegressor::~PointSetRegressor() = default;
PointSetRegressor::PointSetRegressor(PointSetRegressor&&) noexcept = default;
PointSetRegressor& PointSetRegressor::operator=(PointSetRegressor&&) noexcept = default;

const MethodSpec& PointSetRegressor::spec() const { return impl_->spec; }
const Sample& PointSetRegressor::points() const { return impl_->points; }

void PointSetRegressor::fit_predict(std::span<const std::uint32_t> train,
                                    std::span<const std::uint8_t> labels,
                                    std::span<const std::uint32_t> query, RngStream rng,
                                    std::span<double> out) const {
  if (train.empty()) throw InvalidInput("cannot fit a regression on zero points");
  switch (impl_->spec.method) {
    case Method::constant: {
      double sum = 0.0;
      for (auto i : train) sum += labels[i];
      const double pi1 = sum / static_cast<double>(train.size());
      std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(query.size()), pi1);
      return;
    }
    case Method::knn:
      impl_->knn_fit_predict(train, labels, query, out);
      return;
    case Method::random_forest: {
      auto trees = impl_->forest->grow(train, labels, impl_->spec.forest, rng);
      for (std::size_t q = 0; q < query.size(); ++q) {
        auto x = impl_->points.row(query[q]);
        double sum = 0.0;
        for (const auto& t : trees) sum += t.predict(x);
        out[q] = sum / static_cast<double>(trees.size());
      }
      return;
    }
  }
}

void PointSetRegressor::fit_predict_default(std::span<const std::uint8_t> labels,
                                            RngStream rng, std::span<double> out) const {
  if (impl_->spec.method != Method::knn) {
    fit_predict(impl_->default_train, labels, impl_->default_query, rng, out);
    return;
  }
  const std::size_t k = impl_->default_k;
  for (std::size_t q = 0; q < impl_->default_query.size(); ++q) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += labels[impl_->default_neighbours[q * k + j]];
    out[q] = sum / static_cast<double>(k);
  }
}

// ---------------------------------------------------------------------------

double cv_error_for_partition(const MethodSpec& spec, const LabeledDataset& data,
                              std::span<const std::size_t> fold_of, RngStream rng) {
  if (fold_of.size() != data.size()) throw InvalidInput("fold assignment length mismatch");
  std::map<std::size_t, std::vector<std::uint32_t>> folds;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    folds[fold_of[i]].push_back(static_cast<std::uint32_t>(i));
  }
  if (folds.size() < 2) throw InvalidInput("cross-validation needs at least 2 folds");

  PointSetRegressor reg(spec, data.points());
  std::vector<double> sq_error(data.size(), 0.0);
  std::vector<std::uint8_t> in_fold(data.size(), 0);
  std::vector<double> pred;
  for (const auto& [id, members] : folds) {
    std::fill(in_fold.begin(), in_fold.end(), 0);
    for (auto i : members) in_fold[i] = 1;
    std::vector<std::uint32_t> train;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!in_fold[i]) train.push_back(static_cast<std::uint32_t>(i));
    }
    pred.resize(members.size());
    reg.fit_predict(train, data.labels(), members, derive_substream(rng, members.front()), pred);
    for (std::size_t j = 0; j < members.size(); ++j) {
      const double e = static_cast<double>(data.labels()[members[j]]) - pred[j];
      sq_error[members[j]] = e * e;
    }
  }
  double sum = 0.0;
  for (double e : sq_error) sum += e;
  return sum / static_cast<double>(data.size());
}

double estimate_cv_error(const MethodSpec& spec, const LabeledDataset& data,
                         std::size_t folds, RngStream rng) {
  if (folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
  if (data.size() < folds) throw InvalidInput("fewer points than folds");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0u);
  Rng gen(derive_substream(rng, 0));
  gen.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> fold_of(data.size());
  for (std::size_t j = 0; j < order.size(); ++j) fold_of[order[j]] = j % folds;
  return cv_error_for_partition(spec, data, fold_of, derive_substream(rng, 1));
}

}  // namespace emuval::regress
