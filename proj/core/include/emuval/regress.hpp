#pragma once

#include "emuval/rng.hpp"
#include "emuval/sample.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace emuval::regress {

enum class Method { knn, random_forest, constant };

struct ForestParams {
  std::size_t n_trees = 100;
  /// Features tried per split; 0 means ceil(sqrt(D)).
  std::size_t mtry = 0;
  std::size_t min_leaf = 5;
  bool bootstrap = true;

  std::size_t resolved_mtry(std::size_t dim) const;
  void validate(std::size_t dim) const;
};

/// Which regression engine estimates m(x) = P(Y = 1 | x), with its settings.
struct MethodSpec {
  Method method = Method::random_forest;
  /// Neighbours for knn; 0 means ceil(sqrt(n_train)).
  std::size_t k = 0;
  ForestParams forest;

  static MethodSpec knn(std::size_t k = 0);
  static MethodSpec random_forest(ForestParams params = {});
  static MethodSpec constant();

  std::size_t resolved_k(std::size_t n_train) const;
  std::string name() const;
};

Method parse_method(const std::string& name);

/// Flat binary regression tree. Internal nodes send x[feature] <= threshold left.
struct Tree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(std::span<const double> x) const;
  std::size_t leaf_count() const;
};

/// Fitted estimate of P(Y = 1 | x). Predictions lie in [0, 1].
class RegressionModel {
 public:
  struct Knn {
    Sample points;
    std::vector<std::uint8_t> labels;
    std::size_t k;
  };
  struct Forest {
    std::size_t dim;
    std::vector<Tree> trees;
  };
  struct Constant {
    std::size_t dim;
    double pi1;
  };

  explicit RegressionModel(Knn state) : state_(std::move(state)) {}
  explicit RegressionModel(Forest state) : state_(std::move(state)) {}
  explicit RegressionModel(Constant state) : state_(state) {}

  Method method() const;
  std::size_t dim() const;

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Sample& points) const;

  const std::variant<Knn, Forest, Constant>& state() const { return state_; }

 private:
  std::variant<Knn, Forest, Constant> state_;
};

RegressionModel fit_knn(const LabeledDataset& data, std::size_t k);
RegressionModel fit_random_forest(const LabeledDataset& data, const ForestParams& params,
                                  RngStream rng);
RegressionModel fit_constant(const LabeledDataset& data);
RegressionModel fit(const MethodSpec& spec, const LabeledDataset& data, RngStream rng);

/// K-fold cross-validated E[(Y - m̂(X))^2]. Folds come from a seeded shuffle.
double estimate_cv_error(const MethodSpec& spec, const LabeledDataset& data,
                         std::size_t folds, RngStream rng);

/// CV error for a given partition: fold_of[i] is point i's fold. The random
/// stream used for a fold depends only on its members, so renumbering folds
/// leaves the result unchanged.
double cv_error_for_partition(const MethodSpec& spec, const LabeledDataset& data,
                              std::span<const std::size_t> fold_of, RngStream rng);

/// Regression engine bound to a fixed point set, for repeated refits under
/// different labelings or subsets (permutation nulls, splits, CV). Points are
/// addressed by index. Thread-safe for concurrent fit_predict calls.
class PointSetRegressor {
 public:
  PointSetRegressor(const MethodSpec& spec, const Sample& points);
  /// Also precomputes knn neighbour lists for the (train, query) pair used by
  /// fit_predict_default().
  PointSetRegressor(const MethodSpec& spec, const Sample& points,
                    std::vector<std::uint32_t> default_train,
                    std::vector<std::uint32_t> default_query);
  ~PointSetRegressor();
  PointSetRegressor(PointSetRegressor&&) noexcept;
  PointSetRegressor& operator=(PointSetRegressor&&) noexcept;

  /// Fits on `train` using labels[i] for point i, writes m̂ at each `query`
  /// point into `out`.
  void fit_predict(std::span<const std::uint32_t> train, std::span<const std::uint8_t> labels,
                   std::span<const std::uint32_t> query, RngStream rng,
                   std::span<double> out) const;
  void fit_predict_default(std::span<const std::uint8_t> labels, RngStream rng,
                           std::span<double> out) const;

  const MethodSpec& spec() const;
  const Sample& points() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Indices 0..n-1.
std::vector<std::uint32_t> all_indices(std::size_t n);

}  // namespace emuval::regress
