#include "emuval/stats.hpp"

#include "emuval/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <variant>

namespace emuval::stats {
namespace {

using regress::PointSetRegressor;

void require_both_labels(std::span<const std::uint8_t> labels, std::size_t& n0,
                         std::size_t& n1) {
  n1 = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  n0 = labels.size() - n1;
  if (n0 == 0 || n1 == 0) {
    throw InvalidInput("two-sample statistic needs both labels present");
  }
}

std::vector<double> pairwise_distances(const Sample& points, bool squared) {
  const std::size_t n = points.size();
  std::vector<double> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    auto a = points.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      auto b = points.row(j);
      double sum = 0.0;
      for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        sum += diff * diff;
      }
      out.push_back(squared ? sum : std::sqrt(sum));
    }
  }
  return out;
}

double median_of_nonzero(std::vector<double> values) {
  values.erase(std::remove(values.begin(), values.end(), 0.0), values.end());
  if (values.empty()) return 1.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Sums of a symmetric pair quantity within group 0, within group 1 and
/// across groups, over unordered pairs i < j.
struct PairSums {
  double s00 = 0.0;
  double s11 = 0.0;
  double s01 = 0.0;
};

PairSums pair_sums(const std::vector<double>& packed, std::span<const std::uint8_t> labels) {
  PairSums s;
  const std::size_t n = labels.size();
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto li = labels[i];
    double same = 0.0;
    double cross = 0.0;
    for (std::size_t j = i + 1; j < n; ++j, ++k) {
      if (labels[j] == li) {
        same += packed[k];
      } else {
        cross += packed[k];
      }
    }
    (li == 0 ? s.s00 : s.s11) += same;
    s.s01 += cross;
  }
  return s;
}

struct RegressionFull {
  PointSetRegressor regressor;
};
struct RegressionSplit {
  PointSetRegressor regressor;
};
struct C2st {
  PointSetRegressor regressor;
};
struct Mmd {
  std::vector<double> kernel;  // packed upper triangle
};
struct Energy {
  std::vector<double> distance;  // packed upper triangle
};

void split_halves(std::size_t n, RngStream rng, std::vector<std::uint32_t>& first,
                  std::vector<std::uint32_t>& second) {
  auto order = regress::all_indices(n);
  Rng gen(rng);
  gen.shuffle(std::span<std::uint32_t>(order));
  const std::size_t half = n / 2;
  first.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  second.assign(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
}

}  // namespace

TwoSampleStatistic TwoSampleStatistic::regression(regress::MethodSpec method, Mode mode) {
  TwoSampleStatistic s;
  s.kind = Kind::regression;
  s.method = method;
  s.mode = mode;
  return s;
}

TwoSampleStatistic TwoSampleStatistic::mmd() {
  TwoSampleStatistic s;
  s.kind = Kind::mmd;
  return s;
}

TwoSampleStatistic TwoSampleStatistic::energy() {
  TwoSampleStatistic s;
  s.kind = Kind::energy;
  return s;
}

TwoSampleStatistic TwoSampleStatistic::c2st(regress::MethodSpec classifier) {
  TwoSampleStatistic s;
  s.kind = Kind::c2st;
  s.method = classifier;
  return s;
}

std::string TwoSampleStatistic::name() const {
  switch (kind) {
    case Kind::regression:
      return "regression-" + method.name() + (mode == Mode::split ? "-split" : "");
    case Kind::mmd: return "mmd";
    case Kind::energy: return "energy";
    case Kind::c2st: return "c2st-" + method.name();
  }
  return "unknown";
}

Kind parse_kind(const std::string& name) {
  if (name == "regression") return Kind::regression;
  if (name == "mmd") return Kind::mmd;
  if (name == "energy") return Kind::energy;
  if (name == "c2st") return Kind::c2st;
  throw InvalidInput("unknown statistic '" + name + "'");
}

Mode parse_mode(const std::string& name) {
  if (name == "full") return Mode::full;
  if (name == "split") return Mode::split;
  throw InvalidInput("unknown regression mode '" + name + "'");
}

double median_heuristic_bandwidth(const Sample& points) {
  return median_of_nonzero(pairwise_distances(points, false));
}

struct BoundStatistic::Impl {
  std::size_t n = 0;
  std::variant<RegressionFull, RegressionSplit, C2st, Mmd, Energy> engine;
};

namespace {

std::variant<RegressionFull, RegressionSplit, C2st, Mmd, Energy> make_engine(
    const TwoSampleStatistic& st, const Sample& points) {
  const std::size_t n = points.size();
  switch (st.kind) {
    case Kind::regression:
      if (st.mode == Mode::full) {
        return RegressionFull{
            PointSetRegressor(st.method, points, regress::all_indices(n), regress::all_indices(n))};
      }
      if (n < 4) throw InvalidInput("split-mode regression statistic needs n >= 4");
      return RegressionSplit{PointSetRegressor(st.method, points)};
    case Kind::c2st:
      if (n < 4) throw InvalidInput("classifier two-sample statistic needs n >= 4");
      return C2st{PointSetRegressor(st.method, points)};
    case Kind::mmd: {
      auto sq = pairwise_distances(points, true);
      std::vector<double> dist(sq.size());
      std::transform(sq.begin(), sq.end(), dist.begin(), [](double v) { return std::sqrt(v); });
      const double bw = median_of_nonzero(std::move(dist));
      const double scale = 1.0 / (2.0 * bw * bw);
      for (double& v : sq) v = std::exp(-v * scale);
      return Mmd{std::move(sq)};
    }
    case Kind::energy:
      return Energy{pairwise_distances(points, false)};
  }
  throw InvalidInput("unknown statistic");
}

}  // namespace

BoundStatistic::BoundStatistic(const TwoSampleStatistic& statistic, const Sample& points)
    : impl_(std::make_unique<Impl>(Impl{points.size(), make_engine(statistic, points)})) {}

BoundStatistic::~BoundStatistic() = default;
BoundStatistic::BoundStatistic(BoundStatistic&&) noexcept = default;
BoundStatistic& BoundStatistic::operator=(BoundStatistic&&) noexcept = default;

std::size_t BoundStatistic::size() const { return impl_->n; }

double BoundStatistic::evaluate(std::span<const std::uint8_t> labels, RngStream rng) const {
  const std::size_t n = impl_->n;
  if (labels.size() != n) throw InvalidInput("label vector length mismatch");
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  require_both_labels(labels, n0, n1);

  return std::visit(
      [&](const auto& e) -> double {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, RegressionFull>) {
          const double pi1 = static_cast<double>(n1) / static_cast<double>(n);
          std::vector<double> pred(n);
          e.regressor.fit_predict_default(labels, rng, pred);
          double sum = 0.0;
          for (double m : pred) sum += (m - pi1) * (m - pi1);
          return sum / static_cast<double>(n);
        } else if constexpr (std::is_same_v<T, RegressionSplit>) {
          std::vector<std::uint32_t> fit_half;
          std::vector<std::uint32_t> eval_half;
          split_halves(n, derive_substream(rng, 0), fit_half, eval_half);
          double ones = 0.0;
          for (auto i : fit_half) ones += labels[i];
          const double pi1 = ones / static_cast<double>(fit_half.size());
          std::vector<double> pred(eval_half.size());
          e.regressor.fit_predict(fit_half, labels, eval_half, derive_substream(rng, 1), pred);
          double sum = 0.0;
          for (double m : pred) sum += (m - pi1) * (m - pi1);
          return sum / static_cast<double>(eval_half.size());
        } else if constexpr (std::is_same_v<T, C2st>) {
          std::vector<std::uint32_t> train;
          std::vector<std::uint32_t> test;
          split_halves(n, derive_substream(rng, 0), train, test);
          std::vector<double> pred(test.size());
          e.regressor.fit_predict(train, labels, test, derive_substream(rng, 1), pred);
          std::size_t correct = 0;
          for (std::size_t j = 0; j < test.size(); ++j) {
            const std::uint8_t cls = pred[j] > 0.5 ? 1 : 0;
            if (cls == labels[test[j]]) ++correct;
          }
          return static_cast<double>(correct) / static_cast<double>(test.size());
        } else if constexpr (std::is_same_v<T, Mmd>) {
          const PairSums s = pair_sums(e.kernel, labels);
          const double a = static_cast<double>(n0);
          const double b = static_cast<double>(n1);
          const double v = (a + 2.0 * s.s00) / (a * a) + (b + 2.0 * s.s11) / (b * b) -
                           2.0 * s.s01 / (a * b);
          return std::max(0.0, v);
        } else {
          const PairSums s = pair_sums(e.distance, labels);
          const double a = static_cast<double>(n0);
          const double b = static_cast<double>(n1);
          const double v = 2.0 * s.s01 / (a * b) - 2.0 * s.s00 / (a * a) - 2.0 * s.s11 / (b * b);
          return std::max(0.0, v);
        }
      },
      impl_->engine);
}

double evaluate(const TwoSampleStatistic& statistic, const LabeledDataset& data, RngStream rng) {
  if (!data.has_both_labels()) throw InvalidInput("two-sample statistic needs both labels present");
  return BoundStatistic(statistic, data.points()).evaluate(data.labels(), rng);
}

double regression_statistic(const LabeledDataset& data, const regress::MethodSpec& method,
                            Mode mode, RngStream rng) {
  return evaluate(TwoSampleStatistic::regression(method, mode), data, rng);
}

double mmd_statistic(const LabeledDataset& data) {
  return evaluate(TwoSampleStatistic::mmd(), data, RngStream{});
}

double energy_statistic(const LabeledDataset& data) {
  return evaluate(TwoSampleStatistic::energy(), data, RngStream{});
}

double c2st_statistic(const LabeledDataset& data, const regress::MethodSpec& classifier,
                      RngStream rng) {
  return evaluate(TwoSampleStatistic::c2st(classifier), data, rng);
}

namespace {

std::vector<double> sorted_unit_values(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("uniformity statistic needs at least one value");
  std::vector<double> v(values.begin(), values.end());
  for (double x : v) {
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("uniformity statistic values must lie in [0, 1]");
  }
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

double ks_uniformity(std::span<const double> values) {
  const auto v = sorted_unit_values(values);
  const double b = static_cast<double>(v.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double above = static_cast<double>(i + 1) / b - v[i];
    const double below = v[i] - static_cast<double>(i) / b;
    sup = std::max({sup, above, below});
  }
  return sup;
}

double cvm_uniformity(std::span<const double> values) {
  const auto v = sorted_unit_values(values);
  const double b = static_cast<double>(v.size());
  // F̂ equals i/B on [v_(i), v_(i+1)), with v_(0) = 0 and v_(B+1) = 1.
  auto piece = [](double level, double lo, double hi) {
    const double a = level - lo;
    const double c = level - hi;
    return (a * a * a - c * c * c) / 3.0;
  };
  double total = piece(0.0, 0.0, v.front());
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    total += piece(static_cast<double>(i + 1) / b, v[i], v[i + 1]);
  }
  total += piece(1.0, v.back(), 1.0);
  return total;
}

}  // namespace emuval::stats
