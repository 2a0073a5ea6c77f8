#include "emuval/csv.hpp"
#include "emuval/diagnose.hpp"
#include "emuval/errors.hpp"
#include "emuval/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace emuval::diagnose {

std::vector<PointDiagnosis> feature_space_test(const LabeledDataset& input,
                                               const Sample& test_points,
                                               const regress::MethodSpec& method, std::size_t m,
                                               double alpha, RngStream rng) {
  if (!input.has_both_labels()) throw InvalidInput("training set needs both labels");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  if (m < 1) throw InvalidInput("need at least one permutation");
  if (test_points.empty()) throw InvalidInput("no test points");
  if (test_points.dim() != input.dim()) throw InvalidInput("test points differ in dimension from training set");
  const LabeledDataset train = shuffle_rows(input, derive_substream(rng, ~std::uint64_t{0}));

  const std::size_t n_train = train.size();
  const std::size_t n_test = test_points.size();
  Sample pooled = train.points();
  pooled.reserve(n_train + n_test);
  for (std::size_t j = 0; j < n_test; ++j) pooled.push_back(test_points.row(j));
  std::vector<std::uint32_t> train_idx(n_train);
  std::vector<std::uint32_t> query_idx(n_test);
  std::iota(train_idx.begin(), train_idx.end(), 0U);
  std::iota(query_idx.begin(), query_idx.end(), static_cast<std::uint32_t>(n_train));
  const regress::PointSetRegressor regressor(method, pooled, train_idx, query_idx);

  std::vector<std::uint8_t> labels(n_train + n_test, 0);
  std::copy(train.labels().begin(), train.labels().end(), labels.begin());
  const double pi1 = train.pi1();

  std::vector<double> observed(n_test);
  regressor.fit_predict_default(labels, derive_substream(rng, 0), observed);

  std::vector<std::vector<double>> null_dev(m, std::vector<double>(n_test));
  parallel_for(m, [&](std::size_t k) {
    const RngStream sub = derive_substream(rng, k + 1);
    std::vector<std::uint8_t> permuted = labels;
    const auto shuffled = permute_labels(train.labels(), derive_substream(sub, 0));
    std::copy(shuffled.begin(), shuffled.end(), permuted.begin());
    auto& out = null_dev[k];
    regressor.fit_predict_default(permuted, derive_substream(sub, 1), out);
    for (double& v : out) v = (v - pi1) * (v - pi1);
  });

  std::vector<PointDiagnosis> rows(n_test);
  std::vector<double> pvals(n_test);
  for (std::size_t j = 0; j < n_test; ++j) {
    auto& row = rows[j];
    const auto x = test_points.row(j);
    row.x.assign(x.begin(), x.end());
    row.m_hat = observed[j];
    row.deviation = (observed[j] - pi1) * (observed[j] - pi1);
    row.direction = observed[j] > pi1 ? 1 : (observed[j] < pi1 ? -1 : 0);
    std::size_t exceed = 0;
    for (std::size_t k = 0; k < m; ++k) exceed += null_dev[k][j] > row.deviation ? 1 : 0;
    row.p_value = static_cast<double>(1 + exceed) / static_cast<double>(m + 1);
    pvals[j] = row.p_value;
  }
  const auto flags = benjamini_hochberg(pvals, alpha);
  for (std::size_t j = 0; j < n_test; ++j) rows[j].flagged = flags[j] && rows[j].deviation > 0.0;
  return rows;
}

std::vector<bool> benjamini_hochberg(std::span<const double> pvals, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  for (double p : pvals) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("p-values must lie in [0, 1]");
  }
  const std::size_t n = pvals.size();
  std::vector<double> sorted(pvals.begin(), pvals.end());
  std::sort(sorted.begin(), sorted.end());
  double cutoff = -1.0;
  for (std::size_t r = n; r >= 1; --r) {
    if (sorted[r - 1] <= static_cast<double>(r) * alpha / static_cast<double>(n)) {
      cutoff = sorted[r - 1];
      break;
    }
  }
  std::vector<bool> flags(n);
  for (std::size_t i = 0; i < n; ++i) flags[i] = pvals[i] <= cutoff;
  return flags;
}

std::vector<DependencePoint> partial_dependence(const regress::RegressionModel& model,
                                                const Sample& data, std::size_t d,
                                                std::span<const double> grid) {
  if (grid.empty()) throw InvalidInput("partial dependence grid is empty");
  if (data.empty()) throw InvalidInput("no data for partial dependence");
  if (d >= data.dim()) throw InvalidInput("feature index out of range");
  if (data.dim() != model.dim()) throw InvalidInput("data dimension does not match the model");
  std::vector<DependencePoint> out;
  std::vector<double> x(data.dim());
  for (double v : grid) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto row = data.row(i);
      std::copy(row.begin(), row.end(), x.begin());
      x[d] = v;
      total += model.predict(x);
    }
    out.push_back({v, total / static_cast<double>(data.size())});
  }
  return out;
}

HoldoutSplit holdout_split(const LabeledDataset& data, double train_fraction, RngStream rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("training fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::uint8_t y : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels()[i] == y) members.push_back(i);
    }
    if (members.empty()) continue;
    Rng(derive_substream(rng, y)).shuffle(std::span<std::size_t>(members));
    auto n_fit = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    n_fit = std::clamp<std::size_t>(n_fit, 1, members.size());
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_fit));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_fit), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  if (test_idx.empty()) throw InvalidInput("holdout split leaves no test points");
  auto subset_or_throw = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::uint8_t> labels;
    for (std::size_t i : idx) labels.push_back(data.labels()[i]);
    return LabeledDataset(data.points().subset(idx), std::move(labels));
  };
  return {subset_or_throw(train_idx), subset_or_throw(test_idx)};
}

void write_diagnosis_csv(std::ostream& out, std::span<const PointDiagnosis> rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().x.size();
  for (std::size_t d = 0; d < dim; ++d) out << 'x' << d << ',';
  out << "m_hat,deviation,direction,p_value,flagged\n";
  for (const auto& r : rows) {
    for (double v : r.x) out << format_double(v) << ',';
    out << format_double(r.m_hat) << ',' << format_double(r.deviation) << ',' << r.direction << ','
        << format_double(r.p_value) << ',' << (r.flagged ? 1 : 0) << '\n';
  }
}

}  // namespace emuval::diagnose
