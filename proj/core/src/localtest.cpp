#include "emuval/errors.hpp"
#include "emuval/localtest.hpp"
#include "emuval/parallel.hpp"

#include <sstream>

namespace emuval::local {
namespace {

std::string theta_context(const Theta& theta) {
  std::ostringstream s;
  s << "at theta = (";
  for (std::size_t i = 0; i < theta.size(); ++i) s << (i ? ", " : "") << theta[i];
  s << ")";
  return s.str();
}

void fill_group_sizes(TestResult& r, const LabeledDataset& data) {
  r.n1 = data.count_ones();
  r.n0 = data.size() - r.n1;
  r.pi1 = data.pi1();
}

// Past any permutation index.
constexpr std::uint64_t kRowOrderStream = ~std::uint64_t{0};

}  // namespace

void LocalTestConfig::validate() const {
  if (m_permutations < 1) throw InvalidInput("need at least one permutation");
  if (n_sim0 < 1 || n_sim1 < 1) throw InvalidInput("draw counts must be at least 1");
  if (mc_gof && n_e < 1) throw InvalidInput("n_e must be at least 1");
}

TestResult permutation_test(const LabeledDataset& input, const LocalTestConfig& cfg, RngStream rng) {
  cfg.validate();
  if (!input.has_both_labels()) throw InvalidInput("both samples must be nonempty");
  const LabeledDataset data = shuffle_rows(input, derive_substream(rng, kRowOrderStream));
  const stats::BoundStatistic bound(cfg.statistic, data.points());
  const auto& labels = data.labels();

  TestResult r;
  r.seed = rng;
  r.m_used = cfg.m_permutations;
  fill_group_sizes(r, data);
  r.statistic = bound.evaluate(labels, derive_substream(rng, 0));
  r.null_draws.resize(cfg.m_permutations);
  parallel_for(cfg.m_permutations, [&](std::size_t i) {
    const RngStream sub = derive_substream(rng, i + 1);
    const auto permuted = permute_labels(labels, derive_substream(sub, 0));
    r.null_draws[i] = bound.evaluate(permuted, derive_substream(sub, 1));
  });
  r.p_value = resampling_p_value(r.statistic, r.null_draws);
  return r;
}

TestResult permutation_test(const Sample& s0, const Sample& s1, const LocalTestConfig& cfg,
                            RngStream rng) {
  return permutation_test(pool_and_label(s0, s1), cfg, rng);
}

TestResult mc_gof_test(const Sample& s, const Sampler& sampler, std::size_t n_e, std::size_t m,
                       const stats::TwoSampleStatistic& statistic, RngStream rng) {
  if (n_e < 1) throw InvalidInput("n_e must be at least 1");
  if (m < 1) throw InvalidInput("need at least one Monte-Carlo replicate");
  if (s.empty()) throw InvalidInput("empty sample");

  TestResult r;
  r.seed = rng;
  r.m_used = m;
  const LabeledDataset observed = pool_and_label(s, sampler(n_e, derive_substream(rng, 0)));
  fill_group_sizes(r, observed);
  r.statistic = stats::evaluate(statistic, observed, derive_substream(rng, 1));
  r.null_draws.resize(m);
  parallel_for(m, [&](std::size_t i) {
    const RngStream sub = derive_substream(rng, i + 2);
    const LabeledDataset replicate = pool_and_label(sampler(s.size(), derive_substream(sub, 0)),
                                                    sampler(n_e, derive_substream(sub, 1)));
    r.null_draws[i] = stats::evaluate(statistic, replicate, derive_substream(sub, 2));
  });
  r.p_value = resampling_p_value(r.statistic, r.null_draws);
  return r;
}

TestResult local_test(const Theta& theta0, const Sample& s0,
                      const models::ApproxLikelihood& emulator, const LocalTestConfig& cfg,
                      RngStream rng) {
  cfg.validate();
  if (!emulator.supports(theta0)) {
    throw InvalidInput(emulator.name() + " is not defined " + theta_context(theta0));
  }
  try {
    if (cfg.mc_gof) {
      const Sampler sampler = [&](std::size_t n, RngStream r) { return emulator.sample(theta0, n, r); };
      return mc_gof_test(s0, sampler, cfg.n_e, cfg.m_permutations, cfg.statistic,
                         derive_substream(rng, 2));
    }
    const Sample s1 = emulator.sample(theta0, cfg.n_sim1, derive_substream(rng, 1));
    return permutation_test(s0, s1, cfg, derive_substream(rng, 2));
  } catch (...) {
    rethrow_with_context("local test " + theta_context(theta0));
  }
}

TestResult local_test(const Theta& theta0, const Simulator& simulator,
                      const models::ApproxLikelihood& emulator, const LocalTestConfig& cfg,
                      RngStream rng) {
  cfg.validate();
  Sample s0;
  try {
    s0 = simulator(theta0, cfg.n_sim0, derive_substream(rng, 0));
  } catch (...) {
    rethrow_with_context("simulator " + theta_context(theta0));
  }
  return local_test(theta0, s0, emulator, cfg, rng);
}

}  // namespace emuval::local
