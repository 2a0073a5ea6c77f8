#pragma once

#include "emuval/models.hpp"
#include "emuval/sample.hpp"
#include "emuval/stats.hpp"

#include <functional>

namespace emuval::local {

/// Draws n points at θ from a simulator.
using Simulator = std::function<Sample(const Theta& theta, std::size_t n, RngStream rng)>;
/// Draws n points from a fixed distribution (an emulator at a fixed θ₀).
using Sampler = std::function<Sample(std::size_t n, RngStream rng)>;

struct LocalTestConfig {
  stats::TwoSampleStatistic statistic;
  std::size_t m_permutations = 99;
  std::size_t n_sim0 = 100;  // simulator draws
  std::size_t n_sim1 = 100;  // emulator draws
  /// Replace the permutation test by the Monte-Carlo goodness-of-fit test,
  /// with n_e emulator draws per replicate.
  bool mc_gof = false;
  std::size_t n_e = 500;

  void validate() const;
};

/// Permutation two-sample test of s0 against s1. Replicate m ≥ 1 shuffles
/// the labels with substream (m, 0) and refits with substream (m, 1); the
/// observed statistic uses substream 0.
TestResult permutation_test(const Sample& s0, const Sample& s1, const LocalTestConfig& cfg,
                            RngStream rng);
TestResult permutation_test(const LabeledDataset& data, const LocalTestConfig& cfg, RngStream rng);

/// Monte-Carlo goodness-of-fit test of `s` against the emulator `sampler`.
TestResult mc_gof_test(const Sample& s, const Sampler& sampler, std::size_t n_e, std::size_t m,
                       const stats::TwoSampleStatistic& statistic, RngStream rng);

/// Local test at θ₀: n_sim0 simulator draws against n_sim1 emulator draws.
TestResult local_test(const Theta& theta0, const Simulator& simulator,
                      const models::ApproxLikelihood& emulator, const LocalTestConfig& cfg,
                      RngStream rng);
/// Same, with the simulator draws supplied as a held-out ensemble.
TestResult local_test(const Theta& theta0, const Sample& s0,
                      const models::ApproxLikelihood& emulator, const LocalTestConfig& cfg,
                      RngStream rng);

}  // namespace emuval::local
