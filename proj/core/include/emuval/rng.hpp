#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace emuval {

/// Identifies a reproducible stream of random numbers. A value type: copy it
/// into tasks and split it with derive_substream().
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Child stream `index` of `parent`. Pure function of (seed, stream_id, index).
RngStream derive_substream(const RngStream& parent, std::uint64_t index);

/// Counter-based generator: the k-th output is a hash of (seed, stream, k), so
/// draws never depend on scheduling or on the platform's standard library.
/// Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(const RngStream& stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  const RngStream& stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// log of a Gamma(shape, 1) variate; finite even when the variate itself
  /// would underflow (tiny shapes).
  double log_gamma_variate(double shape);
  double gamma(double shape);
  double beta(double a, double b);
  /// (log x, log(1 - x)) for x ~ Beta(a, b), exact even where x itself
  /// rounds to 0 or 1. Consumes the same draws as beta().
  std::pair<double, double> log_beta(double a, double b);
  std::int64_t poisson(double mean);
  bool bernoulli(double p) { return uniform() < p; }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  RngStream stream_;
  std::uint64_t key0_;
  std::uint64_t key1_;
  std::uint64_t counter_ = 0;
};

/// Draws a fresh seed from OS entropy.
std::uint64_t entropy_seed();

}  // namespace emuval
