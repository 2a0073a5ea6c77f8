#include "emuval/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <cmath>
#include <random>

namespace emuval {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream derive_substream(const RngStream& parent, std::uint64_t index) {
  const std::uint64_t child =
      mix64(mix64(parent.stream_id + kGolden) ^ mix64(index * 0xD6E8FEB86659FD93ULL + 0x632BE59BD9B4E019ULL));
  return RngStream{parent.seed, child};
}

Rng::Rng(const RngStream& stream)
    : stream_(stream),
      key0_(mix64(stream.seed ^ mix64(stream.stream_id + 0x2545F4914F6CDD1DULL))),
      key1_(mix64(stream.stream_id ^ mix64(stream.seed + kGolden))) {}

Rng::result_type Rng::operator()() {
  const std::uint64_t x = mix64(key0_ + (++counter_) * kGolden);
  return mix64(x ^ key1_);
}

double Rng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
  return (static_cast<double>((*this)() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = (*this)();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
  boost::random::normal_distribution<double> dist;
  return dist(*this);
}

double Rng::log_gamma_variate(double shape) {
  // Marsaglia-Tsang squeeze/rejection on log scale; shapes below 1 use
  // G(a) = G(a + 1) * U^(1/a).
  const double shift = shape < 1.0 ? std::log(uniform_open()) / shape : 0.0;
  const double d = (shape < 1.0 ? shape + 1.0 : shape) - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    const double x = normal();
    const double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v) + shift;
    const double log_v = std::log(v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + log_v)) return std::log(d) + log_v + shift;
  }
}

double Rng::gamma(double shape) { return std::exp(log_gamma_variate(shape)); }

double Rng::beta(double a, double b) {
  const double la = log_gamma_variate(a);
  const double lb = log_gamma_variate(b);
  return 1.0 / (1.0 + std::exp(lb - la));
}

std::pair<double, double> Rng::log_beta(double a, double b) {
  const double la = log_gamma_variate(a);
  const double lb = log_gamma_variate(b);
  const double hi = std::max(la, lb);
  const double log_sum = hi + std::log1p(std::exp(std::min(la, lb) - hi));
  return {la - log_sum, lb - log_sum};
}

std::int64_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  boost::random::poisson_distribution<std::int64_t, double> dist(mean);
  return dist(*this);
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace emuval
