#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "mzo/common.hpp"

namespace mzo {

enum class ChainKind { LazyGaussian, Iid };

/// Lazily resampled Gaussian noise: with probability 1/tau_hold the state is
/// redrawn from N(0, noise_std^2 I), otherwise it is held.
struct ChainParams {
  ChainKind kind = ChainKind::LazyGaussian;
  std::size_t dim = 1;
  std::uint64_t tau_hold = 1;
  double noise_std = 0.0;

  static ChainParams lazy(std::size_t dim, std::uint64_t tau_hold, double noise_std) {
    return {ChainKind::LazyGaussian, dim, tau_hold, noise_std};
  }
  static ChainParams iid(std::size_t dim, double noise_std) {
    return {ChainKind::Iid, dim, 1, noise_std};
  }

  /// Throws ConfigError when dim = 0, tau_hold = 0, noise_std < 0, or an Iid
  /// chain declares tau_hold != 1.
  void validate() const;

  double resample_probability() const noexcept {
    return kind == ChainKind::Iid ? 1.0 : 1.0 / static_cast<double>(tau_hold);
  }

  /// Mixing time in the sense of the (1/4)^floor(k/tau) TV decay, i.e.
  /// ceil(tau_hold * ln 4). Theorem-driven tuning consumes this value.
  std::uint64_t assumption_mixing_time() const;
};

/// A point on the noise chain. Resample decisions and resampled values come
/// from separate substreams of the seed so that coupled chains can share them.
class ChainState {
 public:
  const Vector& current() const noexcept { return current_; }
  std::uint64_t step() const noexcept { return step_; }
  std::uint64_t resamples() const noexcept { return resamples_; }
  const ChainParams& params() const noexcept { return params_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Number of F evaluations charged against this chain by oracles.
  std::uint64_t evaluations() const noexcept { return evaluations_; }
  void charge_evaluations(std::uint64_t n) noexcept { evaluations_ += n; }

  /// In-place transition; returns true when the state was resampled.
  bool advance();

  friend ChainState new_chain(const ChainParams& params, std::uint64_t seed);
  friend ChainState new_chain_from(const ChainParams& params, const Vector& start,
                                   std::uint64_t seed);

 private:
  ChainState(const ChainParams& params, std::uint64_t seed);
  void draw_fresh();

  ChainParams params_;
  Vector current_;
  std::uint64_t step_ = 0;
  std::uint64_t resamples_ = 0;
  std::uint64_t evaluations_ = 0;
  std::uint64_t seed_ = 0;
  Rng decision_rng_;
  Rng value_rng_;
  std::bernoulli_distribution resample_;
  boost::random::normal_distribution<double> normal_;
};

/// Stationary start: the initial vector is drawn from N(0, s^2 I).
ChainState new_chain(const ChainParams& params, std::uint64_t seed);

/// Arbitrary deterministic start, for diagnostics that hold under any
/// initial distribution.
ChainState new_chain_from(const ChainParams& params, const Vector& start, std::uint64_t seed);

/// Pure transition: returns the advanced copy.
ChainState step_chain(ChainState state);

struct MixingReport {
  std::uint64_t steps = 0;          // smallest k with (1 - 1/tau)^k <= tolerance
  double predicted_uncoupled = 0.0; // (1 - 1/tau)^steps
  double empirical_uncoupled = 0.0; // fraction of coupled pairs still apart after `steps`
  double standard_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t assumption_mixing_time = 0;

  /// Empirical and predicted uncoupled fractions agree within 3 standard errors.
  bool consistent() const;
};

/// Smallest k at which the resample coupling bound drops below `tolerance`,
/// cross-checked by simulating `trials` chain pairs started from different
/// vectors with shared substreams.
MixingReport empirical_mixing_time(const ChainParams& params, double tolerance = 0.25,
                                   std::uint64_t trials = 1000, std::uint64_t seed = 0);

}  // namespace mzo
