#pragma once

#include <cstdint>
#include <vector>

#include "mzo/chains.hpp"
#include "mzo/common.hpp"
#include "mzo/problems.hpp"
#include "mzo/sampling.hpp"

namespace mzo {

struct SmoothingConfig {
  double t = 1e-5;
  Feedback feedback = Feedback::TwoPoint;

  /// Throws UsageError unless t is positive and finite.
  void validate() const;
};

struct GradEstimate {
  Vector vector;
  std::uint64_t oracle_calls = 0;
  unsigned level_j = 0;  // sampled J for MLMC, else 0
};

/// Largest j with 2^j <= M (M >= 1).
unsigned floor_log2(double M);

enum class MlmcVariant {
  Standard,
  UnweightedCorrection,  // fault injection: drops the 2^J weight
};

struct MlmcConfig {
  std::uint64_t B = 1;
  double p = 1.0;
  double M = 1.0;
  std::uint64_t l = 1;
  unsigned j_max = 0;
  MlmcVariant variant = MlmcVariant::Standard;

  /// M = 1/p + 2/beta, l = (floor(log2 M) + 1) B.
  static MlmcConfig derive(std::uint64_t B, double p, double beta);
  /// Free choice of (l, M, B), e.g. l = 1 with a huge M. p is left at 1.
  static MlmcConfig custom(std::uint64_t l, double M, std::uint64_t B);

  void validate() const;

  /// E[oracle calls per draw] = 2 l (1 + sum_{j<=j_max} 2^-j 2^j) = 2 l (1 + j_max).
  double expected_oracle_calls() const;
};

/// Per-draw instrumentation of mlmc_estimate.
struct MlmcProbe {
  std::size_t max_recorded = 16;  // keep the first single estimates only
  unsigned level_j = 0;
  bool corrected = false;
  std::uint64_t samples = 0;
  std::vector<Vector> singles;  // g_1, g_2, ... in sample order
};

/// Weight of every sample g_i (i = 1..l + [corrected] 2^J l) in the MLMC output.
std::vector<double> mlmc_sample_weights(std::uint64_t l, unsigned level_j, bool corrected,
                                        MlmcVariant variant = MlmcVariant::Standard);

/// d * (F(x + t e) - F(x - t e)) / (2t) for one +/- pair; adds the pair's
/// evaluations to `calls`.
long double directional_value(const Oracle& oracle, ChainState& chain, const Vector& x,
                              const Vector& e, const SmoothingConfig& cfg, std::uint64_t& calls);

/// The chain is advanced in place: one step per two-point pair, two per
/// one-point pair. Directions and levels come from `rng`.
GradEstimate single_estimate(const Oracle& oracle, ChainState& chain, const Vector& x,
                             const Vector& e, const SmoothingConfig& cfg);

/// Average of n single estimates along the shared direction e.
GradEstimate minibatch_estimate(const Oracle& oracle, ChainState& chain, const Vector& x,
                                const Vector& e, std::uint64_t n, const SmoothingConfig& cfg);

/// Average of n single estimates with a fresh direction per sample.
GradEstimate rd_estimate(const Oracle& oracle, ChainState& chain, const Vector& x,
                         std::uint64_t n, const SmoothingConfig& cfg, Rng& rng);

/// Reusable buffers so that repeated MLMC draws do not allocate.
struct MlmcWorkspace {
  Vector e, sum_base, sum_first, sum_second;
};

/// Base block of l samples, then (if 2^J <= M) a correction block of 2^J l
/// samples whose first half gives the coarse average.
void mlmc_estimate_into(const Oracle& oracle, ChainState& chain, const Vector& x,
                        const MlmcConfig& mlmc, const SmoothingConfig& cfg, Rng& rng,
                        MlmcWorkspace& ws, GradEstimate& out, MlmcProbe* probe = nullptr);

GradEstimate mlmc_estimate(const Oracle& oracle, ChainState& chain, const Vector& x,
                           const MlmcConfig& mlmc, const SmoothingConfig& cfg, Rng& rng,
                           MlmcProbe* probe = nullptr);

}  // namespace mzo
