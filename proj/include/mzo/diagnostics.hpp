#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mzo/chains.hpp"
#include "mzo/estimators.hpp"
#include "mzo/optimizer.hpp"
#include "mzo/problems.hpp"
#include "mzo/stats.hpp"

namespace mzo {

struct ReportRow {
  std::string label;
  double value = 0.0;
  double se = 0.0;
  double reference = std::numeric_limits<double>::quiet_NaN();  // closed form or bound
  bool ok = true;
};

struct MomentReport {
  std::string name;
  Vector mean;
  Vector second_moment;
  Vector standard_error;
  std::uint64_t reps = 0;
  std::map<std::string, double> fitted;
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;
  bool passed = true;

  void add_row(ReportRow row) {
    passed = passed && row.ok;
    rows.push_back(std::move(row));
  }
};

void print_report(std::ostream& os, const MomentReport& report);

/// |a - b| <= k * se (with a tiny absolute floor for exact quantities).
bool within_se(double a, double b, double se, double k = 3.0);

// ---- chains ----------------------------------------------------------------

/// Empirical per-coordinate mean/variance of Z_k from a stationary start at each k.
MomentReport check_chain_stationarity(const ChainParams& params, const std::vector<std::uint64_t>& ks,
                                      std::uint64_t reps, std::uint64_t seed);

/// Resample frequency over `steps` transitions vs 1/tau.
MomentReport check_resample_frequency(const ChainParams& params, std::uint64_t steps, std::uint64_t seed);

/// P(not coupled after k steps) vs (1 - 1/tau)^k at each k.
MomentReport check_coupling_decay(const ChainParams& params, const std::vector<std::uint64_t>& ks,
                                  std::uint64_t trials, std::uint64_t seed);

// ---- oracle noise ------------------------------------------------------------

struct MarkovVarianceConfig {
  std::vector<std::uint64_t> n_grid{1, 4, 16, 64};
  std::vector<std::uint64_t> tau_grid{1, 4, 16, 64};
  std::uint64_t n_fixed = 256;
  std::uint64_t reps = 1000;
  double noise_std = 1.0;
  double slope_tol_n = 0.15;
  double slope_tol_tau = 0.2;
};

/// Variance of the batched mean (1/n) sum F(x, Z_i) - f(x): log-log slope
/// against n at tau = 1 (expect -1) and against tau at n_fixed (expect +1).
MomentReport check_markov_variance(const Oracle& oracle, const Vector& x, const MarkovVarianceConfig& cfg,
                                   std::uint64_t seed);

// ---- estimators ----------------------------------------------------------------

/// E[e e^T] = I/d for sphere directions.
MomentReport check_sphere_moments(std::size_t d, std::uint64_t draws, std::uint64_t seed);

/// P(J = 1), P(J = 2), P(J = 3) vs 2^-j.
MomentReport check_level_frequencies(std::uint64_t draws, std::uint64_t seed);

/// Two-point (and one-point with identical noise) single estimates on
/// 1/2|x|^2 + <x, Z> against d <x + Z, e> e, relative error per t.
MomentReport check_quadratic_exactness(std::size_t d, const std::vector<double>& ts, std::uint64_t trials,
                                       std::uint64_t seed, double rel_tol = 1e-10);

/// Variance of the directional value of minibatch_estimate on an iid chain,
/// slope against n (expect -1).
MomentReport check_minibatch_variance(std::size_t d, const std::vector<std::uint64_t>& n_grid,
                                      std::uint64_t reps, std::uint64_t seed, double tol = 0.15);

/// E_e rd_estimate on the noiseless quadratic equals x.
MomentReport check_rd_mean(std::size_t d, std::uint64_t n, std::uint64_t reps, std::uint64_t seed);

// ---- smoothing -------------------------------------------------------------------

/// f_t(x) - f(x) by antithetic ball sampling, checked against the closed form
/// where one exists and against [0, L t^2] or [0, G t]; E_e[g] vs grad f_t.
MomentReport check_smoothing(const Problem& problem, const Vector& x, double t, std::uint64_t mc_samples,
                             std::uint64_t seed);

/// 0 <= f_t - f <= G t at `points` sampled points of the ball of radius 1 - t.
MomentReport check_smoothing_lipschitz(const Problem& problem, double t, std::uint64_t points,
                                       std::uint64_t mc_per_point, std::uint64_t seed);

/// E|r|^2 = d/(d+2) for the uniform ball.
MomentReport check_ball_moment(std::size_t d, std::uint64_t draws, std::uint64_t seed);

// ---- MLMC -------------------------------------------------------------------------

/// E|g_ml - grad f_t|^2 and |mean g_ml - grad f_t|^2 with a stationary chain.
MomentReport check_mlmc_moments(const Oracle& oracle, const ChainParams& noise, const Vector& x,
                                const MlmcConfig& mlmc, const SmoothingConfig& cfg, std::uint64_t reps,
                                std::uint64_t seed);

/// Empirical mean of g_ml vs the top-level rd estimate g_rd[2^j_max l], both
/// under a stationary chain, componentwise within 3 standard errors.
MomentReport check_mlmc_telescoping(const Oracle& oracle, const ChainParams& noise, const Vector& x,
                                    const MlmcConfig& mlmc, const SmoothingConfig& cfg, std::uint64_t reps,
                                    std::uint64_t seed);

/// Two-point quadratic started from the fixed noise vector z0 = c 1: the
/// exact conditional mean of g_ml is
///   x + c (mean_{i<=l} q^(i-1) + sum_j [A_j - A_(j-1)]),  q = 1 - 1/tau,
/// A_j = mean of q^(i-1) over the first 2^j l correction samples.
/// Sensitive to the 2^J weight.
MomentReport check_mlmc_conditional_mean(std::size_t d, std::uint64_t tau, double c, const MlmcConfig& mlmc,
                                         std::uint64_t reps, std::uint64_t seed);
Vector mlmc_conditional_mean(const Vector& x, double c, std::uint64_t tau, const MlmcConfig& mlmc);

/// Sample-index instrumentation: every draw's output equals sum_i w_i g_i
/// with the layout weights, J = j gives the level-j pattern, and the
/// observed pattern frequencies are reported.
MomentReport check_mlmc_layout(const MlmcConfig& mlmc, std::uint64_t draws, std::uint64_t seed);

/// Per-draw oracle calls vs 2 l (1 + j_max).
MomentReport check_mlmc_call_mean(const MlmcConfig& mlmc, std::uint64_t draws, std::uint64_t seed);

struct MlmcSweepConfig {
  std::size_t dim = 8;
  std::uint64_t tau = 8;
  double noise_std = 1.0;
  double t = 1.0;
  Feedback feedback = Feedback::TwoPoint;
  double M = 16.0;
  std::uint64_t B = 1;  // l = (floor(log2 M) + 1) B where the sweep does not set B itself
  std::uint64_t reps = 2000;
};

/// MLMC variance over B (fixed M, l = (floor(log2 M) + 1) B); slope vs B.
MomentReport check_mlmc_variance_vs_B(const MlmcSweepConfig& cfg, const std::vector<std::uint64_t>& B_grid,
                                      std::uint64_t seed, double tol = 0.2);

/// MLMC variance over d at a fixed large tau; slope vs d within [lo, hi].
/// The 1/l averaging only shows once l is well above tau, so cfg.B should
/// make l >> tau.
MomentReport check_mlmc_variance_vs_d(const MlmcSweepConfig& cfg, const std::vector<std::size_t>& d_grid,
                                      std::uint64_t seed, double lo = 0.5, double hi = 1.5);

/// Conditional squared bias from a fixed start decreases as M is quadrupled.
MomentReport check_mlmc_bias_vs_M(const MlmcSweepConfig& cfg, const std::vector<double>& M_grid, double c,
                                  std::uint64_t seed);

// ---- adversarial noise --------------------------------------------------------------

/// |g - g~| <= d Delta / t on `evaluations` draws with identical streams.
MomentReport check_adversarial_estimates(const Oracle& oracle, const ChainParams& noise,
                                         const AdversarialSpec& adversary, double t, Feedback feedback,
                                         std::uint64_t evaluations, std::uint64_t seed);

struct AdversarialRunConfig {
  MomentumParams params;
  ChainParams noise;
  Vector x0;
  std::uint64_t reps = 50;
  double ratio_limit = 2.0;
};

/// Mean final error for each delta in delta_grid (sign-hash perturbation);
/// passes when every delta <= delta_max stays within ratio_limit of delta = 0.
MomentReport check_adversarial_floor(const Oracle& oracle, const AdversarialRunConfig& cfg,
                                     const std::vector<double>& delta_grid, double delta_max,
                                     std::uint64_t seed);

// ---- optimizer -----------------------------------------------------------------------

/// E r^k non-increasing for k > k_from: the paired mean of r^k - r^(k-1)
/// over the records must not exceed 3 standard errors. Also counts the
/// pathwise increases.
MomentReport check_lyapunov_descent(const std::vector<RunRecord>& records, std::size_t k_from = 10);

// ---- oracle calls ---------------------------------------------------------------------

/// Per-iteration batch sizes and total calls S_N over the records; tails
/// P(S_N > alpha E S_N) for alpha in {1.5, 2, 3}.
MomentReport oracle_call_stats(const std::vector<RunRecord>& records);

// ---- suites ---------------------------------------------------------------------------

struct SuiteOptions {
  std::uint64_t seed = 20240601;
  double scale = 1.0;  // multiplies replication counts
  MlmcVariant mlmc_variant = MlmcVariant::Standard;
};

/// Suites: chains, estimators, smoothing, mlmc, optimizer, all.
/// Throws UsageError for unknown names.
std::vector<MomentReport> run_suite(const std::string& name, const SuiteOptions& options);
const std::vector<std::string>& suite_names();

}  // namespace mzo
