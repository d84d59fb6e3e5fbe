#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mzo/chains.hpp"
#include "mzo/common.hpp"
#include "mzo/estimators.hpp"
#include "mzo/problems.hpp"

namespace mzo {

/// Step size, smoothing and momentum parameters of the accelerated method.
/// beta, eta, theta, M, l are functions of (gamma, p, mu, B).
struct MomentumParams {
  double mu = 1.0;
  std::optional<double> L;  // smoothness used for the step-size cap (absent for from_raw)
  double gamma = 0.0;
  double t = 1e-5;
  std::uint64_t B = 1;
  double p = 1.0;
  double beta = 0.0;
  double eta = 0.0;
  double theta = 0.0;
  double M = 0.0;
  std::uint64_t l = 1;
  unsigned j_max = 0;
  std::uint64_t N = 0;
  Feedback feedback = Feedback::TwoPoint;

  /// Derived fields from (mu, gamma, p, B); rejects a degenerate theta
  /// denominator and checks that the last update is an affine combination.
  static MomentumParams from_raw(double mu, double gamma, double p, std::uint64_t B, double t,
                                 std::uint64_t N, Feedback feedback = Feedback::TwoPoint);

  MlmcConfig mlmc() const;
  SmoothingConfig smoothing() const { return {t, feedback}; }

  /// Recomputes the derived fields and compares them bit for bit.
  bool consistent() const;
};

/// Default p: B/(B+d) for smooth problems, 1 for non-smooth ones.
double default_momentum_p(std::uint64_t B, std::size_t dim, bool smooth);

/// Effective smoothness of the ball-smoothed f_t for a G-Lipschitz f: sqrt(d) G / t.
double smoothed_lipschitz(double G, std::size_t dim, double t);

/// Checks gamma in (0, 3/(4L)], with L = lips for smooth problems and
/// L = sqrt(d) G / t otherwise; p defaults per default_momentum_p.
MomentumParams derive_params(double mu, double lips, double gamma, std::optional<double> p,
                             std::uint64_t B, Feedback feedback, bool smooth, double t,
                             std::size_t dim, std::uint64_t N);

/// Fills `out` with an estimate of the gradient at x, drawing noise from the
/// chain and randomness from rng.
using Estimator = std::function<void(const Vector& x, ChainState& chain, Rng& rng, GradEstimate& out)>;

Estimator make_mlmc_estimator(const Oracle& oracle, const MlmcConfig& mlmc, const SmoothingConfig& cfg);
/// Exact gradient, zero oracle calls.
Estimator make_exact_estimator(std::shared_ptr<const Problem> problem);

struct IterateState {
  Vector x;
  Vector x_f;
  Vector x_g;  // x_g of the last step taken
  Vector scratch;
  std::size_t k = 0;
};

/// One iteration; advances state, chain and rng, writes the estimate to `g`.
/// Throws DivergenceError when an iterate is non-finite or leaves the
/// radius `guard_radius` (infinite disables the radius test).
void step(IterateState& state, const MomentumParams& params, const Estimator& estimator,
          ChainState& chain, Rng& rng, GradEstimate& g,
          double guard_radius = std::numeric_limits<double>::infinity());

enum class RunStatus { Completed, Diverged, BudgetExhausted, TargetReached };
std::string_view to_string(RunStatus status);

struct RunRow {
  std::size_t k = 0;
  double err_sq = 0.0;
  double lyapunov = 0.0;
  std::uint64_t calls = 0;
};

struct RunRecord {
  std::vector<RunRow> rows;
  std::vector<Vector> x, x_f, x_g;  // filled when RunOptions::keep_vectors
  MomentumParams params;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::Completed;

  const RunRow& last() const { return rows.back(); }
};

struct RunOptions {
  bool keep_vectors = false;
  double lyapunov_coef = 1.0;  // r = coef/mu (f(x_f) - f*) + |x - x*|^2
  double guard_factor = 1e6;   // divergence radius guard_factor (1 + |x^0|)
  std::optional<std::uint64_t> call_budget;
  std::optional<double> stop_below;  // stop once err_sq <= stop_below
  bool record_rows = true;           // false keeps only the first and last rows
};

/// A run that diverged; carries the rows recorded so far.
class RunDivergedError : public DivergenceError {
 public:
  RunDivergedError(std::size_t iteration, const std::string& what, RunRecord partial)
      : DivergenceError(iteration, what), partial_(std::move(partial)) {}
  const RunRecord& partial() const noexcept { return partial_; }

 private:
  RunRecord partial_;
};

/// Runs params.N iterations from x^0 = x_f^0 = x0. The chain is seeded with
/// derive_seed(seed, 1) and directions/levels with derive_seed(seed, 2).
/// With no estimator the MLMC estimator of params is used.
RunRecord run(const Oracle& oracle, const ChainParams& noise, const MomentumParams& params,
              const Vector& x0, std::uint64_t seed, const RunOptions& options = {},
              const Estimator& estimator = {});

struct TuneRequest {
  double mu = 1.0;
  std::optional<double> L;  // smooth case
  std::optional<double> G;  // non-smooth case
  std::size_t dim = 1;
  double tau = 1.0;
  double sigma_sq = 0.0;    // sigma_1^2 (one-point) or sigma_2^2 (two-point)
  std::uint64_t B = 1;
  Feedback feedback = Feedback::TwoPoint;
  bool smooth = true;
  double epsilon = 1e-3;
  double delta = 0.0;       // declared adversarial bound
  double c_t = 1.0;         // constant in the t rule
  std::optional<double> p;  // override of the default p
};

struct TuningResult {
  double gamma = 0.0;
  double t = 0.0;
  double p = 1.0;
  double L_eff = 0.0;
  double delta_max = 0.0;
  double predicted_oracle_calls = 0.0;  // all constants set to 1
};

/// Throws InfeasibleError when the declared delta exceeds delta_max.
TuningResult tune_theorem(const TuneRequest& req);

/// Predicted number of oracle calls for the request (constants 1).
double predicted_oracle_calls(const TuneRequest& req);

/// Step size Gamma(N) = min(ln max(2, a r0 N / b) / (a N), 1/u); returns
/// the step gamma = Gamma^2.
double restart_stepsize(double a, double b, double u, double r0, std::uint64_t N);

struct RestartRound {
  std::uint64_t N = 0;
  double gamma = 0.0;
  double err_sq = 0.0;
  std::uint64_t calls = 0;
};

struct RestartResult {
  RunRecord record;  // last round
  std::vector<RestartRound> rounds;
  std::uint64_t total_calls = 0;
  bool converged = false;
};

struct RestartOptions {
  std::uint64_t max_rounds = 24;
  std::optional<std::uint64_t> call_budget;
  RunOptions run;
};

/// Doubles N = 1, 2, 4, ... with step Gamma(N)^2, restarting from x0 each
/// round, until |x^N - x*|^2 <= epsilon or the budget runs out.
RestartResult run_with_restarts(const Oracle& oracle, const ChainParams& noise,
                                const TuneRequest& tuning, const Vector& x0, std::uint64_t seed,
                                const RestartOptions& options = {});

}  // namespace mzo
