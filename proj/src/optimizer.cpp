#include "mzo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mzo {

MomentumParams MomentumParams::from_raw(double mu, double gamma, double p, std::uint64_t B, double t,
                                        std::uint64_t N, Feedback feedback) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("params: mu must be positive");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("params: gamma must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("params: p must lie in (0, 1]");
  if (B == 0) throw ConfigError("params: B must be positive");
  if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("params: t must be positive");

  MomentumParams m;
  m.mu = mu;
  m.gamma = gamma;
  m.t = t;
  m.B = B;
  m.p = p;
  m.N = N;
  m.feedback = feedback;
  m.beta = std::sqrt(4.0 * p * p * mu * gamma / 3.0);
  m.eta = std::sqrt(3.0 / (mu * gamma));
  const double denom = m.beta * p / m.eta - 1.0;
  if (std::abs(denom) < 1e-12)
    throw ConfigError("params: degenerate theta (beta p / eta = 1)");
  m.theta = (p / m.eta - 1.0) / denom;
  const double affine = m.eta + (p - m.eta) + (1.0 - p) * (1.0 - m.beta) + (1.0 - p) * m.beta;
  if (std::abs(affine - 1.0) > 1e-12) throw ConfigError("params: x-update coefficients do not sum to 1");
  const MlmcConfig mlmc = MlmcConfig::derive(B, p, m.beta);
  m.M = mlmc.M;
  m.l = mlmc.l;
  m.j_max = mlmc.j_max;
  return m;
}

MlmcConfig MomentumParams::mlmc() const {
  MlmcConfig c = MlmcConfig::derive(B, p, beta);
  if (c.M != M || c.l != l) throw ConfigError("params: M or l do not match 1/p + 2/beta");
  return c;
}

bool MomentumParams::consistent() const {
  const MomentumParams r = from_raw(mu, gamma, p, B, t, N, feedback);
  return r.beta == beta && r.eta == eta && r.theta == theta && r.M == M && r.l == l && r.j_max == j_max;
}

double default_momentum_p(std::uint64_t B, std::size_t dim, bool smooth) {
  if (!smooth) return 1.0;
  return static_cast<double>(B) / static_cast<double>(B + dim);
}

double smoothed_lipschitz(double G, std::size_t dim, double t) {
  return std::sqrt(static_cast<double>(dim)) * G / t;
}

MomentumParams derive_params(double mu, double lips, double gamma, std::optional<double> p,
                             std::uint64_t B, Feedback feedback, bool smooth, double t,
                             std::size_t dim, std::uint64_t N) {
  if (!(lips > 0.0) || !std::isfinite(lips)) throw ConfigError("params: L (or G) must be positive");
  if (dim == 0) throw ConfigError("params: dim must be positive");
  if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("params: t must be positive");
  const double L = smooth ? lips : smoothed_lipschitz(lips, dim, t);
  if (smooth && mu > L) throw ConfigError("params: mu exceeds L");
  const double cap = 3.0 / (4.0 * L);
  if (!(gamma > 0.0) || gamma > cap * (1.0 + 1e-12))
    throw ConfigError("params: gamma = " + std::to_string(gamma) + " outside (0, 3/(4L)] = (0, " +
                      std::to_string(cap) + "]");
  MomentumParams m =
      MomentumParams::from_raw(mu, gamma, p.value_or(default_momentum_p(B, dim, smooth)), B, t, N, feedback);
  m.L = L;
  return m;
}

Estimator make_mlmc_estimator(const Oracle& oracle, const MlmcConfig& mlmc, const SmoothingConfig& cfg) {
  mlmc.validate();
  cfg.validate();
  auto ws = std::make_shared<MlmcWorkspace>();
  return [oracle, mlmc, cfg, ws](const Vector& x, ChainState& chain, Rng& rng, GradEstimate& out) {
    mlmc_estimate_into(oracle, chain, x, mlmc, cfg, rng, *ws, out);
  };
}

Estimator make_exact_estimator(std::shared_ptr<const Problem> problem) {
  return [problem](const Vector& x, ChainState&, Rng&, GradEstimate& out) {
    out.vector = problem->gradient(x);
    out.oracle_calls = 0;
    out.level_j = 0;
  };
}

void step(IterateState& s, const MomentumParams& prm, const Estimator& estimator, ChainState& chain,
          Rng& rng, GradEstimate& g, double guard_radius) {
  const double th = prm.theta;
  s.x_g = th * s.x_f + (1.0 - th) * s.x;
  estimator(s.x_g, chain, rng, g);
  if (g.vector.size() != s.x.size()) throw UsageError("step: estimate has the wrong dimension");
  s.scratch = s.x_g - (prm.p * prm.gamma) * g.vector;
  const double p = prm.p, eta = prm.eta, beta = prm.beta;
  s.x = eta * s.scratch + (p - eta) * s.x_f + ((1.0 - p) * (1.0 - beta)) * s.x + ((1.0 - p) * beta) * s.x_g;
  s.x_f.swap(s.scratch);
  ++s.k;
  if (!s.x.allFinite() || !s.x_f.allFinite())
    throw DivergenceError(s.k, "iterate became non-finite at iteration " + std::to_string(s.k));
  if (s.x.norm() > guard_radius)
    throw DivergenceError(s.k, "iterate left the divergence radius at iteration " + std::to_string(s.k));
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::BudgetExhausted: return "budget_exhausted";
    case RunStatus::TargetReached: return "target_reached";
  }
  return "?";
}

RunRecord run(const Oracle& oracle, const ChainParams& noise, const MomentumParams& params,
              const Vector& x0, std::uint64_t seed, const RunOptions& options,
              const Estimator& estimator) {
  const Problem& problem = oracle.problem();
  problem.check_dim(x0);
  if (noise.dim != problem.noise_dim())
    throw UsageError("run: chain dimension " + std::to_string(noise.dim) +
                     " does not match noise dimension " + std::to_string(problem.noise_dim()));
  const Estimator est = estimator ? estimator : make_mlmc_estimator(oracle, params.mlmc(), params.smoothing());

  ChainState chain = new_chain(noise, derive_seed(seed, 1));
  Rng rng = make_rng(derive_seed(seed, 2));

  const Vector& xs = problem.minimizer();
  const double f_star = problem.min_value();
  const double coef = options.lyapunov_coef / problem.mu();
  auto make_row = [&](std::size_t k, const IterateState& s, std::uint64_t calls) {
    RunRow row;
    row.k = k;
    row.err_sq = (s.x - xs).squaredNorm();
    row.lyapunov = coef * (problem.value(s.x_f) - f_star) + row.err_sq;
    row.calls = calls;
    return row;
  };

  RunRecord rec;
  rec.params = params;
  rec.seed = seed;
  IterateState s;
  s.x = x0;
  s.x_f = x0;
  s.x_g = x0;
  rec.rows.push_back(make_row(0, s, 0));
  if (options.keep_vectors) {
    rec.x.push_back(s.x);
    rec.x_f.push_back(s.x_f);
  }

  const double guard = options.guard_factor * (1.0 + x0.norm());
  GradEstimate g;
  std::uint64_t calls = 0;
  for (std::uint64_t k = 0; k < params.N; ++k) {
    try {
      step(s, params, est, chain, rng, g, guard);
    } catch (const DivergenceError& e) {
      rec.status = RunStatus::Diverged;
      if (options.keep_vectors) rec.x_g.push_back(s.x_g);
      throw RunDivergedError(e.iteration(), e.what(), std::move(rec));
    }
    calls += g.oracle_calls;
    if (options.keep_vectors) {
      rec.x.push_back(s.x);
      rec.x_f.push_back(s.x_f);
      rec.x_g.push_back(s.x_g);
    }
    const bool last = k + 1 == params.N;
    const bool over_budget = options.call_budget && calls >= *options.call_budget;
    if (options.record_rows || last || over_budget || options.stop_below) {
      RunRow row = make_row(s.k, s, calls);
      const bool reached = options.stop_below && row.err_sq <= *options.stop_below;
      if (options.record_rows || last || over_budget || reached) rec.rows.push_back(row);
      if (reached) {
        rec.status = RunStatus::TargetReached;
        break;
      }
    }
    if (over_budget && !last) {
      rec.status = RunStatus::BudgetExhausted;
      break;
    }
  }
  if (chain.evaluations() != calls)
    throw std::logic_error("run: oracle-call accounting does not match chain evaluations");
  return rec;
}

double predicted_oracle_calls(const TuneRequest& r) {
  const double d = static_cast<double>(r.dim), B = static_cast<double>(r.B);
  const double eps = r.epsilon, mu = r.mu, tau = r.tau, s2 = r.sigma_sq;
  const double lg = std::max(1.0, std::log(1.0 / eps));
  if (r.smooth) {
    const double L = r.L.value_or(mu);
    const double det = std::max(1.0, d / B) * std::sqrt(L / mu) * lg;
    const double sto = r.feedback == Feedback::TwoPoint
                           ? (d + tau) * s2 / (B * mu * mu * eps)
                           : L * d * (d + tau) * s2 / (B * std::pow(mu, 3) * eps * eps);
    return B * (det + sto);
  }
  const double G = r.G.value_or(1.0);
  const double det = std::sqrt(std::sqrt(d) * G * G / (mu * mu * eps)) * lg;
  const double sto = r.feedback == Feedback::TwoPoint
                         ? (d + tau) * G * G / (B * mu * mu * eps)
                         : d * (d + tau) * s2 * G * G / (B * std::pow(mu, 4) * std::pow(eps, 3)) +
                               d * G * G / (B * mu * mu * eps);
  return B * (det + sto);
}

TuningResult tune_theorem(const TuneRequest& r) {
  if (!(r.epsilon > 0.0) || !std::isfinite(r.epsilon)) throw ConfigError("tune: epsilon must be positive");
  if (!(r.mu > 0.0)) throw ConfigError("tune: mu must be positive");
  if (r.dim == 0) throw ConfigError("tune: dim must be positive");
  if (r.B == 0) throw ConfigError("tune: B must be positive");
  if (!(r.delta >= 0.0)) throw ConfigError("tune: delta must be nonnegative");
  if (!(r.c_t > 0.0)) throw ConfigError("tune: c_t must be positive");
  const double d = static_cast<double>(r.dim);
  TuningResult out;
  double floor_eps = 0.0;
  if (r.smooth) {
    if (!r.L || !(*r.L > 0.0)) throw ConfigError("tune: the smooth rule needs L");
    if (r.mu > *r.L) throw ConfigError("tune: mu exceeds L");
    const double L = *r.L;
    out.t = r.c_t * std::sqrt(r.mu * r.epsilon / L);
    out.L_eff = L;
    out.delta_max = r.epsilon * std::pow(r.mu, 1.5) / (d * std::sqrt(L));
    floor_eps = d * r.delta * std::sqrt(L) / std::pow(r.mu, 1.5);
  } else {
    if (!r.G || !(*r.G > 0.0)) throw ConfigError("tune: the non-smooth rule needs G");
    const double G = *r.G;
    out.t = r.c_t * r.mu * r.epsilon / G;
    out.L_eff = smoothed_lipschitz(G, r.dim, out.t);
    out.delta_max = std::pow(r.epsilon, 1.5) * r.mu * r.mu / (d * G);
    floor_eps = std::pow(d * r.delta * G / (r.mu * r.mu), 2.0 / 3.0);
  }
  out.gamma = 3.0 / (4.0 * out.L_eff);
  out.p = r.p.value_or(default_momentum_p(r.B, r.dim, r.smooth));
  if (!(out.p > 0.0 && out.p <= 1.0)) throw ConfigError("tune: p must lie in (0, 1]");
  if (r.delta > out.delta_max)
    throw InfeasibleError("declared delta = " + std::to_string(r.delta) + " exceeds delta_max = " +
                          std::to_string(out.delta_max) + "; accuracy below " + std::to_string(floor_eps) +
                          " is not reachable under this adversarial bound");
  out.predicted_oracle_calls = predicted_oracle_calls(r);
  return out;
}

double restart_stepsize(double a, double b, double u, double r0, std::uint64_t N) {
  if (!(a > 0.0) || !(u > 0.0) || N == 0) throw ConfigError("restart: need a > 0, u > 0, N >= 1");
  if (!(b > 0.0)) return 1.0 / (u * u);
  const double n = static_cast<double>(N);
  const double Gamma = std::min(std::log(std::max(2.0, a * r0 * n / b)) / (a * n), 1.0 / u);
  return Gamma * Gamma;
}

RestartResult run_with_restarts(const Oracle& oracle, const ChainParams& noise,
                                const TuneRequest& req, const Vector& x0, std::uint64_t seed,
                                const RestartOptions& options) {
  const Problem& problem = oracle.problem();
  problem.check_dim(x0);
  const TuningResult tuned = tune_theorem(req);
  const double d = static_cast<double>(req.dim), B = static_cast<double>(req.B);
  const double mu = req.mu, p = tuned.p, t = tuned.t, s2 = req.sigma_sq, tau = req.tau;
  const double a = p * std::sqrt(mu);
  const double u = std::sqrt(4.0 * tuned.L_eff / 3.0);
  const double noise_part = req.feedback == Feedback::TwoPoint ? s2 * (d + tau) / B
                                                               : s2 * d * (d + tau) / (t * t * B);
  const double bias_part = req.smooth ? t * t * tuned.L_eff * tuned.L_eff * d * d / B
                                      : req.G.value_or(0.0) * req.G.value_or(0.0) * d / B;
  const double b = p / std::pow(mu, 1.5) * (noise_part + bias_part);
  const double r0 = (problem.value(x0) - problem.min_value()) / mu + (x0 - problem.minimizer()).squaredNorm();
  const double lips = req.smooth ? *req.L : *req.G;

  RestartResult res;
  for (std::uint64_t round = 0; round < options.max_rounds; ++round) {
    const std::uint64_t N = std::uint64_t{1} << round;
    const double gamma = restart_stepsize(a, b, u, r0, N);
    const MomentumParams prm = derive_params(mu, lips, gamma, p, req.B, req.feedback, req.smooth, t, req.dim, N);
    RestartRound info;
    info.N = N;
    info.gamma = gamma;
    RunOptions ro = options.run;
    if (options.call_budget) ro.call_budget = *options.call_budget - std::min(*options.call_budget, res.total_calls);
    try {
      res.record = run(oracle, noise, prm, x0, derive_seed(seed, 100 + round), ro);
      info.err_sq = res.record.last().err_sq;
      info.calls = res.record.last().calls;
    } catch (const RunDivergedError& e) {
      res.record = e.partial();
      info.err_sq = std::numeric_limits<double>::infinity();
      info.calls = res.record.last().calls;
    }
    res.total_calls += info.calls;
    res.rounds.push_back(info);
    if (info.err_sq <= req.epsilon) {
      res.converged = true;
      break;
    }
    if (options.call_budget && res.total_calls >= *options.call_budget) break;
  }
  if (!res.converged) res.record.status = RunStatus::BudgetExhausted;
  return res;
}

}  // namespace mzo
