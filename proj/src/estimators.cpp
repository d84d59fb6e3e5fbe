#include "mzo/estimators.hpp"

#include <cmath>
#include <string>

namespace mzo {

void SmoothingConfig::validate() const {
  if (!(t > 0.0) || !std::isfinite(t)) throw UsageError("smoothing: t must be positive and finite");
}

unsigned floor_log2(double M) {
  if (!(M >= 1.0)) throw ConfigError("floor_log2: M must be >= 1");
  int exp = 0;
  std::frexp(M, &exp);  // M = m 2^exp, m in [0.5, 1)
  return static_cast<unsigned>(exp - 1);
}

MlmcConfig MlmcConfig::derive(std::uint64_t B, double p, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("mlmc: beta must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("mlmc: p must lie in (0, 1]");
  if (B == 0) throw ConfigError("mlmc: B must be positive");
  MlmcConfig c;
  c.B = B;
  c.p = p;
  c.M = 1.0 / p + 2.0 / beta;
  c.j_max = floor_log2(c.M);
  c.l = (static_cast<std::uint64_t>(c.j_max) + 1) * B;
  c.validate();
  return c;
}

MlmcConfig MlmcConfig::custom(std::uint64_t l, double M, std::uint64_t B) {
  MlmcConfig c;
  c.B = B;
  c.l = l;
  c.M = M;
  c.j_max = floor_log2(M);
  c.validate();
  return c;
}

void MlmcConfig::validate() const {
  if (B == 0) throw ConfigError("mlmc: B must be positive");
  if (l == 0) throw ConfigError("mlmc: l must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("mlmc: p must lie in (0, 1]");
  if (!(M >= 1.0) || !std::isfinite(M)) throw ConfigError("mlmc: M must be finite and >= 1");
  if (j_max != floor_log2(M)) throw ConfigError("mlmc: j_max must equal floor(log2 M)");
  if (j_max > 62 || l > (std::uint64_t{1} << (62 - j_max)))
    throw ConfigError("mlmc: 2^j_max * l overflows the sample counter");
}

double MlmcConfig::expected_oracle_calls() const {
  return 2.0 * static_cast<double>(l) * (1.0 + static_cast<double>(j_max));
}

std::vector<double> mlmc_sample_weights(std::uint64_t l, unsigned level_j, bool corrected,
                                        MlmcVariant variant) {
  std::vector<double> w(l, 1.0 / static_cast<double>(l));
  if (!corrected) return w;
  const std::uint64_t n = (std::uint64_t{1} << level_j) * l;
  const std::uint64_t half = n / 2;
  const double scale = variant == MlmcVariant::Standard ? std::ldexp(1.0, static_cast<int>(level_j)) : 1.0;
  const double all = 1.0 / static_cast<double>(n);
  const double first = 1.0 / static_cast<double>(half);
  w.reserve(l + n);
  for (std::uint64_t i = 0; i < half; ++i) w.push_back(scale * (all - first));
  for (std::uint64_t i = half; i < n; ++i) w.push_back(scale * all);
  return w;
}

long double directional_value(const Oracle& oracle, ChainState& chain, const Vector& x,
                              const Vector& e, const SmoothingConfig& cfg, std::uint64_t& calls) {
  const OracleReply r = oracle.difference_pair(chain, x, e, cfg.t, cfg.feedback);
  calls += r.evaluations;
  // Narrower replies are subtracted in long double; only quad replies need quad arithmetic.
  const long double diff = oracle.precision() == Precision::Quad
                               ? static_cast<long double>(r.plus - r.minus)
                               : static_cast<long double>(r.plus) - static_cast<long double>(r.minus);
  return diff * static_cast<long double>(x.size()) / (2.0L * static_cast<long double>(cfg.t));
}

namespace {

void check_unit(const Vector& e) {
  if (std::abs(e.norm() - 1.0) > 1e-9) throw UsageError("direction must have unit norm");
}

// Adds n random-direction single estimates to sum.
void accumulate_rd(const Oracle& oracle, ChainState& chain, const Vector& x, std::uint64_t n,
                   const SmoothingConfig& cfg, Rng& rng, Vector& e, Vector& sum,
                   std::uint64_t& calls, MlmcProbe* probe) {
  const auto d = static_cast<std::size_t>(x.size());
  for (std::uint64_t i = 0; i < n; ++i) {
    sample_sphere_into(e, d, rng);
    const double c = static_cast<double>(directional_value(oracle, chain, x, e, cfg, calls));
    sum.noalias() += c * e;
    if (probe) {
      if (probe->singles.size() < probe->max_recorded) probe->singles.push_back(c * e);
      ++probe->samples;
    }
  }
}

}  // namespace

GradEstimate single_estimate(const Oracle& oracle, ChainState& chain, const Vector& x,
                             const Vector& e, const SmoothingConfig& cfg) {
  cfg.validate();
  check_unit(e);
  GradEstimate out;
  const long double c = directional_value(oracle, chain, x, e, cfg, out.oracle_calls);
  out.vector = static_cast<double>(c) * e;
  return out;
}

GradEstimate minibatch_estimate(const Oracle& oracle, ChainState& chain, const Vector& x,
                                const Vector& e, std::uint64_t n, const SmoothingConfig& cfg) {
  cfg.validate();
  check_unit(e);
  if (n == 0) throw UsageError("minibatch_estimate: n must be >= 1");
  GradEstimate out;
  long double acc = 0.0L;
  for (std::uint64_t i = 0; i < n; ++i) acc += directional_value(oracle, chain, x, e, cfg, out.oracle_calls);
  out.vector = static_cast<double>(acc / static_cast<long double>(n)) * e;
  return out;
}

GradEstimate rd_estimate(const Oracle& oracle, ChainState& chain, const Vector& x,
                         std::uint64_t n, const SmoothingConfig& cfg, Rng& rng) {
  cfg.validate();
  if (n == 0) throw UsageError("rd_estimate: n must be >= 1");
  oracle.problem().check_dim(x);
  GradEstimate out;
  Vector e;
  out.vector = Vector::Zero(x.size());
  accumulate_rd(oracle, chain, x, n, cfg, rng, e, out.vector, out.oracle_calls, nullptr);
  out.vector /= static_cast<double>(n);
  return out;
}

void mlmc_estimate_into(const Oracle& oracle, ChainState& chain, const Vector& x,
                        const MlmcConfig& mlmc, const SmoothingConfig& cfg, Rng& rng,
                        MlmcWorkspace& ws, GradEstimate& out, MlmcProbe* probe) {
  cfg.validate();
  oracle.problem().check_dim(x);
  const Eigen::Index d = x.size();
  ws.sum_base.setZero(d);
  out.oracle_calls = 0;

  const unsigned J = sample_level(rng);
  const bool corrected = J <= mlmc.j_max;
  out.level_j = J;
  if (probe) {
    probe->level_j = J;
    probe->corrected = corrected;
    probe->samples = 0;
    probe->singles.clear();
  }

  accumulate_rd(oracle, chain, x, mlmc.l, cfg, rng, ws.e, ws.sum_base, out.oracle_calls, probe);
  out.vector.resize(d);
  out.vector = ws.sum_base / static_cast<double>(mlmc.l);
  if (!corrected) return;

  const std::uint64_t n = (std::uint64_t{1} << J) * mlmc.l;
  const std::uint64_t half = n / 2;
  ws.sum_first.setZero(d);
  ws.sum_second.setZero(d);
  accumulate_rd(oracle, chain, x, half, cfg, rng, ws.e, ws.sum_first, out.oracle_calls, probe);
  accumulate_rd(oracle, chain, x, n - half, cfg, rng, ws.e, ws.sum_second, out.oracle_calls, probe);

  const double weight = mlmc.variant == MlmcVariant::Standard ? std::ldexp(1.0, static_cast<int>(J)) : 1.0;
  // 2^J (mean over the block - mean over its first half)
  out.vector.noalias() += weight * ((ws.sum_first + ws.sum_second) / static_cast<double>(n) -
                                    ws.sum_first / static_cast<double>(half));
}

GradEstimate mlmc_estimate(const Oracle& oracle, ChainState& chain, const Vector& x,
                           const MlmcConfig& mlmc, const SmoothingConfig& cfg, Rng& rng,
                           MlmcProbe* probe) {
  MlmcWorkspace ws;
  GradEstimate out;
  mlmc_estimate_into(oracle, chain, x, mlmc, cfg, rng, ws, out, probe);
  return out;
}

}  // namespace mzo
