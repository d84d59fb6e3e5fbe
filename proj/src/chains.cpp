#include "mzo/chains.hpp"

#include <cmath>
#include <string>

namespace mzo {

namespace {
constexpr std::uint64_t kDecisionStream = 1;
constexpr std::uint64_t kValueStream = 2;
}  // namespace

void ChainParams::validate() const {
  if (dim == 0) throw ConfigError("chain: dim must be positive");
  if (tau_hold == 0) throw ConfigError("chain: tau_hold must be >= 1");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw ConfigError("chain: noise_std must be finite and nonnegative");
  if (kind == ChainKind::Iid && tau_hold != 1)
    throw ConfigError("chain: an iid chain has tau_hold = 1, got " + std::to_string(tau_hold));
}

std::uint64_t ChainParams::assumption_mixing_time() const {
  return static_cast<std::uint64_t>(
      std::ceil(static_cast<double>(kind == ChainKind::Iid ? 1 : tau_hold) * std::log(4.0)));
}

ChainState::ChainState(const ChainParams& params, std::uint64_t seed)
    : params_(params),
      current_(Vector::Zero(static_cast<Eigen::Index>(params.dim))),
      seed_(seed),
      decision_rng_(make_rng(seed, kDecisionStream)),
      value_rng_(make_rng(seed, kValueStream)),
      resample_(params.resample_probability()),
      normal_(0.0, 1.0) {}

void ChainState::draw_fresh() {
  const double s = params_.noise_std;
  if (s == 0.0) {
    current_.setZero();
    return;
  }
  for (Eigen::Index i = 0; i < current_.size(); ++i) current_[i] = s * normal_(value_rng_);
}

bool ChainState::advance() {
  ++step_;
  const bool fresh = params_.kind == ChainKind::Iid || resample_(decision_rng_);
  if (fresh) {
    ++resamples_;
    draw_fresh();
  }
  return fresh;
}

ChainState new_chain(const ChainParams& params, std::uint64_t seed) {
  params.validate();
  ChainState state(params, seed);
  state.draw_fresh();
  return state;
}

ChainState new_chain_from(const ChainParams& params, const Vector& start, std::uint64_t seed) {
  params.validate();
  if (static_cast<std::size_t>(start.size()) != params.dim)
    throw UsageError("chain: start vector has length " + std::to_string(start.size()) +
                     ", expected " + std::to_string(params.dim));
  ChainState state(params, seed);
  state.current_ = start;
  return state;
}

ChainState step_chain(ChainState state) {
  state.advance();
  return state;
}

bool MixingReport::consistent() const {
  return std::abs(empirical_uncoupled - predicted_uncoupled) <= 3.0 * standard_error + 1e-12;
}

MixingReport empirical_mixing_time(const ChainParams& params, double tolerance,
                                   std::uint64_t trials, std::uint64_t seed) {
  params.validate();
  if (trials == 0) throw ConfigError("mixing time: trials must be positive");
  if (!(tolerance > 0.0 && tolerance < 1.0))
    throw ConfigError("mixing time: tolerance must lie in (0, 1)");

  MixingReport report;
  report.trials = trials;
  report.assumption_mixing_time = params.assumption_mixing_time();

  const double q = 1.0 - params.resample_probability();
  if (q <= 0.0) {
    report.steps = 1;
  } else {
    report.steps = static_cast<std::uint64_t>(std::ceil(std::log(1.0 / tolerance) / -std::log(q)));
    // guard the ceil against rounding right at an integer boundary
    while (report.steps > 1 && std::pow(q, static_cast<double>(report.steps - 1)) <= tolerance)
      --report.steps;
    while (std::pow(q, static_cast<double>(report.steps)) > tolerance) ++report.steps;
  }
  report.predicted_uncoupled = std::pow(q, static_cast<double>(report.steps));

  // Two starts far apart; identical seeds share both substreams, so the pair
  // merges at the first resample event.
  const Vector high = Vector::Constant(static_cast<Eigen::Index>(params.dim), 1.0 + 10.0 * params.noise_std);
  const Vector low = -high;
  std::uint64_t apart = 0;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    const std::uint64_t pair_seed = derive_seed(seed, trial);
    ChainState a = new_chain_from(params, high, pair_seed);
    ChainState b = new_chain_from(params, low, pair_seed);
    for (std::uint64_t k = 0; k < report.steps; ++k) {
      a.advance();
      b.advance();
      if (a.resamples() > 0) break;
    }
    if (a.current() != b.current()) ++apart;
  }
  const double n = static_cast<double>(trials);
  report.empirical_uncoupled = static_cast<double>(apart) / n;
  report.standard_error =
      std::sqrt(std::max(report.predicted_uncoupled * (1.0 - report.predicted_uncoupled), 1e-300) / n);
  return report;
}

}  // namespace mzo
