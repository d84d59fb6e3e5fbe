#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mzo/chains.hpp"
#include "mzo/common.hpp"

namespace mzo {

enum class ProblemKind { QuadraticMarkov, DiagQuadratic, NonsmoothL1, HardOnePoint, HardTwoPoint };
enum class NoiseRegime { UniformBound, SecondMoment };
enum class Feedback { OnePoint, TwoPoint };
enum class QueryMode { OnePointPlus, OnePointMinus, TwoPointPair };
/// Arithmetic used to form query points and evaluate F.
enum class Precision { Double, Extended, Quad };

std::string_view to_string(ProblemKind kind);
std::string_view to_string(Feedback feedback);
std::string_view to_string(Precision precision);
Precision parse_precision(std::string_view name);
ProblemKind parse_problem_kind(std::string_view name);
Feedback parse_feedback(std::string_view name);

/// The point base + step * dir, with coordinates formed in extended precision
/// so that tiny finite-difference shifts are not rounded away.
class PointView {
 public:
  explicit PointView(const Vector& base) : base_(&base) {}
  PointView(const Vector& base, const Vector& dir, double step)
      : base_(&base), dir_(&dir), step_(step) {}

  Eigen::Index size() const noexcept { return base_->size(); }
  long double operator[](Eigen::Index i) const noexcept { return at<long double>(i); }
  template <class T>
  T at(Eigen::Index i) const noexcept {
    const T b = static_cast<T>((*base_)[i]);
    return dir_ ? b + static_cast<T>(step_) * static_cast<T>((*dir_)[i]) : b;
  }
  /// Coordinates rounded to double.
  Vector materialize() const;

  /// The point as a lazy double-precision Eigen expression.
  auto array() const {
    return base_->array() + (dir_ ? step_ : 0.0) * (dir_ ? *dir_ : *base_).array();
  }

 private:
  const Vector* base_;
  const Vector* dir_ = nullptr;
  double step_ = 0.0;
};

/// Construction parameters. Unused fields are ignored by kinds that do not
/// need them; absent optionals take the kind's documented default.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::QuadraticMarkov;
  std::size_t dim = 1;
  double mu = 1.0;
  std::optional<double> lips_grad;  // L; DiagQuadratic eigenvalues span [mu, L]
  double l1_weight = 0.1;           // c in NonsmoothL1
  std::vector<int> signs;           // omega / v; empty means all +1
  std::optional<double> delta;      // hard-instance scale
  std::optional<double> noise_var;  // hard-instance stationary variance s^2
  double sigma_sq = 1.0;            // sigma_1^2 (one-point) or sigma_2^2 (two-point) for hard defaults
  std::uint64_t horizon = 1000;     // N used in hard-instance defaults
  std::uint64_t tau = 1;            // tau used in hard-instance defaults
};

/// s(x) of the one-point hard instance: 2 delta x on [0, delta],
/// 3 delta^2 - (x - 2 delta)^2 on [delta, 2 delta], 3 delta^2 beyond; odd in x.
long double hard_instance_s(long double delta, long double xi);
long double hard_instance_s_prime(long double delta, long double xi);

/// Objective f(x) = E_pi F(x, Z) together with its noisy realization F.
class Problem {
 public:
  virtual ~Problem() = default;

  ProblemKind kind() const noexcept { return spec_.kind; }
  const ProblemSpec& spec() const noexcept { return spec_; }
  std::size_t dim() const noexcept { return spec_.dim; }
  std::size_t noise_dim() const noexcept { return spec_.dim; }
  double mu() const noexcept { return mu_; }
  std::optional<double> lips_grad() const noexcept { return lips_grad_; }
  std::optional<double> lips_f() const noexcept { return lips_f_; }
  const Vector& minimizer() const noexcept { return minimizer_; }
  double min_value() const;

  /// Stationary noise standard deviation the instance is built for, if any.
  virtual std::optional<double> preferred_noise_std() const { return std::nullopt; }

  virtual long double value(const PointView& x) const = 0;
  virtual long double sample(const PointView& x, const Vector& z) const = 0;
  virtual double sample_double(const PointView& x, const Vector& z) const = 0;
  virtual Quad sample_quad(const PointView& x, const Vector& z) const = 0;
  /// Gradient (a subgradient for non-smooth kinds).
  virtual Vector gradient(const Vector& x) const = 0;
  /// Closed-form gradient of the ball-smoothed f_t where one exists.
  virtual std::optional<Vector> smoothed_gradient(const Vector& x, double t) const;
  /// [min, max] over the instance family at x; a single problem returns [f, f].
  virtual std::pair<long double, long double> family_range(const PointView& x) const;

  double value(const Vector& x) const { return static_cast<double>(value(PointView(x))); }

  void check_dim(const Vector& x) const;

 protected:
  explicit Problem(ProblemSpec spec) : spec_(std::move(spec)) {}

  ProblemSpec spec_;
  double mu_ = 1.0;
  std::optional<double> lips_grad_;
  std::optional<double> lips_f_;
  Vector minimizer_;
};

/// Throws ConfigError on invalid specs (dim = 0, mu <= 0, mu > L, ...).
std::shared_ptr<const Problem> make_problem(const ProblemSpec& spec);

/// Deterministic bounded perturbation added to every oracle output.
struct AdversarialSpec {
  enum class Shape { Zero, Constant, SignHash };
  Shape shape = Shape::Zero;
  double delta_bound = 0.0;

  static AdversarialSpec none() { return {}; }
  static AdversarialSpec constant(double delta) { return {Shape::Constant, delta}; }
  static AdversarialSpec sign_hash(double delta) { return {Shape::SignHash, delta}; }

  bool active() const noexcept { return shape != Shape::Zero && delta_bound != 0.0; }
  double operator()(const PointView& x) const;
};

/// F_hat = max(f_min - t_clip*sigma1, min(F, f_max + t_clip*sigma1)).
double clip_oracle(double reply, double f_min, double f_max, double t_clip, double sigma1);
long double clip_oracle(long double reply, long double f_min, long double f_max, double t_clip,
                        double sigma1);

struct ClipSpec {
  double t_clip = 2.0;
  double sigma1 = 1.0;
};

struct OracleReply {
  Quad plus = 0;   // F at x + t e (one-point minus queries leave this 0)
  Quad minus = 0;  // F at x - t e
  std::uint64_t evaluations = 0;
  std::uint64_t chain_steps = 0;
};

/// Zero-order oracle over a problem, optionally perturbed by an adversarial
/// term and clipped to a band around the family's range.
class Oracle {
 public:
  explicit Oracle(std::shared_ptr<const Problem> problem, AdversarialSpec adversary = {},
                  std::optional<ClipSpec> clip = std::nullopt, Precision precision = Precision::Extended);

  const Problem& problem() const noexcept { return *problem_; }
  std::shared_ptr<const Problem> problem_ptr() const noexcept { return problem_; }
  const AdversarialSpec& adversary() const noexcept { return adversary_; }
  const std::optional<ClipSpec>& clip() const noexcept { return clip_; }
  NoiseRegime noise_regime() const noexcept {
    return clip_ ? NoiseRegime::UniformBound : NoiseRegime::SecondMoment;
  }

  Precision precision() const noexcept { return precision_; }

  Oracle with_adversary(AdversarialSpec adversary) const {
    return Oracle(problem_, adversary, clip_, precision_);
  }
  Oracle with_precision(Precision precision) const { return Oracle(problem_, adversary_, clip_, precision); }

  /// One evaluation of the (wrapped) F at a fixed noise value.
  Quad evaluate(const PointView& x, const Vector& z) const;

  /// Evaluates at x +/- t e against the chain's current state, charging the
  /// evaluations to the chain. Two-point pairs share one Z and then advance
  /// the chain once; each one-point query advances it once.
  OracleReply query(ChainState& chain, const Vector& x, const Vector& e, double t,
                    QueryMode mode) const;

  /// A full +/- pair: one TwoPointPair query, or OnePointPlus then OnePointMinus.
  OracleReply difference_pair(ChainState& chain, const Vector& x, const Vector& e, double t,
                              Feedback feedback) const;

 private:
  std::shared_ptr<const Problem> problem_;
  AdversarialSpec adversary_;
  std::optional<ClipSpec> clip_;
  Precision precision_ = Precision::Extended;
};

/// Value-semantics form of Oracle::query.
std::pair<OracleReply, ChainState> eval_oracle(const Oracle& oracle, ChainState chain,
                                               const Vector& x, const Vector& e, double t,
                                               QueryMode mode);

/// Noiseless objective value f(x).
double eval_objective(const Problem& problem, const Vector& x);

struct AssumptionReport {
  std::size_t pairs = 0;
  double strong_convexity_min = 0.0;  // worst observed mu
  std::optional<double> grad_lipschitz_max;  // worst observed L (smooth kinds)
  double func_lipschitz_max = 0.0;    // worst observed G on the unit ball
  double noise_second_moment_max = 0.0;  // max over tested x of E|F - f|^2
  double noise_sup_sq = 0.0;             // largest observed |F - f|^2
  std::optional<double> grad_noise_second_moment_max;  // E||grad F - grad f||^2 (two-point)
  NoiseRegime regime = NoiseRegime::SecondMoment;
  bool uniform_noise_bound_holds = false;
  std::vector<std::string> notes;
};

/// Checks strong convexity, Lipschitz constants and noise moments on
/// `samples` random point pairs in the unit ball. Violations are reported.
AssumptionReport validate_assumptions(const Oracle& oracle, const ChainParams& noise,
                                      std::size_t samples, std::uint64_t seed,
                                      std::size_t noise_draws = 200);

/// Monte-Carlo E_pi |F(x, Z) - f(x)|^2 with Z drawn from the chain's stationary law.
double noise_second_moment(const Oracle& oracle, const ChainParams& noise, const Vector& x,
                           std::size_t draws, std::uint64_t seed);

}  // namespace mzo
