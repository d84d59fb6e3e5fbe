#include <doctest.h>

#include <sstream>

#include "mzo/diagnostics.hpp"
#include "support.hpp"

using namespace mzo;

namespace {

const ReportRow& row(const MomentReport& r, const std::string& label) {
  for (const auto& x : r.rows)
    if (x.label == label) return x;
  FAIL("missing row " << label);
  return r.rows.front();
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("report text") {
    MomentReport r;
    r.name = "demo";
    r.reps = 12;
    r.add_row({"a", 1.0, 0.1, 1.0, true});
    r.add_row({"b", 2.0, 0.0, 1.0, false});
    r.notes.push_back("hello");
    std::ostringstream os;
    print_report(os, r);
    const std::string s = os.str();
    CHECK_FALSE(r.passed);
    CHECK(s.find("[FAIL] demo") != std::string::npos);
    CHECK(s.find("(reps 12)") != std::string::npos);
    CHECK(s.find("# hello") != std::string::npos);
    CHECK(within_se(1.0, 1.05, 0.02));
    CHECK_FALSE(within_se(1.0, 1.1, 0.02));
  }

  TEST_CASE("markov variance without noise") {
    const Oracle oracle(testing::quadratic(3));
    MarkovVarianceConfig cfg;
    cfg.noise_std = 0.0;
    cfg.reps = 100;
    const auto r = check_markov_variance(oracle, Vector::Ones(3), cfg, 1);
    CHECK(r.passed);
    CHECK(row(r, "variance without noise").value <= 1e-24);
  }

  TEST_CASE("markov variance slope in n at tau = 1") {
    const Oracle oracle(testing::quadratic(4));
    MarkovVarianceConfig cfg;
    cfg.reps = 2000;
    const auto r = check_markov_variance(oracle, Vector::Constant(4, 0.5), cfg, 2);
    CHECK(std::abs(r.fitted.at("slope vs n") + 1.0) <= 0.15);
    CHECK(std::abs(r.fitted.at("slope vs tau") - 1.0) <= 0.2);
  }

  TEST_CASE("smoothing gap of the quadratic") {
    const auto q = testing::quadratic(2);
    const auto r = check_smoothing(*q, Vector::Constant(2, 0.4), 1.0, 100000, 3);
    CHECK(r.passed);
    CHECK(row(r, "f_t - f").reference == doctest::Approx(0.25));
    CHECK(testing::within(row(r, "f_t - f").value, 0.25, row(r, "f_t - f").se));
  }

  TEST_CASE("ball moment row") {
    const auto r = check_ball_moment(8, 100000, 4);
    CHECK(r.passed);
    bool found = false;
    for (const auto& x : r.rows) found = found || x.reference == doctest::Approx(8.0 / 10.0);
    CHECK(found);
  }

  TEST_CASE("MLMC moments without noise") {
    const std::size_t d = 4;
    const Oracle oracle(testing::quadratic(d));
    const Vector x = Vector::Constant(d, 0.5);
    const MlmcConfig cfg = MlmcConfig::custom(4, 16, 1);
    const auto r = check_mlmc_moments(oracle, ChainParams::lazy(d, 4, 0.0), x, cfg, {1e-2, Feedback::TwoPoint}, 20000, 5);
    // E g = x exactly, so only the direction variance remains
    CHECK(r.fitted.at("squared_bias") <= 1e-3 * r.fitted.at("variance"));
    CHECK(r.fitted.at("variance") > 0.0);
  }

  TEST_CASE("layout check and the dropped weight") {
    const auto ok = check_mlmc_layout(MlmcConfig::custom(1, 8, 1), 20000, 16);
    CHECK(ok.passed);
    MlmcConfig broken = MlmcConfig::custom(1, 8, 1);
    broken.variant = MlmcVariant::UnweightedCorrection;
    CHECK_FALSE(check_mlmc_layout(broken, 20000, 16).passed);
    CHECK(check_mlmc_conditional_mean(4, 64, 1.0, MlmcConfig::custom(4, 64, 1), 20000, 7).passed);
    MlmcConfig unweighted = MlmcConfig::custom(4, 64, 1);
    unweighted.variant = MlmcVariant::UnweightedCorrection;
    CHECK_FALSE(check_mlmc_conditional_mean(4, 64, 1.0, unweighted, 20000, 7).passed);
  }

  TEST_CASE("conditional mean closed form at tau = 1") {
    // q = 0: only the first sample sees c, every later one sees fresh noise
    const MlmcConfig cfg = MlmcConfig::custom(2, 4, 1);
    const Vector x = Vector::Zero(3);
    const Vector m = mlmc_conditional_mean(x, 1.0, 1, cfg);
    CHECK(m[0] == doctest::Approx(0.5));
  }

  TEST_CASE("adversarial wrappers") {
    const std::size_t d = 4;
    const Oracle oracle(testing::quadratic(d), {}, std::nullopt, Precision::Quad);
    const ChainParams noise = ChainParams::lazy(d, 2, 0.1);
    const auto none = check_adversarial_estimates(oracle, noise, AdversarialSpec::none(), 1e-2, Feedback::TwoPoint, 2000, 8);
    CHECK(none.passed);
    CHECK(row(none, "bit-identical estimates").value == 2000);
    const auto constant =
        check_adversarial_estimates(oracle, noise, AdversarialSpec::constant(1e-3), 1e-2, Feedback::TwoPoint, 2000, 8);
    CHECK(constant.fitted.at("max_gap") <= 1e-30);
    const auto hashed =
        check_adversarial_estimates(oracle, noise, AdversarialSpec::sign_hash(1e-3), 1e-2, Feedback::TwoPoint, 2000, 8);
    CHECK(hashed.passed);
    CHECK(hashed.fitted.at("max_gap") > 0.0);
    CHECK(hashed.fitted.at("max_gap") <= hashed.fitted.at("bound") * (1 + 1e-9));
    CHECK(hashed.fitted.at("bound") == doctest::Approx(d * 1e-3 / 1e-2));
  }

  TEST_CASE("oracle calls of a deterministic estimator") {
    const std::size_t d = 3;
    const auto prob = testing::quadratic(d);
    const Oracle oracle(prob);
    const MomentumParams prm = derive_params(1.0, 1.0, 0.5, 1.0, 1, Feedback::TwoPoint, true, 1e-3, d, 20);
    std::vector<RunRecord> recs;
    for (std::uint64_t s = 0; s < 10; ++s)
      recs.push_back(run(oracle, ChainParams::lazy(d, 1, 0.0), prm, Vector::Ones(d), s, {}, make_exact_estimator(prob)));
    const auto r = oracle_call_stats(recs);
    CHECK(row(r, "var S_N").value == 0.0);
    CHECK(row(r, "var calls per iteration").value == 0.0);
  }

  TEST_CASE("oracle calls of the MLMC estimator") {
    const std::size_t d = 3;
    const Oracle oracle(testing::quadratic(d), {}, std::nullopt, Precision::Double);
    const MomentumParams prm = derive_params(1.0, 1.0, 0.05, std::nullopt, 1, Feedback::TwoPoint, true, 1e-3, d, 50);
    std::vector<RunRecord> recs;
    for (std::uint64_t s = 0; s < 400; ++s)
      recs.push_back(run(oracle, ChainParams::lazy(d, 2, 0.01), prm, Vector::Ones(d), s));
    const auto r = oracle_call_stats(recs);
    CHECK(r.passed);
    CHECK(r.fitted.at("tail_3") <= r.fitted.at("tail_1.5"));
    const auto& per = row(r, "mean calls per iteration");
    CHECK(testing::within(per.value, prm.mlmc().expected_oracle_calls(), per.se));
  }

  TEST_CASE("Lyapunov descent of exact-gradient runs") {
    const std::size_t d = 4;
    ProblemSpec spec;
    spec.kind = ProblemKind::DiagQuadratic;
    spec.dim = d;
    spec.mu = 0.1;
    spec.lips_grad = 1.0;
    const auto prob = make_problem(spec);
    const Oracle oracle(prob);
    const MomentumParams prm = derive_params(0.1, 1.0, 0.75, 1.0, 1, Feedback::TwoPoint, true, 1e-3, d, 100);
    RunOptions opts;
    opts.lyapunov_coef = 6.0;
    const RunRecord r = run(oracle, ChainParams::lazy(d, 1, 0.0), prm, prob->minimizer() + Vector::Ones(d), 1, opts,
                            make_exact_estimator(prob));
    const auto rep = check_lyapunov_descent({r}, 0);
    CHECK(rep.fitted.at("pathwise_increases") == 0.0);
  }

  TEST_CASE("suite names") {
    CHECK_THROWS_AS(run_suite("nope", {}), UsageError);
    const auto& names = suite_names();
    for (const char* n : {"chains", "estimators", "smoothing", "mlmc", "optimizer", "all"})
      CHECK(std::find(names.begin(), names.end(), n) != names.end());
  }

  TEST_CASE("chains suite passes at reduced scale") {
    SuiteOptions opts;
    opts.scale = 0.2;
    for (const auto& r : run_suite("chains", opts)) CHECK_MESSAGE(r.passed, r.name);
  }
}
