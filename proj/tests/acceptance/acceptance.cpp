// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance            all criteria
//   acceptance 3 7        selected criteria
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "experiment.hpp"
#include "mzo/diagnostics.hpp"
#include "mzo/parallel.hpp"

using namespace mzo;

namespace {

struct Outcome {
  bool pass = false;
  std::string summary;
};

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

void detail(const std::string& line) { std::cout << "    " << line << '\n'; }

void show(const MomentReport& r) {
  std::ostringstream os;
  print_report(os, r);
  std::istringstream is(os.str());
  for (std::string line; std::getline(is, line);) detail(line);
}

double ols_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy * sxy / (sxx * syy);
}

// ---- 1 -----------------------------------------------------------------------

Outcome grid_pattern() {
  cli::ExperimentConfig cfg;  // defaults are the desk-scale grid
  cfg.csv_path = "default_grid.csv";
  cfg.svg_prefix = "default_grid";
  const auto t0 = std::chrono::steady_clock::now();
  const auto cells = cli::run_grid(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cli::write_grid_outputs(cfg, cells);

  std::map<std::tuple<double, std::uint64_t, std::uint64_t>, double> err;
  for (const auto& c : cells) err[{c.sigma2, c.d, c.tau}] = c.mean_error;

  bool flat = true, monotone = true;
  for (auto d : cfg.dims) {
    double lo = INFINITY, hi = 0;
    for (auto tau : cfg.taus) {
      lo = std::min(lo, err[{1e-5, d, tau}]);
      hi = std::max(hi, err[{1e-5, d, tau}]);
    }
    const double spread = hi / lo - 1.0;
    flat = flat && spread < 0.2;
    detail("sigma2=1e-5 d=" + std::to_string(d) + ": error " + num(lo) + " .. " + num(hi) + ", spread " +
           num(100 * spread, 3) + "%");
  }
  for (auto tau : cfg.taus)
    for (std::size_t i = 1; i < cfg.dims.size(); ++i)
      if (!(err[{1e-5, cfg.dims[i], tau}] > err[{1e-5, cfg.dims[i - 1], tau}])) {
        monotone = false;
        detail("sigma2=1e-5 tau=" + std::to_string(tau) + ": not increasing from d=" +
               std::to_string(cfg.dims[i - 1]) + " to d=" + std::to_string(cfg.dims[i]));
      }

  std::vector<double> sum, prod, y;
  for (auto d : cfg.dims)
    for (auto tau : cfg.taus) {
      sum.push_back(static_cast<double>(d + tau));
      prod.push_back(static_cast<double>(d * tau));
      y.push_back(err[{1e-3, d, tau}]);
    }
  const double r2_sum = ols_r2(sum, y), r2_prod = ols_r2(prod, y);
  const bool fit = r2_sum > r2_prod;
  detail("sigma2=1e-3: R^2 against d+tau " + num(r2_sum) + ", against d*tau " + num(r2_prod));

  for (std::size_t i = 1; i < cfg.dims.size(); ++i)
    if (cfg.dims[i - 1] >= 8)
      detail("sigma2=1e-3 tau=1: err(d=" + std::to_string(cfg.dims[i]) + ")/err(d=" +
             std::to_string(cfg.dims[i - 1]) + ") = " +
             num(err[{1e-3, cfg.dims[i], 1}] / err[{1e-3, cfg.dims[i - 1], 1}]));

  const bool fast = secs < 600.0;
  detail("grid runtime " + num(secs, 4) + " s on " + std::to_string(worker_count()) + " worker thread(s)");
  return {flat && monotone && fit && fast,
          std::string("(a) flat in tau ") + (flat ? "yes" : "no") + ", increasing in d " +
              (monotone ? "yes" : "no") + "; (b) R^2 " + num(r2_sum, 3) + " vs " + num(r2_prod, 3) +
              "; runtime " + num(secs, 4) + " s"};
}

// ---- 2 -----------------------------------------------------------------------

Outcome telescoping() {
  const std::size_t d = 8;
  const double gamma = 1e-3, p = 1.0 / (1.0 + d);
  const double beta = std::sqrt(4.0 * p * p * gamma / 3.0);
  const MlmcConfig mlmc = MlmcConfig::derive(1, p, beta);
  ProblemSpec spec;
  spec.dim = d;
  const Oracle oracle(make_problem(spec));
  const auto r = check_mlmc_telescoping(oracle, ChainParams::lazy(d, 8, 1.0), Vector::Constant(d, 0.5), mlmc,
                                        {1e-2, Feedback::TwoPoint}, 100000, 20240002);
  show(r);
  return {r.passed, "M=" + num(mlmc.M) + ", l=" + std::to_string(mlmc.l) + ", 1e5 replications, all " +
                        std::to_string(d) + " components within 3 se: " + (r.passed ? "yes" : "no")};
}

// ---- 3 -----------------------------------------------------------------------

Outcome level_frequencies() {
  const auto r = check_mlmc_layout(MlmcConfig::custom(1, std::ldexp(1.0, 60), 1), 1000000, 20240003);
  show(r);
  const double alone = r.fitted.at("freq_base_only"), level1 = r.fitted.at("freq_level_1");
  const bool ok = r.passed && std::abs(alone - 0.5) <= 0.01 && std::abs(level1 - 0.25) <= 0.01;
  return {ok, "freq(g1 alone) = " + num(alone) + " (want 0.5), freq(g1 + g3 - g2) = " + num(level1) +
                  " (want 0.25); layout identity " + (r.passed ? "holds" : "broken")};
}

// ---- 4 -----------------------------------------------------------------------

Outcome markov_variance() {
  ProblemSpec spec;
  spec.dim = 4;
  const Oracle oracle(make_problem(spec));
  MarkovVarianceConfig cfg;
  cfg.reps = 1000;
  cfg.slope_tol_n = 0.2;
  cfg.slope_tol_tau = 0.2;
  const auto r = check_markov_variance(oracle, Vector::Constant(4, 0.5), cfg, 20240004);
  show(r);
  return {r.passed, "slope vs n " + num(r.fitted.at("slope vs n")) + ", slope vs tau " +
                        num(r.fitted.at("slope vs tau")) + " (targets -1, +1, tol 0.2)"};
}

// ---- 5 -----------------------------------------------------------------------

Outcome exactness() {
  const auto r = check_quadratic_exactness(8, {1e-8, 1e-2, 1.0}, 2000, 20240005, 1e-10);
  show(r);
  return {r.passed, std::string("relative error <= 1e-10 for t in {1e-8, 1e-2, 1}: ") + (r.passed ? "yes" : "no")};
}

// ---- 6 -----------------------------------------------------------------------

Outcome smoothing() {
  bool ok = true;
  std::string s;
  for (std::size_t d : {2, 8})
    for (double t : {0.1, 1.0}) {
      ProblemSpec spec;
      spec.dim = d;
      const auto prob = make_problem(spec);
      const auto r = check_smoothing(*prob, Vector::Constant(d, 0.3), t, 200000, 20240006 + d);
      show(r);
      const ReportRow* gap = nullptr;
      for (const auto& row : r.rows)
        if (row.label == "f_t - f") gap = &row;
      const bool row_ok = gap && gap->ok;
      ok = ok && row_ok;
      if (gap)
        s += "(" + std::to_string(d) + "," + num(t, 2) + "): " + num(gap->value) + " vs " + num(gap->reference) +
             (row_ok ? "; " : " off; ");
    }
  ProblemSpec ns;
  ns.kind = ProblemKind::NonsmoothL1;
  ns.dim = 4;
  ns.mu = 0.5;
  ns.l1_weight = 0.2;
  const auto prob = make_problem(ns);
  const auto r = check_smoothing_lipschitz(*prob, 0.1, 1000, 64, 20240016);
  show(r);
  ok = ok && r.passed;
  return {ok, s + "non-smooth 0 <= f_t - f <= G t on 1000 points: " + (r.passed ? "yes" : "no")};
}

// ---- 7 -----------------------------------------------------------------------

Outcome deterministic() {
  const std::size_t d = 4;
  ProblemSpec spec;
  spec.kind = ProblemKind::DiagQuadratic;
  spec.dim = d;
  spec.mu = 0.1;
  spec.lips_grad = 1.0;
  const auto prob = make_problem(spec);
  const Oracle oracle(prob, {}, std::nullopt, Precision::Extended);
  TuneRequest req;
  req.mu = 0.1;
  req.L = 1.0;
  req.dim = d;
  req.epsilon = 1e-8;
  const TuningResult tr = tune_theorem(req);
  const MomentumParams params =
      derive_params(0.1, 1.0, tr.gamma, tr.p, 1, Feedback::TwoPoint, true, tr.t, d, 1000);
  detail("tuned gamma " + num(tr.gamma) + ", t " + num(tr.t) + ", p " + num(tr.p));
  const Vector x0 = prob->minimizer() + Vector::Constant(d, 0.5);
  const ChainParams quiet = ChainParams::iid(d, 0.0);

  const std::size_t reps = 200;
  std::vector<RunRecord> runs(reps);
  parallel_for(reps, [&](std::size_t i) { runs[i] = run(oracle, quiet, params, x0, derive_seed(20240007, i)); });
  double worst = 0.0;
  std::size_t worst_hit = 0;
  for (const auto& rec : runs) {
    worst = std::max(worst, rec.last().err_sq);
    std::size_t k = 0;
    while (k < rec.rows.size() && rec.rows[k].err_sq > 1e-8) ++k;
    worst_hit = std::max(worst_hit, k);
  }
  const bool converged = worst <= 1e-8;
  detail("largest |x^N - x*|^2 over " + std::to_string(reps) + " runs: " + num(worst) +
         ", latest first hit of 1e-8 at k = " + std::to_string(worst_hit));
  const auto r = check_lyapunov_descent(runs, 10);
  show(r);
  return {converged && r.passed, "max final error " + num(worst) + "; steps after k=10 with E r^k rising: " +
                                     num(r.fitted.at("violations")) + " (pathwise upticks " +
                                     num(r.fitted.at("pathwise_increases")) + ")"};
}

// ---- 8 -----------------------------------------------------------------------

Outcome batch_sweep() {
  const std::size_t d = 16;
  const double sigma2 = 1e-3, eps = 1e-3;
  ProblemSpec spec;
  spec.dim = d;
  const Oracle oracle(make_problem(spec), {}, std::nullopt, Precision::Double);
  const ChainParams noise = ChainParams::lazy(d, 16, std::sqrt(sigma2 / d));
  const Vector x0 = Vector::Constant(d, std::sqrt(1.0 / d));
  const std::uint64_t reps = 200;
  std::vector<double> calls, iters;
  for (std::uint64_t B : {1, 4, 16}) {
    TuneRequest req;
    req.L = 1.0;
    req.dim = d;
    req.tau = 16;
    req.sigma_sq = sigma2;
    req.B = B;
    req.epsilon = eps;
    std::vector<RestartResult> res(reps);
    parallel_for(reps, [&](std::size_t i) {
      RestartOptions ro;
      ro.run.record_rows = false;
      res[i] = run_with_restarts(oracle, noise, req, x0, derive_seed(20240008 + B, i), ro);
    });
    RunningStats c, it;
    std::size_t missed = 0;
    for (const auto& r : res) {
      std::uint64_t n = 0;
      for (const auto& round : r.rounds) n += round.N;
      c.add(static_cast<double>(r.total_calls));
      it.add(static_cast<double>(n));
      missed += r.converged ? 0 : 1;
    }
    calls.push_back(c.mean());
    iters.push_back(it.mean());
    detail("B=" + std::to_string(B) + ": mean calls " + num(c.mean()) + " +/- " + num(c.standard_error(), 2) +
           ", mean iterations " + num(it.mean()) + ", unconverged " + std::to_string(missed));
  }
  const double call_spread = *std::max_element(calls.begin(), calls.end()) /
                             *std::min_element(calls.begin(), calls.end());
  const double r4 = iters[0] / iters[1], r16 = iters[0] / iters[2];
  const bool calls_ok = call_spread <= 2.0;
  const bool iters_ok = r4 >= 2.0 && r4 <= 8.0 && r16 >= 8.0 && r16 <= 32.0;
  return {calls_ok && iters_ok, "calls max/min " + num(call_spread, 3) + " (limit 2); iterations B=1 over B=4 " +
                                    num(r4, 3) + " (want 4), over B=16 " + num(r16, 3) + " (want 16)"};
}

// ---- 9 -----------------------------------------------------------------------

Outcome adversarial() {
  const std::size_t d = 4;
  ProblemSpec spec;
  spec.dim = d;
  const auto prob = make_problem(spec);
  const double sigma2 = 1e-3, eps = 1e-3;
  const ChainParams noise = ChainParams::lazy(d, 4, std::sqrt(sigma2 / d));

  const Oracle quad(prob, {}, std::nullopt, Precision::Quad);
  const double delta = 1e-3, t = 1e-2;
  const auto est = check_adversarial_estimates(quad, noise, AdversarialSpec::sign_hash(delta), t,
                                               Feedback::TwoPoint, 10000, 20240009);
  show(est);

  TuneRequest req;
  req.L = 1.0;
  req.dim = d;
  req.tau = 4;
  req.sigma_sq = sigma2;
  req.epsilon = eps;
  const TuningResult tr = tune_theorem(req);
  AdversarialRunConfig cfg;
  cfg.params = derive_params(1.0, 1.0, tr.gamma, tr.p, 1, Feedback::TwoPoint, true, tr.t, d, 1000);
  cfg.noise = noise;
  cfg.x0 = Vector::Constant(d, 0.5);
  cfg.reps = 200;
  const Oracle fast(prob, {}, std::nullopt, Precision::Double);
  const auto floor = check_adversarial_floor(fast, cfg, {0.5 * tr.delta_max}, tr.delta_max, 20240019);
  show(floor);
  double ratio = NAN;
  for (const auto& [k, v] : floor.fitted)
    if (k.starts_with("ratio_")) ratio = v;
  const bool e2e = ratio >= 0.5 && ratio <= 2.0;
  return {est.passed && e2e, std::string("per-estimate bound on 1e4 draws: ") + (est.passed ? "holds" : "violated") +
                                 "; error ratio at 0.5 delta_max = " + num(ratio, 3) + " (within 2x)"};
}

// ---- 10 ----------------------------------------------------------------------

// Minimizes the value oracle with central-difference Newton steps on the
// full Hessian, started from the origin's neighbourhood.
Vector minimize_numerically(const Problem& prob, Vector x) {
  const std::size_t d = x.size();
  auto f = [&](const Vector& y) { return static_cast<long double>(prob.value(PointView(y))); };
  const double h = 1e-5;
  for (int it = 0; it < 200; ++it) {
    Vector g(d);
    Eigen::MatrixXd H(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      Vector a = x, b = x;
      a[i] += h;
      b[i] -= h;
      g[i] = static_cast<double>((f(a) - f(b)) / (2 * h));
      H(i, i) = static_cast<double>((f(a) - 2 * f(x) + f(b)) / (h * h));
      for (std::size_t j = 0; j < i; ++j) {
        Vector pp = x, pm = x, mp = x, mm = x;
        pp[i] += h, pp[j] += h;
        pm[i] += h, pm[j] -= h;
        mp[i] -= h, mp[j] += h;
        mm[i] -= h, mm[j] -= h;
        H(i, j) = H(j, i) = static_cast<double>((f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h));
      }
    }
    Vector step = H.ldlt().solve(g);
    // backtrack on the value
    double s = 1.0;
    while (s > 1e-8 && f(x - s * step) > f(x)) s *= 0.5;
    x -= s * step;
    if (step.norm() * s < 1e-13) break;
  }
  return x;
}

Outcome hard_instance() {
  const std::size_t d = 4;
  const double delta = 0.3, mu = 1.0;
  ProblemSpec spec;
  spec.kind = ProblemKind::HardOnePoint;
  spec.dim = d;
  spec.mu = mu;
  spec.delta = delta;
  spec.signs = {1, -1, -1, 1};
  const auto prob = make_problem(spec);

  Rng rng = make_rng(20240010);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int start = 0; start < 20; ++start) {
    Vector x0(d);
    for (auto& v : x0) v = u(rng);
    const Vector xh = minimize_numerically(*prob, x0);
    for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, std::abs(xh[i] + delta * spec.signs[i] / 2.0));
  }
  detail("largest |x_hat_i + delta omega_i / 2| over 20 starts: " + num(worst));

  // Hessian by differences of the value at random points, away from kinks
  // and across them alike.
  double lo = INFINITY, hi = -INFINITY;
  const double h = 1e-4;
  for (int s = 0; s < 2000; ++s) {
    Vector x(d);
    for (auto& v : x) v = 0.8 * u(rng);
    auto f = [&](const Vector& y) { return static_cast<long double>(prob->value(PointView(y))); };
    Eigen::MatrixXd H(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        Vector pp = x, pm = x, mp = x, mm = x;
        pp[i] += h, pp[j] += h;
        pm[i] += h, pm[j] -= h;
        mp[i] -= h, mp[j] += h;
        mm[i] -= h, mm[j] -= h;
        H(i, j) = H(j, i) = static_cast<double>((f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h));
      }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues();
    lo = std::min(lo, ev.minCoeff());
    hi = std::max(hi, ev.maxCoeff());
  }
  detail("sampled Hessian eigenvalues in [" + num(lo, 8) + ", " + num(hi, 8) + "]");
  const double slack = 1e-6;
  const bool ok = worst <= 1e-6 && lo >= 0.5 * mu - slack && hi <= 1.5 * mu + slack;
  return {ok, "minimizer error " + num(worst) + " (tol 1e-6); eigenvalues [" + num(lo, 6) + ", " + num(hi, 6) +
                  "] within [0.5, 1.5]"};
}

// ---- 11 ----------------------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

Outcome determinism() {
  const std::string cfg_path = "acceptance_run.cfg";
  {
    std::ofstream f(cfg_path, std::ios::binary);
    f << "problem.kind = quadratic_markov\nproblem.dim_grid = 8\nchain.tau_grid = 4\nchain.sigma2_grid = 1e-3\n"
         "optimizer.N = 300\noptimizer.seed = 11\n";
  }
  const cli::ExperimentConfig cfg = cli::load_experiment(cfg_path);
  std::ostringstream a, b;
  cli::write_run_csv(a, cli::run_single(cfg));
  cli::write_run_csv(b, cli::run_single(cfg));
  const bool in_process = a.str() == b.str();

  bool via_tool = true;
#ifdef MZO_TOOL
  for (const char* out : {"acceptance_run_a.csv", "acceptance_run_b.csv"}) {
    const std::string cmd = std::string("\"") + MZO_TOOL + "\" run " + cfg_path + " -o " + out + " > /dev/null";
    via_tool = via_tool && std::system(cmd.c_str()) == 0;
  }
  const std::string fa = slurp("acceptance_run_a.csv"), fb = slurp("acceptance_run_b.csv");
  via_tool = via_tool && !fa.empty() && fa == fb && fa == a.str();
  detail("tool output " + std::to_string(fa.size()) + " bytes");
#endif
  return {in_process && via_tool, std::string("in-process CSV identical: ") + (in_process ? "yes" : "no") +
                                      "; two `mzo run` invocations identical: " + (via_tool ? "yes" : "no")};
}

struct Criterion {
  const char* title;
  std::function<Outcome()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"default grid pattern", grid_pattern},
      {"MLMC telescoping identity", telescoping},
      {"MLMC level frequencies at l=1", level_frequencies},
      {"Markov variance scaling", markov_variance},
      {"quadratic exactness", exactness},
      {"smoothing suite", smoothing},
      {"deterministic convergence", deterministic},
      {"B-sweep oracle complexity", batch_sweep},
      {"adversarial robustness", adversarial},
      {"hard-instance correctness", hard_instance},
      {"run determinism", determinism},
  };
  std::vector<std::size_t> pick;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(all.size())) {
      std::cerr << "usage: acceptance [criterion 1.." << all.size() << "]...\n";
      return 2;
    }
    pick.push_back(static_cast<std::size_t>(n));
  }
  if (pick.empty())
    for (std::size_t i = 1; i <= all.size(); ++i) pick.push_back(i);

  std::size_t failed = 0;
  for (std::size_t n : pick) {
    const auto& c = all[n - 1];
    std::cout << "criterion " << n << ": " << c.title << '\n';
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << c.title << "): " << o.summary << '\n'
              << std::flush;
    failed += o.pass ? 0 : 1;
  }
  return failed ? 1 : 0;
}
