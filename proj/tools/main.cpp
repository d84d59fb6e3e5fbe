#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "experiment.hpp"
#include "mzo/diagnostics.hpp"

using namespace mzo;

namespace {

constexpr int kExitChecksFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitDiverged = 5;

int cmd_grid(const std::string& path, bool full, std::uint64_t reps_override, bool quiet) {
  cli::ExperimentConfig cfg = cli::load_experiment(path);
  if (full) cfg.replications = cli::kFullReplications;
  if (reps_override) cfg.replications = reps_override;
  cli::Progress progress;
  if (!quiet)
    progress = [](std::size_t done, std::size_t total) {
      std::cerr << "\rcells " << done << "/" << total << std::flush;
      if (done == total) std::cerr << '\n';
    };
  const auto cells = cli::run_grid(cfg, progress);
  for (const auto& p : cli::write_grid_outputs(cfg, cells)) std::cout << "wrote " << p << '\n';
  std::uint64_t diverged = 0;
  for (const auto& c : cells) diverged += c.diverged ? 1 : 0;
  if (diverged) std::cerr << diverged << " cell(s) had divergent replications (nan)\n";
  return 0;
}

int cmd_verify(const std::string& suite, const std::string& fault, double scale, std::uint64_t seed,
               const std::string& report_path) {
  SuiteOptions opts;
  opts.scale = scale;
  opts.seed = seed;
  if (fault == "mlmc-weight") opts.mlmc_variant = MlmcVariant::UnweightedCorrection;
  else if (!fault.empty()) throw UsageError("unknown fault '" + fault + "' (mlmc-weight)");
  const auto reports = run_suite(suite, opts);
  std::ofstream file;
  if (!report_path.empty() && report_path != "-") {
    file.open(report_path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError(report_path, "cannot open for writing");
  }
  std::size_t failed = 0;
  for (const auto& r : reports) {
    print_report(std::cout, r);
    if (file) print_report(file, r);
    failed += r.passed ? 0 : 1;
  }
  const std::string summary = suite + ": " + std::to_string(reports.size() - failed) + "/" +
                              std::to_string(reports.size()) + " checks passed\n";
  std::cout << summary;
  if (file) file << summary;
  return failed ? kExitChecksFailed : 0;
}

int cmd_run(const std::string& path, const std::string& out_override) {
  const cli::ExperimentConfig cfg = cli::load_experiment(path);
  const std::string out = out_override.empty() ? cfg.trajectory_path : out_override;
  auto write = [&](const RunRecord& rec) {
    if (out == "-") {
      cli::write_run_csv(std::cout, rec);
      return;
    }
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(out, "cannot open for writing");
    cli::write_run_csv(f, rec);
    f.close();
    if (!f) throw IoError(out, "write failed");
  };
  try {
    const RunRecord rec = cli::run_single(cfg);
    write(rec);
    if (out != "-")
      std::cout << "wrote " << out << "  (final err_sq " << cli::format_number(rec.last().err_sq) << ", "
                << rec.last().calls << " oracle calls)\n";
  } catch (const RunDivergedError& e) {
    write(e.partial());
    std::cerr << "diverged at iteration " << e.iteration() << ": " << e.what() << '\n';
    return kExitDiverged;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accelerated zero-order optimization under Markov noise"};
  app.require_subcommand(1);

  std::string grid_config;
  bool full = false, quiet = false;
  std::uint64_t reps_override = 0;
  auto* grid = app.add_subcommand("grid", "Run a (d, tau, sigma2) experiment grid; writes CSV and SVG heatmaps");
  grid->add_option("config", grid_config, "Config file (key = value)")->required();
  grid->add_flag("--full", full, "Use 10^4 replications per cell");
  grid->add_option("--replications", reps_override, "Override optimizer.replications");
  grid->add_flag("-q,--quiet", quiet, "No progress output");

  std::string suite, fault, report_path;
  double scale = 1.0;
  std::uint64_t verify_seed = SuiteOptions{}.seed;
  auto* verify = app.add_subcommand("verify", "Run a diagnostics suite; exit 0 iff every check passes");
  verify->add_option("suite", suite, "chains | estimators | smoothing | mlmc | optimizer | all")->required();
  verify->add_option("--inject-fault", fault, "Deliberate defect to exercise the checks (mlmc-weight)");
  verify->add_option("--scale", scale, "Multiplier on replication counts")->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_seed, "Base seed");
  verify->add_option("--report", report_path, "Report file (default verify_<suite>.txt, '-' for none)");

  std::string run_config, run_out;
  auto* runc = app.add_subcommand("run", "Single seeded run; writes the trajectory CSV");
  runc->add_option("config", run_config, "Config file (key = value)")->required();
  runc->add_option("-o,--output", run_out, "Trajectory path ('-' for stdout)");

  TuneRequest req;
  double L = 0.0, G = 0.0, p = 0.0;
  std::string feedback = "two_point";
  bool nonsmooth = false;
  auto* tune = app.add_subcommand("tune", "Print theorem-driven parameters for a problem description");
  tune->add_option("--mu", req.mu, "Strong convexity")->required();
  tune->add_option("--L", L, "Gradient Lipschitz constant (smooth)");
  tune->add_option("--G", G, "Function Lipschitz constant (non-smooth)");
  tune->add_option("--dim", req.dim, "Dimension")->required();
  tune->add_option("--tau", req.tau, "Mixing time");
  tune->add_option("--sigma2", req.sigma_sq, "Noise variance");
  tune->add_option("--B", req.B, "Batch parameter");
  tune->add_option("--feedback", feedback, "one_point | two_point");
  tune->add_flag("--nonsmooth", nonsmooth, "Use the non-smooth rules");
  tune->add_option("--epsilon", req.epsilon, "Target accuracy")->required();
  tune->add_option("--delta", req.delta, "Declared adversarial bound");
  tune->add_option("--c-t", req.c_t, "Constant in the t rule");
  tune->add_option("--p", p, "Override p");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*grid) return cmd_grid(grid_config, full, reps_override, quiet);
    if (*verify) {
      const std::string rp = report_path.empty() ? "verify_" + suite + ".txt" : report_path;
      return cmd_verify(suite, fault, scale, verify_seed, rp);
    }
    if (*runc) return cmd_run(run_config, run_out);
    if (*tune) {
      req.smooth = !nonsmooth;
      req.feedback = parse_feedback(feedback);
      if (L > 0.0) req.L = L;
      if (G > 0.0) req.G = G;
      if (p > 0.0) req.p = p;
      const TuningResult res = tune_theorem(req);
      cli::print_tuning(std::cout, req, res);
      return 0;
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  }
  return 0;
}
