#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "mzo/chains.hpp"
#include "mzo/optimizer.hpp"
#include "mzo/problems.hpp"

namespace mzo::cli {

struct ExperimentConfig {
  ProblemSpec problem;  // dim, tau and sigma_sq are filled per cell
  std::vector<std::uint64_t> dims{1, 2, 4, 8, 16, 32, 64};
  std::vector<std::uint64_t> taus{1, 2, 4, 8, 16, 32, 64};
  std::vector<double> sigma2s{1e-3, 1e-4, 1e-5};  // total noise variance E|Z|^2
  ChainKind chain_kind = ChainKind::LazyGaussian;

  double t = 1e-5;
  std::uint64_t B = 1;
  Feedback feedback = Feedback::TwoPoint;
  Precision precision = Precision::Double;
  bool exact_gradient = false;  // estimator.kind = exact: true gradients, no oracle calls

  double gamma = 1e-3;
  std::optional<double> p;  // default B/(B+d) or 1
  std::uint64_t N = 1000;
  std::uint64_t seed = 1;
  std::uint64_t replications = 200;
  double init_error = 1e-2;  // |x^0 - x*|^2

  AdversarialSpec adversary;

  std::string csv_path = "grid.csv";
  std::string svg_prefix = "heatmap";
  std::string trajectory_path = "trajectory.csv";

  /// Throws ConfigError on empty grids, zero replications or bad values.
  void validate() const;
};

constexpr std::uint64_t kFullReplications = 10000;

/// Keys understood by experiment_from.
const std::vector<std::string>& config_keys();
ExperimentConfig experiment_from(const KeyValues& kv);
ExperimentConfig load_experiment(const std::string& path);

struct CellResult {
  std::uint64_t d = 0;
  std::uint64_t tau = 0;
  double sigma2 = 0.0;
  double mean_error = 0.0;  // NaN when any replication diverged
  double se_error = 0.0;
  double mean_oracle_calls = 0.0;
  std::uint64_t seed_base = 0;
  std::uint64_t diverged = 0;
};

/// seed_base xor a hash of (d, tau, sigma2, replicate).
std::uint64_t cell_seed(std::uint64_t seed_base, std::uint64_t d, std::uint64_t tau, double sigma2,
                        std::uint64_t rep);

struct CellSetup {
  std::shared_ptr<const Problem> problem;
  Oracle oracle;
  ChainParams noise;
  MomentumParams params;
  Vector x0;
  Estimator estimator;  // empty for the MLMC estimator
};
CellSetup make_cell(const ExperimentConfig& cfg, std::uint64_t d, std::uint64_t tau, double sigma2);

using Progress = std::function<void(std::size_t done, std::size_t total)>;

/// Cells in (sigma2, d, tau) order.
std::vector<CellResult> run_grid(const ExperimentConfig& cfg, const Progress& progress = {});

/// Shortest round-trip decimal form; "nan" for NaN.
std::string format_number(double v);

extern const char* const kGridHeader;
void write_grid_csv(std::ostream& os, const std::vector<CellResult>& cells);

/// Heatmap of the cells with the given sigma2, d on rows and tau on columns,
/// log-scaled color. Every cell carries data-d, data-tau and data-value.
std::string heatmap_svg(const std::vector<CellResult>& cells, double sigma2);
std::string heatmap_path(const std::string& prefix, double sigma2);

/// Writes the CSV and one SVG per sigma2; returns the paths written.
std::vector<std::string> write_grid_outputs(const ExperimentConfig& cfg, const std::vector<CellResult>& cells);

/// Single seeded run with the config's only (d, tau, sigma2) values.
RunRecord run_single(const ExperimentConfig& cfg);
extern const char* const kRunHeader;
void write_run_csv(std::ostream& os, const RunRecord& record);

void print_tuning(std::ostream& os, const TuneRequest& req, const TuningResult& res);

}  // namespace mzo::cli
