#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <cstdio>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>

#include "mzo/parallel.hpp"
#include "mzo/stats.hpp"

namespace mzo::cli {

const char* const kGridHeader = "d,tau,sigma2,mean_error,se_error,mean_oracle_calls,seed_base";
const char* const kRunHeader = "k,err_sq,lyapunov_r,oracle_calls_cum";

void ExperimentConfig::validate() const {
  if (dims.empty() || taus.empty() || sigma2s.empty()) throw ConfigError("grids must be non-empty");
  for (auto d : dims)
    if (d == 0) throw ConfigError("problem.dim_grid: dimensions must be positive");
  for (auto tau : taus)
    if (tau == 0) throw ConfigError("chain.tau_grid: tau must be positive");
  for (double s : sigma2s)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("chain.sigma2_grid: variances must be finite and >= 0");
  if (replications == 0) throw ConfigError("optimizer.replications must be >= 1");
  if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("estimator.t must be positive");
  if (B == 0) throw ConfigError("estimator.B must be >= 1");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("optimizer.gamma must be positive");
  if (!(init_error >= 0.0) || !std::isfinite(init_error)) throw ConfigError("optimizer.init_error must be >= 0");
  if (chain_kind == ChainKind::Iid)
    for (auto tau : taus)
      if (tau != 1) throw ConfigError("chain.kind = iid needs chain.tau_grid = 1");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "problem.kind",        "problem.dim_grid",    "problem.mu",        "problem.L",
      "problem.l1_weight",   "problem.signs",       "problem.delta",     "problem.noise_var",
      "chain.kind",          "chain.tau_grid",      "chain.sigma2_grid", "estimator.t",
      "estimator.B",         "estimator.feedback",  "estimator.kind",  "estimator.precision", "optimizer.gamma",
      "optimizer.p",         "optimizer.N",         "optimizer.seed",    "optimizer.replications",
      "optimizer.init_error", "adversary.shape",    "adversary.delta",   "output.csv",
      "output.svg_prefix",   "output.trajectory"};
  return keys;
}

ExperimentConfig experiment_from(const KeyValues& kv) {
  kv.require_known(config_keys());
  ExperimentConfig c;
  c.problem.kind = parse_problem_kind(kv.text("problem.kind", "quadratic_markov"));
  c.problem.mu = kv.real("problem.mu", c.problem.mu);
  c.problem.lips_grad = kv.optional_real("problem.L");
  c.problem.l1_weight = kv.real("problem.l1_weight", c.problem.l1_weight);
  c.problem.delta = kv.optional_real("problem.delta");
  c.problem.noise_var = kv.optional_real("problem.noise_var");
  if (kv.has("problem.signs"))
    for (double s : kv.reals("problem.signs", {})) {
      if (s != 1.0 && s != -1.0) throw ConfigError("problem.signs: entries must be +1 or -1");
      c.problem.signs.push_back(static_cast<int>(s));
    }
  c.dims = kv.integers("problem.dim_grid", c.dims);

  const std::string chain = kv.text("chain.kind", "lazy");
  if (chain == "lazy") c.chain_kind = ChainKind::LazyGaussian;
  else if (chain == "iid") c.chain_kind = ChainKind::Iid;
  else throw ConfigError("chain.kind: '" + chain + "' (lazy | iid)");
  c.taus = kv.integers("chain.tau_grid", c.chain_kind == ChainKind::Iid ? std::vector<std::uint64_t>{1} : c.taus);
  c.sigma2s = kv.reals("chain.sigma2_grid", c.sigma2s);

  c.t = kv.real("estimator.t", c.t);
  c.B = kv.integer("estimator.B", c.B);
  c.feedback = parse_feedback(kv.text("estimator.feedback", "two_point"));
  c.precision = parse_precision(kv.text("estimator.precision", "double"));
  const std::string kind = kv.text("estimator.kind", "mlmc");
  if (kind == "exact") c.exact_gradient = true;
  else if (kind != "mlmc") throw ConfigError("estimator.kind: '" + kind + "' (mlmc | exact)");

  c.gamma = kv.real("optimizer.gamma", c.gamma);
  c.p = kv.optional_real("optimizer.p");
  c.N = kv.integer("optimizer.N", c.N);
  c.seed = kv.integer("optimizer.seed", c.seed);
  c.replications = kv.integer("optimizer.replications", c.replications);
  c.init_error = kv.real("optimizer.init_error", c.init_error);

  const std::string shape = kv.text("adversary.shape", "none");
  const double delta = kv.real("adversary.delta", 0.0);
  if (delta < 0.0) throw ConfigError("adversary.delta must be >= 0");
  if (shape == "none") c.adversary = AdversarialSpec::none();
  else if (shape == "constant") c.adversary = AdversarialSpec::constant(delta);
  else if (shape == "sign_hash") c.adversary = AdversarialSpec::sign_hash(delta);
  else throw ConfigError("adversary.shape: '" + shape + "' (none | constant | sign_hash)");

  c.csv_path = kv.text("output.csv", c.csv_path);
  c.svg_prefix = kv.text("output.svg_prefix", c.svg_prefix);
  c.trajectory_path = kv.text("output.trajectory", c.trajectory_path);
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::string& path) { return experiment_from(KeyValues::load(path)); }

std::uint64_t cell_seed(std::uint64_t seed_base, std::uint64_t d, std::uint64_t tau, double sigma2,
                        std::uint64_t rep) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &sigma2, sizeof bits);
  std::uint64_t h = mix64(d);
  h = mix64(h ^ tau);
  h = mix64(h ^ bits);
  h = mix64(h ^ rep);
  return seed_base ^ h;
}

CellSetup make_cell(const ExperimentConfig& cfg, std::uint64_t d, std::uint64_t tau, double sigma2) {
  ProblemSpec spec = cfg.problem;
  spec.dim = d;
  spec.tau = tau;
  spec.sigma_sq = sigma2;
  spec.horizon = std::max<std::uint64_t>(cfg.N, 1);
  auto problem = make_problem(spec);
  const bool smooth = problem->lips_grad().has_value();
  const auto lips = smooth ? problem->lips_grad() : problem->lips_f();
  if (!lips) throw ConfigError("problem has neither a gradient nor a function Lipschitz constant");
  const std::size_t nd = problem->noise_dim();
  const double s = std::sqrt(sigma2 / static_cast<double>(nd));
  const ChainParams noise = cfg.chain_kind == ChainKind::Iid ? ChainParams::iid(nd, s) : ChainParams::lazy(nd, tau, s);
  noise.validate();
  const MomentumParams params =
      derive_params(problem->mu(), *lips, cfg.gamma, cfg.p, cfg.B, cfg.feedback, smooth, cfg.t, d, cfg.N);
  const Vector x0 = problem->minimizer() +
                    Vector::Constant(static_cast<Eigen::Index>(d), std::sqrt(cfg.init_error / static_cast<double>(d)));
  Oracle oracle(problem, cfg.adversary, std::nullopt, cfg.precision);
  Estimator est = cfg.exact_gradient ? make_exact_estimator(problem) : Estimator{};
  return {problem, std::move(oracle), noise, params, x0, std::move(est)};
}

std::vector<CellResult> run_grid(const ExperimentConfig& cfg, const Progress& progress) {
  cfg.validate();
  struct Cell {
    std::uint64_t d, tau;
    double sigma2;
  };
  std::vector<Cell> cells;
  for (double s : cfg.sigma2s)
    for (auto d : cfg.dims)
      for (auto tau : cfg.taus) cells.push_back({d, tau, s});

  std::vector<CellSetup> setups;
  setups.reserve(cells.size());
  for (const auto& c : cells) setups.push_back(make_cell(cfg, c.d, c.tau, c.sigma2));

  struct Outcome {
    double err = 0.0;
    double calls = 0.0;
    bool diverged = false;
  };
  const std::uint64_t reps = cfg.replications;
  std::vector<Outcome> outcomes(cells.size() * reps);
  RunOptions opts;
  opts.record_rows = false;
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(cells.size(), [&](std::size_t ci) {
    const auto& c = cells[ci];
    const auto& s = setups[ci];
    for (std::uint64_t r = 0; r < reps; ++r) {
      Outcome& o = outcomes[ci * reps + r];
      try {
        const RunRecord rec = run(s.oracle, s.noise, s.params, s.x0, cell_seed(cfg.seed, c.d, c.tau, c.sigma2, r), opts, s.estimator);
        o.err = rec.last().err_sq;
        o.calls = static_cast<double>(rec.last().calls);
      } catch (const DivergenceError&) {
        o.diverged = true;
      }
    }
    const std::size_t n = ++done;
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(n, cells.size());
    }
  });

  std::vector<CellResult> out;
  out.reserve(cells.size());
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    CellResult r;
    r.d = cells[ci].d;
    r.tau = cells[ci].tau;
    r.sigma2 = cells[ci].sigma2;
    r.seed_base = cfg.seed;
    RunningStats err, calls;
    for (std::uint64_t k = 0; k < reps; ++k) {
      const Outcome& o = outcomes[ci * reps + k];
      if (o.diverged) {
        ++r.diverged;
        continue;
      }
      err.add(o.err);
      calls.add(o.calls);
    }
    if (r.diverged) {
      r.mean_error = r.se_error = std::numeric_limits<double>::quiet_NaN();
    } else {
      r.mean_error = err.mean();
      r.se_error = err.standard_error();
    }
    r.mean_oracle_calls = calls.n ? calls.mean() : std::numeric_limits<double>::quiet_NaN();
    out.push_back(r);
  }
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_grid_csv(std::ostream& os, const std::vector<CellResult>& cells) {
  os << kGridHeader << '\n';
  for (const auto& c : cells)
    os << c.d << ',' << c.tau << ',' << format_number(c.sigma2) << ',' << format_number(c.mean_error) << ','
       << format_number(c.se_error) << ',' << format_number(c.mean_oracle_calls) << ',' << c.seed_base << '\n';
}

namespace {

// A few stops of a perceptually ordered dark-to-light ramp.
std::string ramp(double u) {
  static const double stops[][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  u = std::clamp(u, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(u));
  const double f = u - i;
  char buf[8];
  int rgb[3];
  for (int k = 0; k < 3; ++k) rgb[k] = static_cast<int>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace

std::string heatmap_svg(const std::vector<CellResult>& cells, double sigma2) {
  std::set<std::uint64_t> ds, taus;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : cells) {
    if (c.sigma2 != sigma2) continue;
    ds.insert(c.d);
    taus.insert(c.tau);
    if (std::isfinite(c.mean_error) && c.mean_error > 0) {
      lo = std::min(lo, c.mean_error);
      hi = std::max(hi, c.mean_error);
    }
  }
  const std::vector<std::uint64_t> dv(ds.begin(), ds.end()), tv(taus.begin(), taus.end());
  const int cell = 48, left = 70, top = 50;
  const int width = left + cell * static_cast<int>(tv.size()) + 130;
  const int height = top + cell * static_cast<int>(dv.size()) + 60;
  const double llo = std::log10(lo), lhi = std::log10(hi);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\" data-sigma2=\"" << format_number(sigma2) << "\">\n";
  os << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">mean |x^N - x*|^2, sigma2 = " << format_number(sigma2)
     << "</text>\n";
  for (std::size_t j = 0; j < tv.size(); ++j)
    os << "<text x=\"" << left + cell * static_cast<int>(j) + cell / 2 << "\" y=\"" << top - 6
       << "\" text-anchor=\"middle\">" << tv[j] << "</text>\n";
  os << "<text x=\"" << left + cell * static_cast<int>(tv.size()) / 2 << "\" y=\"" << height - 16
     << "\" text-anchor=\"middle\">tau (columns), d (rows)</text>\n";
  for (std::size_t i = 0; i < dv.size(); ++i)
    os << "<text x=\"" << left - 8 << "\" y=\"" << top + cell * static_cast<int>(i) + cell / 2 + 4
       << "\" text-anchor=\"end\">" << dv[i] << "</text>\n";
  for (const auto& c : cells) {
    if (c.sigma2 != sigma2) continue;
    const auto i = std::find(dv.begin(), dv.end(), c.d) - dv.begin();
    const auto j = std::find(tv.begin(), tv.end(), c.tau) - tv.begin();
    std::string fill = "#bbbbbb";
    if (std::isfinite(c.mean_error) && c.mean_error > 0)
      fill = ramp(lhi > llo ? (std::log10(c.mean_error) - llo) / (lhi - llo) : 0.5);
    os << "<rect x=\"" << left + cell * j << "\" y=\"" << top + cell * i << "\" width=\"" << cell << "\" height=\""
       << cell << "\" fill=\"" << fill << "\" data-d=\"" << c.d << "\" data-tau=\"" << c.tau << "\" data-value=\""
       << format_number(c.mean_error) << "\"><title>d=" << c.d << " tau=" << c.tau << " error="
       << format_number(c.mean_error) << "</title></rect>\n";
  }
  const int lx = left + cell * static_cast<int>(tv.size()) + 20;
  const int lh = cell * static_cast<int>(dv.size());
  for (int k = 0; k < 20; ++k)
    os << "<rect x=\"" << lx << "\" y=\"" << top + lh - (k + 1) * lh / 20 << "\" width=\"16\" height=\""
       << lh / 20 + 1 << "\" fill=\"" << ramp((k + 0.5) / 20.0) << "\"/>\n";
  if (std::isfinite(lo)) {
    os << "<text x=\"" << lx + 22 << "\" y=\"" << top + 10 << "\">" << format_number(hi) << "</text>\n";
    os << "<text x=\"" << lx + 22 << "\" y=\"" << top + lh << "\">" << format_number(lo) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heatmap_path(const std::string& prefix, double sigma2) {
  return prefix + "_sigma2_" + format_number(sigma2) + ".svg";
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError(path, "write failed");
}

}  // namespace

std::vector<std::string> write_grid_outputs(const ExperimentConfig& cfg, const std::vector<CellResult>& cells) {
  std::vector<std::string> paths;
  auto csv = open_out(cfg.csv_path);
  write_grid_csv(csv, cells);
  close_out(csv, cfg.csv_path);
  paths.push_back(cfg.csv_path);
  for (double s : cfg.sigma2s) {
    const std::string path = heatmap_path(cfg.svg_prefix, s);
    auto svg = open_out(path);
    svg << heatmap_svg(cells, s);
    close_out(svg, path);
    paths.push_back(path);
  }
  return paths;
}

RunRecord run_single(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.dims.size() != 1 || cfg.taus.size() != 1 || cfg.sigma2s.size() != 1)
    throw ConfigError("run needs single values for problem.dim_grid, chain.tau_grid and chain.sigma2_grid");
  const CellSetup s = make_cell(cfg, cfg.dims[0], cfg.taus[0], cfg.sigma2s[0]);
  return run(s.oracle, s.noise, s.params, s.x0, cfg.seed, {}, s.estimator);
}

void write_run_csv(std::ostream& os, const RunRecord& record) {
  os << kRunHeader << '\n';
  for (const auto& r : record.rows)
    os << r.k << ',' << format_number(r.err_sq) << ',' << format_number(r.lyapunov) << ',' << r.calls << '\n';
}

void print_tuning(std::ostream& os, const TuneRequest& req, const TuningResult& res) {
  os << "feedback         " << to_string(req.feedback) << (req.smooth ? ", smooth" : ", non-smooth") << '\n';
  os << "gamma            " << format_number(res.gamma) << '\n';
  os << "t                " << format_number(res.t) << '\n';
  os << "p                " << format_number(res.p) << '\n';
  os << "L_eff            " << format_number(res.L_eff) << '\n';
  os << "delta_max        " << format_number(res.delta_max) << '\n';
  os << "predicted calls  " << format_number(res.predicted_oracle_calls) << '\n';
}

}  // namespace mzo::cli
