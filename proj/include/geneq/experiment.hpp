/**
 * Configuration-driven experiment runner: constrained center-of-mass cases
 * on S^3, scalar rate studies, metric-regularity probes and semi-local
 * certificate checks, with deterministic seeded sampling and table/CSV
 * output.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "geneq/mreg.hpp"
#include "geneq/newton.hpp"
#include "geneq/problem.hpp"

namespace geneq {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic uniform(0,1) doubles from a 64-bit generator; bit-stable
/// across platforms (unlike uniform_real_distribution).
struct Rng01 {
  std::mt19937_64 engine;
  explicit Rng01(std::uint64_t seed) : engine(seed) {}
  double next() { return double(engine() >> 11) * 0x1.0p-53; }
};

// ---------------------------------------------------------------------------
// Config files: flat "key = value" lines, '#' comments, one experiment each.

struct ExperimentConfig {
  std::string kind;  // karcher_kkt | scalar_rate_study | mreg_probe | semilocal_check
  std::string name{"case"};
  std::map<std::string, std::string> kv;

  bool has(const std::string& k) const { return kv.count(k) > 0; }
  std::string str(const std::string& k, const std::string& dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
  }
  double num(const std::string& k, double dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stod(it->second);
  }
  double num_required(const std::string& k) const {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("missing required config key: " + k);
    return std::stod(it->second);
  }
};

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) cfg.kv[key] = val;
  }
  cfg.kind = cfg.str("kind", "");
  if (cfg.kind.empty()) throw ConfigError("config missing 'kind'");
  cfg.name = cfg.str("name", cfg.kind);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

inline InexactnessRule rule_from_config(const ExperimentConfig& cfg,
                                        const std::optional<State>& reference) {
  std::string rule = cfg.str("rule", "fixed_decay");
  if (rule == "exact") return InexactnessRule::exact();
  if (rule == "fixed_decay")
    return InexactnessRule::fixed_decay(cfg.num("rule_c", 1.0), cfg.num("rule_rho", 0.1));
  if (rule == "relative") {
    std::vector<double> eta;
    std::istringstream is(cfg.str("rule_eta", "0.5"));
    for (double e; is >> e;) eta.push_back(e);
    return InexactnessRule::relative_ball(eta);
  }
  if (rule == "proximity_linear" || rule == "proximity_quadratic") {
    if (!reference) throw ConfigError("proximity rules require a reference solution");
    double iota = cfg.num("rule_iota", 0.1);
    return rule == "proximity_linear"
               ? InexactnessRule::proximity_linear(iota, *reference)
               : InexactnessRule::proximity_quadratic(iota, *reference);
  }
  throw ConfigError("unknown rule: " + rule);
}

// ---------------------------------------------------------------------------
// Constrained center-of-mass cases.

struct SummaryRow {
  std::string name;
  SolveStatus status{SolveStatus::MaxIters};
  VectorXd p_star;
  double mu_star{0.0};
  double g_star{0.0};
  double mu_g{0.0};
  double grad_lagrangian_norm{0.0};
  int iterations{0};
  std::string message;
};

/// Sample points as uniform(0,1)^4 coordinates normalized to the unit
/// sphere; the starting point is the first sample.
inline std::vector<ManifoldPoint> sample_sphere_cloud(int N, Rng01& rng) {
  std::vector<ManifoldPoint> pts;
  pts.reserve(N);
  for (int i = 0; i < N; ++i) {
    VectorXd v(4);
    for (int j = 0; j < 4; ++j) v[j] = rng.next();
    pts.push_back(make_sphere_point(v / v.norm()));
  }
  return pts;
}

struct CaseResult {
  SummaryRow row;
  SolveReport report;
  GenEqProblem problem;
  std::vector<ManifoldPoint> points;
  ManifoldPoint center;
};

inline CaseResult run_case(const ExperimentConfig& cfg) {
  const int N = static_cast<int>(cfg.num("N", 10));
  const double r = cfg.num("r", 2.0);
  if (N < 1 || r <= 0) throw ConfigError("run_case: need N >= 1 and r > 0");
  const auto seed = static_cast<std::uint64_t>(cfg.num("seed", 2024));
  VectorXd ctr(4);
  ctr << 0, 0, 0, 1;
  if (cfg.has("center")) {
    std::istringstream is(cfg.str("center", ""));
    for (int j = 0; j < 4; ++j) is >> ctr[j];
  }
  ManifoldPoint center = make_sphere_point(ctr / ctr.norm());

  Rng01 rng(seed);
  auto points = sample_sphere_cloud(N, rng);
  GenEqProblem problem = build_constrained_karcher(points, center, r);

  State start{points.front(), VectorXd::Zero(1)};  // p0 = p^1, mu0 = 0
  StopCriteria stop;
  stop.tol_phi = cfg.num("tol_phi", 1e-12);
  stop.tol_g = cfg.num("tol_g", 1e-12);
  stop.max_iters = static_cast<int>(cfg.num("max_iters", 100));
  if (stop.tol_phi <= 0 || stop.tol_g <= 0) throw ConfigError("tolerances must be positive");

  InexactnessRule rule = rule_from_config(cfg, std::nullopt);
  SolveReport report = solve(problem, start, rule, stop);

  SummaryRow row;
  row.name = cfg.name;
  row.status = report.status;
  row.p_star = report.final_state.p.coords;
  row.mu_star = report.final_state.mu[0];
  VectorXd fv = problem.f.eval(report.final_state);
  row.g_star = fv[3];
  row.mu_g = row.mu_star * row.g_star;
  row.grad_lagrangian_norm = fv.head(3).norm();
  row.iterations = report.iterations;
  row.message = report.error_message;
  return {std::move(row), std::move(report), std::move(problem), std::move(points),
          std::move(center)};
}

// ---------------------------------------------------------------------------
// Rate studies.

/// The scalar benchmark f(p) = p^2 - 2 on the line, with root sqrt(2).
inline GenEqProblem scalar_benchmark_problem() {
  Chart chart = euclid_chart(1);
  SmoothMap f;
  f.m = 1;
  f.eval = [](const State& st) {
    VectorXd out(1);
    out[0] = st.p.coords(0, 0) * st.p.coords(0, 0) - 2.0;
    return out;
  };
  f.grad_p = [](const State& st) {
    VectorXd g(1);
    g[0] = 2.0 * st.p.coords(0, 0);
    return std::vector<TangentVector>{{st.p, g}};
  };
  return GenEqProblem{chart, std::move(f), SetValuedPart::zero(), make_frame(chart),
                      State::plain(make_euclid_point(VectorXd::Constant(1, std::sqrt(2.0)))),
                      std::numeric_limits<double>::infinity()};
}

struct RateStudyRow {
  std::string rule_name;
  RateEstimate estimate;
  SolveStatus status;
  int iterations;
};

/// Runs the same problem under the four rule families and tabulates the
/// estimated orders; `reference` supplies pbar for the proximity rules and
/// the distance series.
inline std::vector<RateStudyRow> run_rate_study(const GenEqProblem& problem, const State& start,
                                                const std::optional<State>& reference,
                                                double iota = 0.1,
                                                const StopCriteria& stop = {}) {
  std::optional<State> ref = reference;
  if (!ref) {
    // Obtain a reference from a converged exact run.
    SolveReport pilot = solve(problem, start, InexactnessRule::exact(), stop);
    if (pilot.status != SolveStatus::Converged)
      throw std::runtime_error("run_rate_study: pilot run failed to converge");
    ref = pilot.final_state;
  }
  std::vector<std::pair<std::string, InexactnessRule>> rules = {
      {"exact", InexactnessRule::exact()},
      {"fixed_decay", InexactnessRule::fixed_decay(1.0, 0.1)},
      {"proximity_linear", InexactnessRule::proximity_linear(iota, *ref)},
      {"proximity_quadratic", InexactnessRule::proximity_quadratic(iota, *ref)},
  };
  std::vector<RateStudyRow> rows;
  for (auto& [name, rule] : rules) {
    SolveReport rep = solve(problem, start, rule, stop);
    RateStudyRow row{name, {}, rep.status, rep.iterations};
    try {
      row.estimate = estimate_rate(rep, ref);
    } catch (const std::exception&) {
      row.estimate.classification = RateClass::Inconclusive;  // flagged, not fatal
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output emission.

inline std::string format_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%-10s %-12s %-38s %-12s %-13s %-13s %-13s %s\n", "case",
                "status", "p_star", "mu_star", "g(p_star)", "mu*g", "norm_gradL", "iters");
  os << buf;
  for (const auto& r : rows) {
    std::ostringstream ps;
    ps << "[";
    for (int i = 0; i < r.p_star.size(); ++i)
      ps << (i ? "," : "") << std::setprecision(4) << std::fixed << r.p_star[i];
    ps << "]";
    std::snprintf(buf, sizeof(buf), "%-10s %-12s %-38s %-12.6g %-13.6g %-13.6g %-13.6g %d\n",
                  r.name.c_str(), to_string(r.status), ps.str().c_str(), r.mu_star, r.g_star,
                  r.mu_g, r.grad_lagrangian_norm, r.iterations);
    os << buf;
  }
  return os.str();
}

inline std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "case,status,p1,p2,p3,p4,mu_star,g_star,mu_g,norm_gradL,iterations\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.name.c_str(),
                  to_string(r.status), r.p_star[0], r.p_star[1], r.p_star[2], r.p_star[3],
                  r.mu_star, r.g_star, r.mu_g, r.grad_lagrangian_norm, r.iterations);
    os << buf;
  }
  return os.str();
}

/// Writes the aligned summary, its CSV twin and per-case iteration CSVs.
/// Returns true iff every case converged.
inline bool emit_outputs(const std::vector<SummaryRow>& rows,
                         const std::vector<const SolveReport*>& histories,
                         const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream os(out_dir / "summary.txt");
    if (!os) throw std::runtime_error("emit_outputs: cannot write summary.txt");
    os << format_summary_table(rows);
  }
  {
    std::ofstream os(out_dir / "summary.csv");
    if (!os) throw std::runtime_error("emit_outputs: cannot write summary.csv");
    os << format_summary_csv(rows);
  }
  bool all_converged = true;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (i < histories.size() && histories[i])
      write_history_csv(*histories[i], (out_dir / (rows[i].name + "_history.csv")).string());
    all_converged &= rows[i].status == SolveStatus::Converged;
  }
  return all_converged;
}

}  // namespace geneq
