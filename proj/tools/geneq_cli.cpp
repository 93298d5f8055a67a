// Command-line front end: run (constrained center-of-mass cases), rates
// (rate studies), mreg (metric-regularity probes), certify (semi-local
// certificate checks). Exit codes: 0 success, 1 solver failure, 2 config
// error.
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "geneq/experiment.hpp"

namespace {

using namespace geneq;

struct CommonOpts {
  std::string config_path;
  std::string out_dir{"out"};
  long long seed_override{-1};
};

ExperimentConfig load_with_overrides(const CommonOpts& opts, const std::string& expected_kind) {
  ExperimentConfig cfg = load_config(opts.config_path);
  if (cfg.kind != expected_kind)
    throw ConfigError("config kind '" + cfg.kind + "' does not match subcommand (expected '" +
                      expected_kind + "')");
  if (opts.seed_override >= 0) cfg.kv["seed"] = std::to_string(opts.seed_override);
  return cfg;
}

int cmd_run(const CommonOpts& opts) {
  ExperimentConfig cfg = load_with_overrides(opts, "karcher_kkt");
  CaseResult res = run_case(cfg);
  std::vector<SummaryRow> rows{res.row};
  std::vector<const SolveReport*> hist{&res.report};
  bool ok = emit_outputs(rows, hist, opts.out_dir);
  std::cout << format_summary_table(rows);
  return ok ? 0 : 1;
}

int cmd_rates(const CommonOpts& opts) {
  ExperimentConfig cfg = load_with_overrides(opts, "scalar_rate_study");
  StopCriteria stop;
  stop.tol_phi = cfg.num("tol_phi", 1e-12);
  stop.tol_g = cfg.num("tol_g", 1e-12);
  stop.max_iters = static_cast<int>(cfg.num("max_iters", 100));
  double iota = cfg.num("rule_iota", 0.1);

  GenEqProblem problem;
  State start;
  std::optional<State> reference;
  std::string problem_name = cfg.str("problem", "scalar");
  if (problem_name == "scalar") {
    problem = scalar_benchmark_problem();
    start = State::plain(make_euclid_point(VectorXd::Constant(1, cfg.num("p0", 1.0))));
    reference = problem.known_solution;
  } else if (problem_name == "karcher") {
    CaseResult pilot = run_case(cfg);
    if (pilot.row.status != SolveStatus::Converged) {
      std::cerr << "rates: pilot case did not converge: " << pilot.row.message << "\n";
      return 1;
    }
    problem = std::move(pilot.problem);
    start = State{pilot.points.front(), VectorXd::Zero(1)};
    reference = pilot.report.final_state;
  } else {
    throw ConfigError("unknown problem for rate study: " + problem_name);
  }

  auto rows = run_rate_study(problem, start, reference, iota, stop);
  std::filesystem::create_directories(opts.out_dir);
  std::ofstream os(std::filesystem::path(opts.out_dir) / "rates.csv");
  os << "rule,status,iterations,order,theta,classification,samples\n";
  std::printf("%-22s %-12s %6s %10s %10s %-14s\n", "rule", "status", "iters", "order", "theta",
              "class");
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.17g,%.17g,%s,%d\n", r.rule_name.c_str(),
                  to_string(r.status), r.iterations, r.estimate.order, r.estimate.theta,
                  to_string(r.estimate.classification), r.estimate.samples);
    os << buf;
    std::printf("%-22s %-12s %6d %10.4f %10.4f %-14s\n", r.rule_name.c_str(),
                to_string(r.status), r.iterations, r.estimate.order, r.estimate.theta,
                to_string(r.estimate.classification));
  }
  for (const auto& r : rows)
    if (r.status != SolveStatus::Converged) return 1;
  return 0;
}

ProbeMap probe_map_from_string(const std::string& s) {
  if (s == "ln_tr") return ProbeMap::LnTr;
  if (s == "inv_tr") return ProbeMap::InvTr;
  if (s == "ln_tr_set_valued") return ProbeMap::LnTrSetValued;
  if (s == "inv_tr_set_valued") return ProbeMap::InvTrSetValued;
  throw ConfigError("unknown probe variant: " + s);
}

int cmd_mreg(const CommonOpts& opts) {
  ExperimentConfig cfg = load_with_overrides(opts, "mreg_probe");
  RegularityProbe probe;
  probe.variant = probe_map_from_string(cfg.str("variant", "ln_tr"));
  probe.n = static_cast<int>(cfg.num("n", 2));
  probe.a = cfg.num("a", 1.0);
  probe.sigma = cfg.num("sigma", 0.0);
  probe.x_min = cfg.num("x_min", -1.0);
  probe.x_max = cfg.num("x_max", 1.0);
  probe.samples = static_cast<int>(cfg.num("samples", 1000));
  probe.seed = static_cast<std::uint64_t>(cfg.num("seed", 2024));
  probe.center = make_spd_point(MatrixXd::Identity(probe.n, probe.n));

  ProbeReport report = verify_regularity(probe);
  nlohmann::json j = to_json(report);
  std::filesystem::create_directories(opts.out_dir);
  std::ofstream os(std::filesystem::path(opts.out_dir) / "probe_report.json");
  os << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return report.violations == 0 ? 0 : 1;
}

int cmd_certify(const CommonOpts& opts) {
  ExperimentConfig cfg = load_with_overrides(opts, "semilocal_check");
  SemiLocalConstants c{};
  c.sigma = cfg.num_required("sigma");
  c.mu = cfg.num_required("mu");
  c.alpha = cfg.num_required("alpha");
  c.beta = cfg.num_required("beta");
  c.theta = cfg.num_required("theta");
  c.eps = cfg.num_required("eps");
  c.iota = cfg.num_required("iota");
  c.delta = cfg.num_required("delta");
  c.a = cfg.num("a", std::numeric_limits<double>::infinity());
  c.b = cfg.num("b", std::numeric_limits<double>::infinity());

  GenEqProblem problem = scalar_benchmark_problem();
  State start = State::plain(make_euclid_point(VectorXd::Constant(1, cfg.num("p0", 1.4))));
  StopCriteria stop;
  stop.max_iters = static_cast<int>(cfg.num("max_iters", 100));
  SolveReport report = solve(problem, start, rule_from_config(cfg, problem.known_solution), stop);

  VectorXd y0 = -problem.f.eval(start);
  VectorXd u0 = VectorXd::Zero(1);
  SemiLocalCertificate cert = semilocal_certificate(c, y0, u0, report);

  nlohmann::json j{{"valid", cert.valid},
                   {"invalid_reason", cert.invalid_reason},
                   {"all_pass", cert.all_pass},
                   {"alpha_hat", c.alpha_hat()},
                   {"iterations", report.iterations},
                   {"status", to_string(report.status)}};
  std::filesystem::create_directories(opts.out_dir);
  std::ofstream os(std::filesystem::path(opts.out_dir) / "certificate.json");
  os << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return (cert.valid && cert.all_pass && report.status == SolveStatus::Converged) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized-equation solver and experiment runner"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string verb;
  for (const char* name : {"run", "rates", "mreg", "certify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config_path, "experiment config file")->required();
    sub->add_option("--seed", opts.seed_override, "override the config seed");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->callback([&verb, name] { verb = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verb == "run") return cmd_run(opts);
    if (verb == "rates") return cmd_rates(opts);
    if (verb == "mreg") return cmd_mreg(opts);
    if (verb == "certify") return cmd_certify(opts);
  } catch (const geneq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
