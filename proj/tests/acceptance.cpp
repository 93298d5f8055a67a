// Acceptance suite: seven end-to-end checks, one pass/fail line each.
// Exits nonzero if any criterion fails.
#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "geneq/experiment.hpp"
#include "geneq/mreg.hpp"

using namespace geneq;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", idx, name.c_str(),
              detail.c_str());
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ManifoldPoint random_point(const Chart& chart, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  if (chart.kind == ChartKind::Sphere) {
    VectorXd v(chart.n + 1);
    for (int i = 0; i <= chart.n; ++i) v[i] = gauss(rng);
    return make_sphere_point(v / v.norm());
  }
  MatrixXd g(chart.n, chart.n);
  for (int i = 0; i < chart.n; ++i)
    for (int j = 0; j < chart.n; ++j) g(i, j) = gauss(rng);
  return make_spd_point(MatrixXd(g * g.transpose() + 0.5 * MatrixXd::Identity(chart.n, chart.n)));
}

TangentVector random_tangent(const ManifoldPoint& p, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  MatrixXd raw = MatrixXd::NullaryExpr(p.coords.rows(), p.coords.cols(),
                                       [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
  if (p.chart.kind == ChartKind::Sphere) {
    VectorXd v = raw;
    v -= p.coords.col(0).dot(v) * p.coords;
    raw = v;
  } else {
    raw = detail::symmetrize(raw);
  }
  TangentVector t = make_tangent(p, raw);
  double n = norm(t);
  if (n > 0) t.components *= scale / n;
  return t;
}

// --- criterion 1: geometry kernel on seeded random triples ----------------

void criterion_geometry() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  double worst_rt = 0, worst_dist = 0, worst_iso = 0, worst_geo = 0;
  for (const Chart& chart : {sphere_chart(3), spd_chart(2), spd_chart(4)}) {
    for (int trial = 0; trial < 1000; ++trial) {
      ManifoldPoint p = random_point(chart, rng);
      auto v = random_tangent(p, unif(rng), rng);
      ManifoldPoint q = exp_map(p, v);

      auto back = log_map(p, q);
      worst_rt = std::max(worst_rt, (back.components - v.components).norm());
      worst_dist = std::max(worst_dist, std::abs(dist(p, q) - norm(back)));

      auto w = random_tangent(p, unif(rng), rng);
      auto pw = parallel_transport(p, q, w);
      worst_iso = std::max(worst_iso, std::abs(norm(pw) - norm(w)));

      auto [g, vel] = geodesic(p, q, 0.5);
      MatrixXd rhs = log_map(g, q).components - log_map(g, p).components;
      worst_geo = std::max(worst_geo, norm(make_tangent(g, MatrixXd(vel.components - rhs))));
    }
  }
  double dt = seconds_since(t0);
  bool pass = worst_rt <= 1e-9 && worst_dist <= 1e-10 && worst_iso <= 1e-9 &&
              worst_geo <= 1e-9 && dt < 5.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "roundtrip %.2e, dist %.2e, isometry %.2e, geodesic %.2e, %.2fs", worst_rt,
                worst_dist, worst_iso, worst_geo, dt);
  report(1, "geometry suite (3000 seeded triples)", pass, buf);
}

// --- criterion 2: metric-regularity probes --------------------------------

void criterion_mreg() {
  auto t0 = std::chrono::steady_clock::now();
  auto id2 = make_spd_point(MatrixXd::Identity(2, 2));
  bool pass = true;
  std::string detail;
  char buf[128];

  auto run = [&](ProbeMap v, double xmin, double xmax) {
    RegularityProbe probe;
    probe.variant = v;
    probe.n = 2;
    probe.center = id2;
    probe.a = 1.0;
    probe.x_min = xmin;
    probe.x_max = xmax;
    probe.samples = 1000;
    probe.seed = 2024;
    auto rep = verify_regularity(probe);
    std::snprintf(buf, sizeof(buf), "%s:%dv ", to_string(v), rep.violations);
    detail += buf;
    pass = pass && rep.violations == 0 && rep.samples_tested > 0;
  };
  run(ProbeMap::LnTr, -1.0, 1.0);
  run(ProbeMap::InvTr, std::exp(-1.0) / 2.0, std::exp(1.0) / 2.0);
  run(ProbeMap::LnTrSetValued, -1.0, 0.499);
  run(ProbeMap::InvTrSetValued, std::exp(-1.0) / 2.0 + 1e-9, 0.999);

  // tightness at the isotropic point
  double lhs = dist(id2, preimage_witness(ProbeMap::LnTr, std::log(4.0), id2));
  double rhs = std::sqrt(2.0) * std::abs(std::log(4.0) - std::log(2.0));
  bool tight = std::abs(lhs - rhs) <= 1e-12;
  pass = pass && tight;
  double dt = seconds_since(t0);
  pass = pass && dt < 10.0;
  std::snprintf(buf, sizeof(buf), "tightness gap %.2e, %.2fs", std::abs(lhs - rhs), dt);
  report(2, "metric-regularity probes (4 maps, 1000 samples each)", pass, detail + buf);
}

// --- criterion 3: constrained center-of-mass reproduction -----------------

void criterion_karcher_cases() {
  auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail;
  double n500_time = 0;
  struct CaseSpec {
    const char* name;
    int N;
    double r;
    bool active;
  } cases[] = {{"A1", 10, 2.0, false},
               {"A2", 500, 2.0, false},
               {"A3", 10, 0.1, true},
               {"A4", 500, 0.1, true}};
  for (const auto& cs : cases) {
    auto tc = std::chrono::steady_clock::now();
    ExperimentConfig cfg;
    cfg.kind = "karcher_kkt";
    cfg.name = cs.name;
    cfg.kv = {{"N", std::to_string(cs.N)}, {"r", std::to_string(cs.r)}, {"seed", "2024"}};
    auto res = run_case(cfg);
    if (cs.N == 500) n500_time = std::max(n500_time, seconds_since(tc));
    bool ok = res.row.status == SolveStatus::Converged && res.row.iterations <= 30 &&
              res.report.history.back().norm_phi <= 1e-12 &&
              res.row.grad_lagrangian_norm <= 1e-12;
    if (cs.active)
      ok = ok && res.row.mu_star > 0.0 && std::abs(res.row.g_star) <= 1e-12 &&
           std::abs(res.row.mu_g) <= 1e-10;
    else
      ok = ok && res.row.mu_star == 0.0 && res.row.g_star < 0.0;
    const auto& h = res.report.history;
    for (size_t i = h.size() >= 5 ? h.size() - 5 : 0; i + 1 < h.size(); ++i)
      ok = ok && h[i + 1].norm_phi < h[i].norm_phi;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s:%s(%d it) ", cs.name,
                  ok ? "ok" : to_string(res.row.status), res.row.iterations);
    detail += buf;
    pass = pass && ok;
  }
  pass = pass && n500_time < 5.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "N=500 worst %.2fs, total %.2fs", n500_time,
                seconds_since(t0));
  report(3, "constrained center-of-mass cases A1-A4", pass, detail + buf);
}

// --- criterion 4: rate dichotomy -------------------------------------------

void criterion_rates() {
  bool pass = true;
  std::string detail;
  char buf[128];

  GenEqProblem scalar = scalar_benchmark_problem();
  State start = State::plain(make_euclid_point(VectorXd::Constant(1, 1.0)));
  auto rows = run_rate_study(scalar, start, scalar.known_solution, 0.1);
  bool exact_q = rows[0].estimate.order >= 1.8;
  bool lin = rows[2].estimate.order >= 0.8 && rows[2].estimate.order <= 1.2 &&
             rows[2].estimate.theta < 1.0;
  bool prox_q = rows[3].estimate.order >= 1.8;
  std::snprintf(buf, sizeof(buf), "scalar exact %.2f, proxlin %.2f (theta %.2f), proxquad %.2f",
                rows[0].estimate.order, rows[2].estimate.order, rows[2].estimate.theta,
                rows[3].estimate.order);
  detail += buf;
  pass = exact_q && lin && prox_q;

  ExperimentConfig cfg;
  cfg.kind = "karcher_kkt";
  cfg.kv = {{"N", "10"}, {"r", "2"}, {"seed", "2024"}};
  auto pilot = run_case(cfg);
  TangentVector dir = log_map(pilot.report.final_state.p, pilot.points.front());
  dir.components *= 1.2 / norm(dir);
  State kt{exp_map(pilot.report.final_state.p, dir), VectorXd::Zero(1)};
  auto krows = run_rate_study(pilot.problem, kt, pilot.report.final_state, 0.1);
  std::snprintf(buf, sizeof(buf), "; karcher exact %.2f", krows[0].estimate.order);
  detail += buf;
  pass = pass && krows[0].estimate.order >= 1.8;
  report(4, "rate dichotomy (scalar + center-of-mass)", pass, detail);
}

// --- criterion 5: semi-local certificate and radius arithmetic -------------

void criterion_certificate() {
  GenEqProblem prob = scalar_benchmark_problem();
  State start = State::plain(make_euclid_point(VectorXd::Constant(1, 1.4)));
  SolveReport rep = solve(prob, start, InexactnessRule::exact());
  VectorXd y0 = -prob.f.eval(start);

  SemiLocalConstants good{0.5, 0.1, 1.0, 0.5, 0.6, 0.5, 0.05, 1.0, 2.0, 2.0};
  auto cert = semilocal_certificate(good, y0, VectorXd::Zero(1), rep);
  bool pass = cert.valid && cert.all_pass;

  SemiLocalConstants diverging = good;
  diverging.theta = 2.0;
  diverging.eps = diverging.iota = 0.3;  // alpha_hat = 1.2
  auto bad = semilocal_certificate(diverging, y0, VectorXd::Zero(1), rep);
  pass = pass && !bad.valid;

  bool radius_ok = local_radius_linear(0.1, 0.05, 0.05, 1.0, 0.5) == 0.5 &&
                   std::abs(local_radius_linear(0.02, 0.08, 0.02, 1.0, 1.0) - 0.2) < 1e-15 &&
                   std::abs(local_radius_quadratic(0.09, 0.8, 0.1, 0.1, 2.0, 1.0, 1.0) -
                            std::sqrt(0.1)) < 1e-15;
  bool radius_err = false;
  try {
    local_radius_quadratic(0.09, 0.8, 0.1, 0.5, 2.0, 1.0, 1.0);
  } catch (const std::invalid_argument&) {
    radius_err = true;
  }
  pass = pass && radius_ok && radius_err;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "valid+%s, invalid flagged:%s, radii exact:%s",
                cert.all_pass ? "all-pass" : "bound-violated", bad.valid ? "no" : "yes",
                radius_ok && radius_err ? "yes" : "no");
  report(5, "semi-local certificate and radius bounds", pass, buf);
}

// --- criterion 6: subsolver oracle equivalence ------------------------------

double grid_oracle_1slot(const StepRequest& req) {
  const int n = static_cast<int>(req.J.cols()) - 1;
  MatrixXd A = req.J.leftCols(n);
  auto min_over_alpha = [&](const VectorXd& b) {
    VectorXd alpha = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    return 0.5 * (A * alpha - b).squaredNorm();
  };
  double best = std::numeric_limits<double>::infinity();
  for (int z_ray = 0; z_ray < 2; ++z_ray) {
    double lo = z_ray ? 0.0 : -req.mu[0], hi = 50.0, at = lo;
    const int G = 2000;
    for (int level = 0; level < 4; ++level) {
      for (int i = 0; i <= G; ++i) {
        double t = lo + (hi - lo) * i / G;
        VectorXd b = req.u - req.c - (z_ray ? -req.mu[0] : t) * req.J.col(n);
        b[req.slots[0]] -= z_ray ? t : 0.0;
        double o = min_over_alpha(b);
        if (o < best) best = o;
        if (o <= best) at = t;
      }
      double w = 2.0 * (hi - lo) / G;
      lo = std::max(z_ray ? 0.0 : -req.mu[0], at - w);
      hi = at + w;
    }
  }
  return best;
}

void criterion_subsolver_oracle() {
  std::mt19937_64 rng(606);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int solved = 0, mismatches = 0, comp_fail = 0;
  double worst_gap = 0;
  while (solved < 200) {
    StepRequest req;
    req.J = MatrixXd::NullaryExpr(3, 3, [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
    req.J += 2.0 * MatrixXd::Identity(3, 3);
    req.c = VectorXd::NullaryExpr(3, [&](Eigen::Index) { return gauss(rng); });
    req.u = 0.1 * VectorXd::NullaryExpr(3, [&](Eigen::Index) { return gauss(rng); });
    req.mu = VectorXd::Constant(1, solved % 2 ? 0.0 : unif(rng));
    req.slots = {2};
    StepResult res;
    try {
      res = solve_kkt_step(req);
    } catch (const SubproblemInfeasibleError&) {
      continue;
    }
    ++solved;
    if (std::abs(res.z[0] * (req.mu[0] + res.nu[0])) > 1e-12) ++comp_fail;
    double gap = std::abs(grid_oracle_1slot(req) - res.objective);
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-6) ++mismatches;
  }
  bool pass = mismatches == 0 && comp_fail == 0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "200 instances, worst objective gap %.2e, %d mismatches",
                worst_gap, mismatches);
  report(6, "subsolver grid-oracle equivalence", pass, buf);
}

// --- criterion 7: linearization bounds --------------------------------------

void criterion_linearization() {
  std::mt19937_64 rng(707);
  ManifoldPoint center = random_point(sphere_chart(3), rng);
  std::vector<ManifoldPoint> pts;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 5; ++i)
    pts.push_back(exp_map(center, random_tangent(center, 0.5 * unif(rng), rng)));
  GenEqProblem prob = build_constrained_karcher(pts, center, 1.0);
  State pbar{center, VectorXd::Constant(1, 0.2)};
  VectorXd fbar = prob.f.eval(pbar);
  MatrixXd J = differential_matrix(prob, pbar);
  auto basis = frame_at(prob.frame, pbar.p);

  auto quad_ratio = [&](double radius) {
    double worst = 0;
    std::mt19937_64 local(808);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int s = 0; s < 60; ++s) {
      State st{exp_map(center, random_tangent(center, radius * u(local), local)), pbar.mu};
      TangentVector lg = log_map(pbar.p, st.p);
      VectorXd coeff = VectorXd::Zero(4);
      for (int j = 0; j < 3; ++j) coeff[j] = inner(lg, basis[static_cast<size_t>(j)]);
      double d = dist(pbar.p, st.p);
      if (d < 1e-12) continue;
      worst = std::max(worst, (prob.f.eval(st) - fbar - J * coeff).norm() / (d * d));
    }
    return worst;
  };
  double coarse = quad_ratio(1e-1), fine = quad_ratio(1e-4);
  bool quad_ok = fine <= 2.0 * coarse;

  auto two_point = [&](double radius) {
    double worst = 0;
    std::mt19937_64 local(909);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int s = 0; s < 40; ++s) {
      ManifoldPoint p = exp_map(center, random_tangent(center, radius * u(local), local));
      ManifoldPoint pa = exp_map(center, random_tangent(center, radius * u(local), local));
      ManifoldPoint pb = exp_map(center, random_tangent(center, radius * u(local), local));
      double d = dist(pa, pb);
      if (d < 1e-12) continue;
      State st{p, pbar.mu};
      MatrixXd Jp = differential_matrix(prob, st);
      auto b = frame_at(prob.frame, p);
      auto coeffs = [&](const std::vector<TangentVector>& bas, const ManifoldPoint& at) {
        TangentVector da = log_map(at, pa);
        da.components -= log_map(at, pb).components;
        VectorXd c = VectorXd::Zero(4);
        for (int j = 0; j < 3; ++j) c[j] = inner(da, bas[static_cast<size_t>(j)]);
        return c;
      };
      worst = std::max(worst, (Jp * coeffs(b, p) - J * coeffs(basis, pbar.p)).norm() / d);
    }
    return worst;
  };
  double r1 = two_point(1e-1), r2 = two_point(1e-2), r3 = two_point(1e-3);
  bool mono = r2 < r1 && r3 < r2;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "quad ratio %.3g -> %.3g; two-point %.2e > %.2e > %.2e (%s)", coarse, fine, r1,
                r2, r3, mono ? "monotone" : "not monotone");
  report(7, "linearization bounds for the center-of-mass field", quad_ok && mono, buf);
}

}  // namespace

int main() {
  criterion_geometry();
  criterion_mreg();
  criterion_karcher_cases();
  criterion_rates();
  criterion_certificate();
  criterion_subsolver_oracle();
  criterion_linearization();
  if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
  else std::printf("all 7 criteria passed\n");
  return g_failures ? 1 : 0;
}
