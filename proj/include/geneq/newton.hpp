/**
 * Inexact Newton driver for generalized equations on manifolds:
 *   p_{k+1} = exp_{p_k} v_k  with
 *   (f(p_k) + Df(p_k)[v_k] + F(exp_{p_k} v_k)) ∩ R_k(p_k) != ∅,
 * pluggable inexactness rules R_k, convergence-rate estimation, and the
 * radius / semi-local certificates.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geneq/problem.hpp"
#include "geneq/subsolver.hpp"

namespace geneq {

// ---------------------------------------------------------------------------
// Inexactness rules R_k and their deterministic selectors.

struct InexactnessRule {
  enum class Kind { Exact, FixedDecay, RelativeBall, ProximityLinear, ProximityQuadratic };
  Kind kind{Kind::Exact};
  double c{1.0};                     // FixedDecay: u_k = c rho^k (1,...,1)
  double rho{0.1};
  std::vector<double> eta;           // RelativeBall forcing sequence
  bool relative_extreme{false};      // RelativeBall: pick the bound-scaled extreme
  double iota{0.1};                  // Proximity rules
  std::optional<State> reference;    // pbar for proximity rules

  static InexactnessRule exact() { return {}; }
  static InexactnessRule fixed_decay(double c, double rho) {
    InexactnessRule r;
    r.kind = Kind::FixedDecay;
    r.c = c;
    r.rho = rho;
    return r;
  }
  static InexactnessRule relative_ball(std::vector<double> eta, bool extreme = false) {
    InexactnessRule r;
    r.kind = Kind::RelativeBall;
    r.eta = std::move(eta);
    r.relative_extreme = extreme;
    return r;
  }
  static InexactnessRule proximity_linear(double iota, State reference) {
    InexactnessRule r;
    r.kind = Kind::ProximityLinear;
    r.iota = iota;
    r.reference = std::move(reference);
    return r;
  }
  static InexactnessRule proximity_quadratic(double iota, State reference) {
    InexactnessRule r;
    r.kind = Kind::ProximityQuadratic;
    r.iota = iota;
    r.reference = std::move(reference);
    return r;
  }

  /// Deterministic u_k in R_k(p_k).
  VectorXd select(int k, const State& state, const VectorXd& fval) const {
    const int m = static_cast<int>(fval.size());
    switch (kind) {
      case Kind::Exact:
        return VectorXd::Zero(m);
      case Kind::FixedDecay:
        return c * std::pow(rho, k) * VectorXd::Ones(m);
      case Kind::RelativeBall: {
        if (!relative_extreme) return VectorXd::Zero(m);
        double e = k < static_cast<int>(eta.size()) ? eta[k] : eta.back();
        return e * fval.norm() / std::sqrt(double(m)) * VectorXd::Ones(m);
      }
      case Kind::ProximityLinear: {
        double d = state_dist(state, *reference);
        return iota * d * (1.0 - 1e-9) / std::sqrt(double(m)) * VectorXd::Ones(m);
      }
      case Kind::ProximityQuadratic: {
        double d = state_dist(state, *reference);
        return iota * d * d * (1.0 - 1e-9) / std::sqrt(double(m)) * VectorXd::Ones(m);
      }
    }
    return VectorXd::Zero(m);
  }

  /// The admissible bound ||u|| must satisfy at iteration k (for post-hoc
  /// conformance checks); infinity when the rule prescribes u exactly.
  double bound(int k, const State& state, const VectorXd& fval) const {
    switch (kind) {
      case Kind::Exact:
        return 0.0;
      case Kind::FixedDecay:
        return c * std::pow(rho, k) * std::sqrt(double(fval.size()));
      case Kind::RelativeBall: {
        double e = k < static_cast<int>(eta.size()) ? eta[k] : eta.back();
        return e * fval.norm();
      }
      case Kind::ProximityLinear:
        return iota * state_dist(state, *reference);
      case Kind::ProximityQuadratic: {
        double d = state_dist(state, *reference);
        return iota * d * d;
      }
    }
    return 0.0;
  }
};

// ---------------------------------------------------------------------------
// Iteration records and reports.

struct IterateRecord {
  int k{0};
  State state;
  double norm_phi{0.0};       // norm of the non-slot rows of f
  VectorXd g_values;          // slot rows (constraints)
  double full_residual{0.0};  // d_e(0, f+F)
  double step_norm{0.0};      // ||v_k|| (product norm incl. nu)
  double u_norm{0.0};
  double dist_to_final{0.0};  // filled post-hoc
};

enum class SolveStatus { Converged, MaxIters, SubproblemInfeasible, GeometryError };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::SubproblemInfeasible: return "SubproblemInfeasible";
    case SolveStatus::GeometryError: return "GeometryError";
  }
  return "?";
}

struct SolveReport {
  SolveStatus status{SolveStatus::MaxIters};
  std::vector<IterateRecord> history;
  State final_state;
  int iterations{0};
  std::string error_message;
};

struct StopCriteria {
  double tol_phi{1e-12};
  double tol_g{1e-12};
  int max_iters{100};
};

namespace detail {
constexpr double kSphereStepGuard = M_PI - 1e-6;
}

/// Runs the inexact Newton iteration. History holds one record per visited
/// iterate (including the final one); solver errors are returned in the
/// status with the partial history attached.
inline SolveReport solve(const GenEqProblem& problem, const State& start,
                         const InexactnessRule& rule, const StopCriteria& stop = {}) {
  SolveReport report;
  State state = start;
  const auto phi_rows = problem.phi_rows();
  const int m1 = problem.m1();

  auto record_iterate = [&](int k, const VectorXd& fval) {
    IterateRecord rec;
    rec.k = k;
    rec.state = state;
    double sq = 0.0;
    for (int i : phi_rows) sq += fval[i] * fval[i];
    rec.norm_phi = std::sqrt(sq);
    rec.g_values.resize(m1);
    for (int t = 0; t < m1; ++t) rec.g_values[t] = fval[problem.F.slots[t]];
    rec.full_residual = residual(problem, state);
    report.history.push_back(std::move(rec));
  };

  try {
    for (int k = 0; k <= stop.max_iters; ++k) {
      VectorXd fval = problem.f.eval(state);
      record_iterate(k, fval);

      bool phi_ok = report.history.back().norm_phi <= stop.tol_phi;
      bool g_ok = true;
      for (int t = 0; t < m1; ++t) g_ok &= (report.history.back().g_values[t] <= stop.tol_g);
      if (phi_ok && g_ok) {
        report.status = SolveStatus::Converged;
        break;
      }
      if (k == stop.max_iters) {
        report.status = SolveStatus::MaxIters;
        break;
      }

      VectorXd u = rule.select(k, state, fval);
      report.history.back().u_norm = u.norm();

      StepRequest req{differential_matrix(problem, state), fval, u, state.mu, problem.F.slots};
      StepResult step = m1 > 0 ? solve_kkt_step(req) : solve_linear_step(req);

      auto basis = frame_at(problem.frame, state.p);
      TangentVector v = zero_tangent(state.p);
      for (size_t j = 0; j < basis.size(); ++j) v.components += step.alpha[j] * basis[j].components;
      double vn = norm(v);
      if (state.p.chart.kind == ChartKind::Sphere && vn >= detail::kSphereStepGuard)
        throw GeometryError("solve: sphere step too long");
      report.history.back().step_norm = std::sqrt(vn * vn + step.nu.squaredNorm());

      state.p = exp_map(state.p, v);
      state.mu += step.nu;
    }
  } catch (const SubproblemInfeasibleError& e) {
    report.status = SolveStatus::SubproblemInfeasible;
    report.error_message = e.what();
  } catch (const GeometryError& e) {
    report.status = SolveStatus::GeometryError;
    report.error_message = e.what();
  } catch (const SingularStepError& e) {
    report.status = SolveStatus::SubproblemInfeasible;
    report.error_message = e.what();
  }

  report.final_state = state;
  report.iterations = static_cast<int>(report.history.size()) - 1;
  for (auto& rec : report.history) rec.dist_to_final = state_dist(rec.state, state);
  return report;
}

// ---------------------------------------------------------------------------
// Convergence-rate estimation.

enum class RateClass { Linear, Superlinear, Quadratic, Inconclusive };

inline const char* to_string(RateClass c) {
  switch (c) {
    case RateClass::Linear: return "Linear";
    case RateClass::Superlinear: return "Superlinear";
    case RateClass::Quadratic: return "Quadratic";
    case RateClass::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct RateEstimate {
  double order{0.0};   // median of per-step orders
  double theta{0.0};   // median of successive distance ratios
  RateClass classification{RateClass::Inconclusive};
  int samples{0};
};

namespace detail {
inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

/// Fits the convergence order from iterate distances. With no external
/// reference the final iterate serves as pbar and the last two iterates are
/// dropped (they sit at rounding noise).
inline RateEstimate estimate_rate(const std::vector<double>& distances) {
  const double floor = 100.0 * std::numeric_limits<double>::epsilon();
  std::vector<double> d;
  for (double x : distances) {
    if (x <= floor) break;
    d.push_back(x);
  }
  // Need 5 recorded distances overall and at least 3 above the noise floor
  // (trailing entries at rounding noise are excluded from the fit).
  if (distances.size() < 5 || d.size() < 3)
    throw std::invalid_argument("estimate_rate: fewer than 5 usable iterates");

  std::vector<double> orders, ratios;
  for (size_t k = 1; k + 1 < d.size(); ++k)
    orders.push_back(std::log(d[k + 1] / d[k]) / std::log(d[k] / d[k - 1]));
  for (size_t k = 0; k + 1 < d.size(); ++k) ratios.push_back(d[k + 1] / d[k]);

  RateEstimate est;
  est.samples = static_cast<int>(d.size());
  est.order = detail::median(orders);
  est.theta = detail::median(ratios);
  if (est.order >= 1.8) {
    est.classification = RateClass::Quadratic;
  } else if (est.order >= 0.8 && est.order <= 1.2 && est.theta < 1.0) {
    est.classification = RateClass::Linear;
  } else if (est.order > 1.2 && ratios.back() < 0.5 * ratios.front() && est.theta < 1.0) {
    est.classification = RateClass::Superlinear;
  }
  return est;
}

inline RateEstimate estimate_rate(const SolveReport& report,
                                  const std::optional<State>& reference = std::nullopt) {
  std::vector<double> d;
  if (reference) {
    for (const auto& rec : report.history) d.push_back(state_dist(rec.state, *reference));
  } else {
    // reference = final iterate; exclude the last two iterates from the fit
    if (report.history.size() < 3)
      throw std::invalid_argument("estimate_rate: history too short");
    for (size_t i = 0; i + 2 < report.history.size(); ++i)
      d.push_back(report.history[i].dist_to_final);
  }
  return estimate_rate(d);
}

// ---------------------------------------------------------------------------
// Radius bounds and the semi-local certificate.

/// Linear local radius: min{beta/(eps+iota), delta_bar, delta_eps}.
inline double local_radius_linear(double beta, double eps, double iota, double delta_bar,
                                  double delta_eps) {
  if (beta <= 0 || eps <= 0 || iota <= 0 || delta_bar <= 0 || delta_eps <= 0)
    throw std::invalid_argument("local_radius_linear: nonpositive input");
  return std::min({beta / (eps + iota), delta_bar, delta_eps});
}

/// Quadratic local radius:
/// min{(beta/(L+iota))^{1/2}, (1-mu kappa)/(kappa (L+iota)), delta, delta_L}.
inline double local_radius_quadratic(double beta, double L, double iota, double mu, double kappa,
                                     double delta, double delta_L) {
  if (beta <= 0 || L <= 0 || iota <= 0 || mu <= 0 || kappa <= 0 || delta <= 0 || delta_L <= 0)
    throw std::invalid_argument("local_radius_quadratic: nonpositive input");
  if (mu * kappa >= 1.0) throw std::invalid_argument("local_radius_quadratic: mu*kappa >= 1");
  return std::min({std::sqrt(beta / (L + iota)), (1.0 - mu * kappa) / (kappa * (L + iota)),
                   delta, delta_L});
}

struct SemiLocalConstants {
  double sigma, mu, alpha, beta, theta, eps, iota, delta;
  double a{std::numeric_limits<double>::infinity()};
  double b{std::numeric_limits<double>::infinity()};

  double alpha_hat() const { return theta * (eps + iota); }
};

struct SemiLocalCertificate {
  bool valid{false};          // constants + starting data satisfy the hypotheses
  std::string invalid_reason;
  std::vector<bool> a1_pass;  // d(p_k,p_0)   <= (1-ah^k)/(1-ah) Theta(1+iota)||y0||
  std::vector<bool> a2_pass;  // d(p_k,p_k-1) <= ah^{k-1} Theta(1+iota)||y0||
  std::vector<bool> tail_pass;  // d(p_k,p_hat) <= ah^k/(1-ah) Theta(1+iota)||y0||
  bool all_pass{false};
};

/// Checks the semi-local hypotheses on the constants and starting residual,
/// then verifies the (A1)/(A2)/tail inequalities against a recorded run.
/// The final iterate stands in for the limit point in the tail bound.
inline SemiLocalCertificate semilocal_certificate(const SemiLocalConstants& c,
                                                  const VectorXd& y0, const VectorXd& u0,
                                                  const SolveReport& report) {
  SemiLocalCertificate cert;
  auto invalid = [&](const std::string& why) {
    cert.valid = false;
    cert.invalid_reason = why;
    return cert;
  };

  const double ah = c.alpha_hat();
  if (ah >= 1.0) return invalid("alpha_hat >= 1: contraction series diverges");
  if (c.mu * c.sigma >= 1.0) return invalid("mu*sigma >= 1");
  if (!(c.sigma / (1.0 - c.mu * c.sigma) < c.theta && c.theta <= c.alpha / (2.0 * c.beta)))
    return invalid("Theta outside (sigma/(1-mu sigma), alpha/(2 beta)]");
  if (!(c.eps + c.iota < 2.0 * c.beta / c.alpha)) return invalid("eps + iota >= 2 beta / alpha");
  if (std::isfinite(c.a) && !(c.alpha <= c.a / 2.0)) return invalid("alpha > a/2");
  if (std::isfinite(c.b) && !(c.mu * c.alpha + 2.0 * c.beta <= c.b))
    return invalid("mu alpha + 2 beta > b");
  if (u0.norm() > c.iota * y0.norm()) return invalid("||u0|| > iota ||y0||");
  const double y0n = y0.norm();
  const double cap =
      std::min({c.beta / (c.theta * (1.0 + c.iota)), c.beta / (1.0 + c.iota),
                c.beta * (1.0 - ah) / (ah - ah * ah + 1.0),
                c.delta * (1.0 - ah) / (c.theta * (1.0 + c.iota))});
  if (y0n > cap) return invalid("||y0|| exceeds the admissible starting bound");

  cert.valid = true;
  const double base = c.theta * (1.0 + c.iota) * y0n;
  const auto& h = report.history;
  cert.all_pass = true;
  for (size_t k = 1; k < h.size(); ++k) {
    double ahk = std::pow(ah, double(k));
    bool a1 = state_dist(h[k].state, h[0].state) <= (1.0 - ahk) / (1.0 - ah) * base + 1e-15;
    bool a2 = state_dist(h[k].state, h[k - 1].state) <= std::pow(ah, double(k - 1)) * base + 1e-15;
    bool tail = state_dist(h[k].state, report.final_state) <= ahk / (1.0 - ah) * base + 1e-15;
    cert.a1_pass.push_back(a1);
    cert.a2_pass.push_back(a2);
    cert.tail_pass.push_back(tail);
    cert.all_pass &= a1 && a2 && tail;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// History CSV export (fixed column order, 17 significant digits).

inline void write_history_csv(const SolveReport& report, std::ostream& os) {
  os << "k,norm_phi,g_value,mu,residual,step_norm,u_norm,dist_to_final\n";
  char buf[512];
  for (const auto& rec : report.history) {
    double g = rec.g_values.size() ? rec.g_values[0] : 0.0;
    double mu = rec.state.mu.size() ? rec.state.mu[0] : 0.0;
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", rec.k, rec.norm_phi, g, mu,
                  rec.full_residual, rec.step_norm, rec.u_norm, rec.dist_to_final);
    os << buf;
  }
}

inline void write_history_csv(const SolveReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_history_csv: cannot open " + path);
  write_history_csv(report, os);
}

}  // namespace geneq
