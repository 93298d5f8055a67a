/**
 * Generalized equations f(p) + F(p) ∋ 0 on a manifold, possibly extended by
 * Lagrange multipliers: the smooth part with frame-based differential, the
 * structured set-valued part, residual measurement, and problem builders
 * (constrained Riemannian center of mass on S^3, reduced vector fields).
 */
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "geneq/manifold.hpp"

namespace geneq {

struct InfeasibleMultiplierError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A manifold point together with its multiplier block (empty when the
/// problem has no complementarity structure).
struct State {
  ManifoldPoint p;
  VectorXd mu;  // size m1

  static State plain(ManifoldPoint point) { return {std::move(point), VectorXd(0)}; }
};

/// Distance in the product metric on M x R^{m1}.
inline double state_dist(const State& a, const State& b) {
  double dm = dist(a.p, b.p);
  double de = (a.mu - b.mu).norm();
  return std::sqrt(dm * dm + de * de);
}

/// Smooth part f : M x R^{m1} -> R^m with gradient-field access. grad_p
/// returns the Riemannian gradients of the m components with respect to the
/// manifold point; dmu the m x m1 Jacobian with respect to the multipliers.
/// grad_p may be absent for evaluation-only problems (reduced vector fields
/// without differential data).
struct SmoothMap {
  int m{0};
  std::function<VectorXd(const State&)> eval;
  std::function<std::vector<TangentVector>(const State&)> grad_p;
  std::function<MatrixXd(const State&)> dmu;
};

/// Structured set-valued part.
///   Zero            : F = {0}
///   NegOrthantCone  : F = -K, K = R_-^s x {0}^{m-s}  (rows 0..s-1 inequalities)
///   KktComplementarity: rows in `slots` carry z >= 0 with mu_i z_i = 0,
///                     F empty when some mu_i < 0.
struct SetValuedPart {
  enum class Variant { Zero, NegOrthantCone, KktComplementarity };
  Variant variant{Variant::Zero};
  int s{0};                 // inequality rows for NegOrthantCone
  std::vector<int> slots;   // complementarity rows for Kkt (paired with mu)

  static SetValuedPart zero() { return {Variant::Zero, 0, {}}; }
  static SetValuedPart neg_orthant_cone(int s) { return {Variant::NegOrthantCone, s, {}}; }
  static SetValuedPart kkt(std::vector<int> slots) {
    return {Variant::KktComplementarity, 0, std::move(slots)};
  }
};

struct GenEqProblem {
  Chart chart;
  SmoothMap f;
  SetValuedPart F;
  FrameField frame;
  std::optional<State> known_solution;          // for rate studies
  double region_radius{std::numeric_limits<double>::infinity()};

  int m1() const { return static_cast<int>(F.slots.size()); }
  /// Rows of f that are not complementarity slots (the Phi part).
  std::vector<int> phi_rows() const {
    std::vector<int> rows;
    for (int i = 0; i < f.m; ++i) {
      bool slot = false;
      for (int s : F.slots) slot |= (s == i);
      if (!slot) rows.push_back(i);
    }
    return rows;
  }
};

/// J[i][j] = <grad f_i(p), E_j(p)>_p, with multiplier columns appended, so
/// that Df(p)[sum a_j E_j, nu] = J (a, nu).
inline MatrixXd differential_matrix(const GenEqProblem& problem, const State& state) {
  if (!problem.f.grad_p)
    throw std::runtime_error("differential_matrix: problem has no gradient fields");
  const auto basis = frame_at(problem.frame, state.p);
  const auto grads = problem.f.grad_p(state);
  const int n = static_cast<int>(basis.size());
  const int m1 = problem.m1();
  MatrixXd J(problem.f.m, n + m1);
  for (int i = 0; i < problem.f.m; ++i)
    for (int j = 0; j < n; ++j)
      J(i, j) = inner(state.p, grads[i].components, basis[j].components);
  if (m1 > 0) {
    if (!problem.f.dmu) throw std::runtime_error("differential_matrix: missing dmu");
    J.rightCols(m1) = problem.f.dmu(state);
  }
  return J;
}

/// d_e(0, f(p)+F(p)): the minimal Euclidean norm of f(p)+y over y in F(p).
/// Throws when F(p) is empty (some multiplier negative).
inline double residual(const GenEqProblem& problem, const State& state) {
  VectorXd fv = problem.f.eval(state);
  double sq = 0.0;
  switch (problem.F.variant) {
    case SetValuedPart::Variant::Zero:
      return fv.norm();
    case SetValuedPart::Variant::NegOrthantCone: {
      for (int i = 0; i < fv.size(); ++i) {
        double c = (i < problem.F.s) ? std::max(fv[i], 0.0) : std::abs(fv[i]);
        sq += c * c;
      }
      return std::sqrt(sq);
    }
    case SetValuedPart::Variant::KktComplementarity: {
      for (int t = 0; t < problem.m1(); ++t)
        if (state.mu[t] < 0.0)
          throw InfeasibleMultiplierError("residual: negative multiplier, F(p) empty");
      for (int i = 0; i < fv.size(); ++i) {
        int slot_index = -1;
        for (int t = 0; t < problem.m1(); ++t)
          if (problem.F.slots[t] == i) slot_index = t;
        double c;
        if (slot_index < 0) {
          c = fv[i];
        } else if (state.mu[slot_index] > 0.0) {
          c = fv[i];  // mu y = 0 forces y = 0
        } else {
          c = std::max(fv[i], 0.0);  // y >= 0 free
        }
        sq += c * c;
      }
      return std::sqrt(sq);
    }
  }
  return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Constrained Riemannian center of mass on S^3 (KKT formulation).
//
// minimize (1/N) sum d^2(p, p^i)  s.t.  g(p) = d^2(p, ptilde) - r^2 <= 0,
// reduced through the global frame E_i(p) = M_i p into
//   f(p,mu) = (<grad L_mu(p), E_1..3(p)>, g(p)),   F = KKT slot on row 3.

namespace detail {

// u(c) = arccos(c)/sqrt(1-c^2) and its derivative, stable near c = 1.
inline double sphere_u(double c) {
  c = clamp_unit(c);
  double s2 = 1.0 - c * c;
  if (s2 < 1e-12) {
    double e = 1.0 - c;  // u = 1 + e/3 + O(e^2) around c=1
    return 1.0 + e / 3.0 + 2.0 * e * e / 15.0;
  }
  return std::acos(c) / std::sqrt(s2);
}

inline double sphere_u_prime(double c) {
  c = clamp_unit(c);
  double s2 = 1.0 - c * c;
  if (s2 < 1e-8) {
    double e = 1.0 - c;  // u' = 1/3 + 4e/15 + O(e^2)
    return 1.0 / 3.0 + 4.0 * e / 15.0;
  }
  return (c * sphere_u(c) - 1.0) / s2;
}

}  // namespace detail

struct KarcherData {
  std::vector<ManifoldPoint> samples;
  ManifoldPoint center;  // ptilde
  double radius{0.0};
  int outside_at_build{0};  // samples outside the constraint ball (warning)
};

/// The constrained Karcher-mean problem on S^3 x R. The gradients are
/// analytic: with u(c) = arccos(c)/sqrt(1-c^2) and c = <p,q>,
///   <log_p q, M_j p> = u(c) q^T M_j p,
/// whose ambient gradient is u'(c) (q^T M_j p) q - u(c) M_j q.
inline GenEqProblem build_constrained_karcher(const std::vector<ManifoldPoint>& points,
                                              const ManifoldPoint& center, double radius,
                                              KarcherData* data_out = nullptr) {
  if (points.empty()) throw std::invalid_argument("build_constrained_karcher: no points");
  const Chart chart = sphere_chart(3);
  auto data = std::make_shared<KarcherData>();
  data->samples = points;
  data->center = center;
  data->radius = radius;
  for (const auto& q : points)
    if (dist(q, center) > radius) data->outside_at_build++;
  if (data_out) *data_out = *data;

  const double N = static_cast<double>(points.size());
  const auto& gens = s3_frame_generators();

  // grad L_mu(p) = -(2/N) sum log_p p^i - 2 mu log_p ptilde (ambient R^4).
  auto grad_lagrangian = [data, N](const State& st) -> VectorXd {
    VectorXd g = VectorXd::Zero(4);
    for (const auto& q : data->samples) g -= (2.0 / N) * log_map(st.p, q).components;
    g -= 2.0 * st.mu[0] * log_map(st.p, data->center).components;
    return g;
  };

  SmoothMap f;
  f.m = 4;
  f.eval = [data, grad_lagrangian, radius, &gens = gens](const State& st) -> VectorXd {
    VectorXd gl = grad_lagrangian(st);
    const VectorXd p = st.p.coords;
    VectorXd out(4);
    for (int j = 0; j < 3; ++j) out[j] = gl.dot(gens[j] * p);
    double d = dist(st.p, data->center);
    out[3] = d * d - radius * radius;
    return out;
  };
  f.grad_p = [data, N, &gens = gens](const State& st) -> std::vector<TangentVector> {
    const VectorXd& p = st.p.coords;
    MatrixXd proj = MatrixXd::Identity(4, 4) - p * p.transpose();
    std::vector<TangentVector> grads;
    grads.reserve(4);
    for (int j = 0; j < 3; ++j) {
      VectorXd g = VectorXd::Zero(4);
      auto add_term = [&](const VectorXd& q, double w) {
        double c = detail::clamp_unit(p.dot(q));
        double qmjp = q.dot(gens[j] * p);
        g += w * (detail::sphere_u_prime(c) * qmjp * q - detail::sphere_u(c) * (gens[j] * q));
      };
      for (const auto& q : data->samples) add_term(q.coords, -2.0 / N);
      add_term(data->center.coords, -2.0 * st.mu[0]);
      grads.push_back({st.p, proj * g});
    }
    // grad g(p) = -2 log_p ptilde
    grads.push_back({st.p, -2.0 * log_map(st.p, data->center).components});
    return grads;
  };
  f.dmu = [data, &gens = gens](const State& st) -> MatrixXd {
    MatrixXd d(4, 1);
    const VectorXd p = st.p.coords;
    VectorXd lt = log_map(st.p, data->center).components;
    for (int j = 0; j < 3; ++j) d(j, 0) = -2.0 * lt.dot(gens[j] * p);
    d(3, 0) = 0.0;
    return d;
  };

  GenEqProblem problem{chart, std::move(f), SetValuedPart::kkt({3}), make_frame(chart),
                       std::nullopt, radius};
  return problem;
}

// ---------------------------------------------------------------------------
// Vector-field reduction: f_i(p) = <V(p), E_i(p)>_p with the structured F;
// a point is a singularity of V + Z iff the reduced residual vanishes.

using VectorField = std::function<TangentVector(const ManifoldPoint&)>;

inline GenEqProblem reduce_vector_field(const VectorField& V, const SetValuedPart& Z,
                                        const FrameField& frame) {
  if (Z.variant == SetValuedPart::Variant::NegOrthantCone)
    throw std::invalid_argument("reduce_vector_field: unsupported set-valued structure");
  Chart chart = frame.chart;
  int n = chart.dim();
  SmoothMap f;
  f.m = n;
  f.eval = [V, frame](const State& st) -> VectorXd {
    auto basis = frame_at(frame, st.p);
    TangentVector v = V(st.p);
    VectorXd out(static_cast<int>(basis.size()));
    for (int i = 0; i < out.size(); ++i) out[i] = inner(st.p, v.components, basis[i].components);
    return out;
  };
  return GenEqProblem{chart, std::move(f), Z, frame, std::nullopt,
                      std::numeric_limits<double>::infinity()};
}

}  // namespace geneq
