/**
 * Per-iteration Newton subproblems in frame coordinates: a plain linear
 * least-squares step for F = {0}, and exhaustive complementarity-branch
 * enumeration for the KKT structure.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "geneq/manifold.hpp"

namespace geneq {

struct SingularStepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SubproblemInfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inputs of one Newton subproblem: minimize over the tangent coefficients
/// x = (alpha, nu) the norm of c + J x + z - u, with z constrained by the
/// set-valued structure. slots lists the rows carrying complementarity
/// (paired, in order, with the entries of mu); empty slots means F = {0}.
struct StepRequest {
  MatrixXd J;              // m x (n + m1)
  VectorXd c;              // f(p_k), size m
  VectorXd u;              // selected inexactness element, size m
  VectorXd mu;             // current multipliers, size m1 (all >= 0)
  std::vector<int> slots;  // complementarity rows, size m1
};

struct StepResult {
  VectorXd alpha;      // frame coefficients of v_k, size n
  VectorXd nu;         // multiplier increment, size m1
  VectorXd z;          // slot entries of the chosen element of F, size m1
  double objective{0.0};         // 0.5 ||c + Jx + z - u||^2
  double achieved_residual{0.0}; // ||c + Jx + z - u||
  std::uint32_t branch_id{0};
  bool regularized{false};
};

namespace detail {

constexpr double kBranchFeasTol = 1e-12;
constexpr double kRidge = 1e-12;

/// Least-squares solve of min ||A x - b||; sets *regularized when the normal
/// equations needed a ridge.
inline VectorXd ls_solve(const MatrixXd& A, const VectorXd& b, bool* regularized) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
  if (qr.rank() == A.cols()) return qr.solve(b);
  if (regularized) *regularized = true;
  MatrixXd H = A.transpose() * A + kRidge * MatrixXd::Identity(A.cols(), A.cols());
  return H.ldlt().solve(A.transpose() * b);
}

}  // namespace detail

/// min ||c + J alpha - u|| for F = {0}. Throws on rank deficiency.
inline StepResult solve_linear_step(const StepRequest& req) {
  if (!req.slots.empty()) throw std::invalid_argument("solve_linear_step: expected Zero variant");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(req.J);
  if (qr.rank() < req.J.cols())
    throw SingularStepError("solve_linear_step: rank-deficient differential");
  VectorXd alpha = qr.solve(req.u - req.c);
  VectorXd r = req.c + req.J * alpha - req.u;
  StepResult res;
  res.alpha = alpha;
  res.nu = VectorXd(0);
  res.z = VectorXd(0);
  res.achieved_residual = r.norm();
  res.objective = 0.5 * r.squaredNorm();
  return res;
}

/// Enumerates all 2^{m1} complementarity branches. Per slot t, bit t of the
/// branch id selects
///   0 : z_t = 0, nu_t free with mu_t + nu_t >= 0,
///   1 : nu_t = -mu_t fixed, z_t free with z_t >= 0.
/// Each branch is an unconstrained least squares in the free variables;
/// sign-infeasible branches are discarded, ties go to the smallest id.
inline StepResult solve_kkt_step(const StepRequest& req) {
  const int m1 = static_cast<int>(req.slots.size());
  if (m1 == 0) throw std::invalid_argument("solve_kkt_step: expected Kkt variant");
  if (m1 > 10) throw std::invalid_argument("solve_kkt_step: too many complementarity slots");
  const int m = static_cast<int>(req.c.size());
  const int ncols = static_cast<int>(req.J.cols());
  const int n = ncols - m1;  // frame columns; multiplier columns follow

  bool found = false;
  StepResult best;
  for (std::uint32_t mask = 0; mask < (1u << m1); ++mask) {
    // Free columns: all frame columns, plus nu_t (branch 0) or z_t (branch 1).
    std::vector<int> free_nu, fixed_nu, free_z;
    for (int t = 0; t < m1; ++t) {
      if ((mask >> t) & 1u) {
        fixed_nu.push_back(t);
        free_z.push_back(t);
      } else {
        free_nu.push_back(t);
      }
    }
    const int nfree = n + static_cast<int>(free_nu.size()) + static_cast<int>(free_z.size());

    MatrixXd A(m, nfree);
    A.leftCols(n) = req.J.leftCols(n);
    int col = n;
    for (int t : free_nu) A.col(col++) = req.J.col(n + t);
    for (int t : free_z) {
      VectorXd e = VectorXd::Zero(m);
      e[req.slots[t]] = 1.0;
      A.col(col++) = e;
    }
    // Residual base: c - u + fixed nu contributions.
    VectorXd b = req.u - req.c;
    for (int t : fixed_nu) b += req.mu[t] * req.J.col(n + t);  // nu_t = -mu_t

    bool regularized = false;
    VectorXd x = detail::ls_solve(A, b, &regularized);

    VectorXd nu(m1), z = VectorXd::Zero(m1);
    col = n;
    for (int t : free_nu) nu[t] = x[col++];
    for (int t : fixed_nu) nu[t] = -req.mu[t];
    for (int t : free_z) z[t] = x[col++];

    // Sign feasibility; clamp rounding-level violations to exact feasibility.
    bool feasible = true;
    for (int t : free_nu) {
      double total = req.mu[t] + nu[t];
      if (total < -detail::kBranchFeasTol) feasible = false;
      else if (total < 0.0) nu[t] = -req.mu[t];
    }
    for (int t : free_z) {
      if (z[t] < -detail::kBranchFeasTol) feasible = false;
      else if (z[t] < 0.0) z[t] = 0.0;
    }
    if (!feasible) continue;

    VectorXd full = VectorXd::Zero(ncols);
    full.head(n) = x.head(n);
    full.tail(m1) = nu;
    VectorXd r = req.c + req.J * full - req.u;
    for (int t = 0; t < m1; ++t) r[req.slots[t]] += z[t];
    double obj = 0.5 * r.squaredNorm();

    if (!found || obj < best.objective) {
      found = true;
      best.alpha = x.head(n);
      best.nu = nu;
      best.z = z;
      best.objective = obj;
      best.achieved_residual = r.norm();
      best.branch_id = mask;
      best.regularized = regularized;
    }
  }
  if (!found) throw SubproblemInfeasibleError("solve_kkt_step: all branches infeasible");
  return best;
}

}  // namespace geneq
