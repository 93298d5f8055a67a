/**
 * Riemannian geometry kernel: points, tangent vectors, exponential and
 * logarithm maps, parallel transport, geodesics and orthonormal frames for
 * the unit sphere S^n, the SPD(n) cone with the affine-invariant metric, and
 * Euclidean space.
 */
#pragma once

#include <Eigen/Dense>

#include <array>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace geneq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Thrown when a two-point construction leaves the manifold's valid region
/// (antipodal sphere points, SPD losing positive definiteness, ...).
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ChartKind { Sphere, Spd, Euclid };

/// Chart tag: which manifold and its size parameter. For Sphere, n is the
/// intrinsic dimension (ambient R^{n+1}); for Spd, matrices are n x n; for
/// Euclid, vectors live in R^n.
struct Chart {
  ChartKind kind{ChartKind::Euclid};
  int n{1};

  bool operator==(const Chart&) const = default;

  /// Intrinsic manifold dimension.
  int dim() const {
    switch (kind) {
      case ChartKind::Sphere: return n;
      case ChartKind::Spd: return n * (n + 1) / 2;
      case ChartKind::Euclid: return n;
    }
    return 0;
  }

  std::string name() const {
    switch (kind) {
      case ChartKind::Sphere: return "sphere";
      case ChartKind::Spd: return "spd";
      case ChartKind::Euclid: return "euclid";
    }
    return "?";
  }
};

inline Chart sphere_chart(int n) { return {ChartKind::Sphere, n}; }
inline Chart spd_chart(int n) { return {ChartKind::Spd, n}; }
inline Chart euclid_chart(int n) { return {ChartKind::Euclid, n}; }

/// Counts eigenvalue clamps applied before matrix logarithms; purely
/// diagnostic.
inline std::atomic<long>& spd_clamp_counter() {
  static std::atomic<long> counter{0};
  return counter;
}

namespace detail {

constexpr double kSphereUnitTol = 1e-12;
constexpr double kSymTol = 1e-12;
constexpr double kAntipodalTol = 1e-12;
constexpr double kEigFloor = 1e-14;

inline MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

/// f applied to the eigenvalues of a symmetric matrix.
template <typename Fn>
MatrixXd sym_matrix_function(const MatrixXd& a, Fn&& f) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a));
  if (es.info() != Eigen::Success) throw GeometryError("eigendecomposition failed");
  VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev[i] = f(ev[i]);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline MatrixXd sym_expm(const MatrixXd& a) {
  return sym_matrix_function(a, [](double t) { return std::exp(t); });
}

inline MatrixXd sym_logm(const MatrixXd& a) {
  return sym_matrix_function(a, [](double t) {
    if (t < kEigFloor) {
      spd_clamp_counter()++;
      t = kEigFloor;
    }
    return std::log(t);
  });
}

inline MatrixXd sym_sqrtm(const MatrixXd& a) {
  return sym_matrix_function(a, [](double t) { return std::sqrt(std::max(t, 0.0)); });
}

inline MatrixXd sym_invsqrtm(const MatrixXd& a) {
  return sym_matrix_function(a, [](double t) {
    if (t < kEigFloor) {
      spd_clamp_counter()++;
      t = kEigFloor;
    }
    return 1.0 / std::sqrt(t);
  });
}

inline double clamp_unit(double c) { return std::min(1.0, std::max(-1.0, c)); }

}  // namespace detail

/// A point on a chart-tagged manifold. Sphere/Euclid points are stored as a
/// column vector, SPD points as a symmetric matrix.
struct ManifoldPoint {
  Chart chart;
  MatrixXd coords;  // (n+1) x 1 for Sphere, n x 1 for Euclid, n x n for Spd
};

/// A tangent vector anchored at a base point, stored in the same shape as
/// the point's coordinates.
struct TangentVector {
  ManifoldPoint base;
  MatrixXd components;
};

inline bool same_point(const ManifoldPoint& a, const ManifoldPoint& b, double tol = 1e-14) {
  return a.chart == b.chart && (a.coords - b.coords).norm() <= tol;
}

inline ManifoldPoint make_sphere_point(const VectorXd& coords) {
  if (std::abs(coords.norm() - 1.0) > 1e-8)
    throw GeometryError("sphere point is not unit length");
  VectorXd v = coords / coords.norm();
  return {sphere_chart(static_cast<int>(coords.size()) - 1), v};
}

inline ManifoldPoint make_spd_point(const MatrixXd& coords) {
  if ((coords - coords.transpose()).norm() > 1e-10)
    throw GeometryError("SPD point is not symmetric");
  MatrixXd s = detail::symmetrize(coords);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw GeometryError("SPD point is not positive definite");
  return {spd_chart(static_cast<int>(coords.rows())), s};
}

inline ManifoldPoint make_euclid_point(const VectorXd& coords) {
  return {euclid_chart(static_cast<int>(coords.size())), coords};
}

inline TangentVector make_tangent(const ManifoldPoint& base, const MatrixXd& components) {
  switch (base.chart.kind) {
    case ChartKind::Sphere: {
      double ip = (base.coords.transpose() * components)(0, 0);
      if (std::abs(ip) > 1e-8) throw GeometryError("sphere tangent is not orthogonal to base");
      break;
    }
    case ChartKind::Spd:
      if ((components - components.transpose()).norm() > 1e-10)
        throw GeometryError("SPD tangent is not symmetric");
      break;
    case ChartKind::Euclid:
      break;
  }
  return {base, components};
}

inline TangentVector zero_tangent(const ManifoldPoint& p) {
  return {p, MatrixXd::Zero(p.coords.rows(), p.coords.cols())};
}

/// Riemannian metric <u,v>_p.
inline double inner(const ManifoldPoint& p, const MatrixXd& u, const MatrixXd& v) {
  switch (p.chart.kind) {
    case ChartKind::Sphere:
    case ChartKind::Euclid:
      return (u.transpose() * v)(0, 0);
    case ChartKind::Spd: {
      // Affine-invariant metric: tr(v p^{-1} u p^{-1}).
      MatrixXd pinv = p.coords.inverse();
      return (u * pinv * v * pinv).trace();
    }
  }
  return 0.0;
}

inline double inner(const TangentVector& u, const TangentVector& v) {
  return inner(u.base, u.components, v.components);
}

inline double norm(const TangentVector& v) {
  return std::sqrt(std::max(0.0, inner(v.base, v.components, v.components)));
}

inline ManifoldPoint exp_map(const ManifoldPoint& p, const TangentVector& v) {
  if (!same_point(p, v.base, 1e-12)) throw GeometryError("exp_map: tangent base mismatch");
  switch (p.chart.kind) {
    case ChartKind::Sphere: {
      double t = norm(v);
      if (t >= M_PI) throw GeometryError("exp_map: sphere step >= pi (injectivity guard)");
      if (t == 0.0) return p;
      VectorXd q = std::cos(t) * p.coords + std::sin(t) / t * v.components;
      q /= q.norm();  // re-normalize against drift
      return {p.chart, q};
    }
    case ChartKind::Spd: {
      MatrixXd ph = detail::sym_sqrtm(p.coords);
      MatrixXd pih = detail::sym_invsqrtm(p.coords);
      MatrixXd q = ph * detail::sym_expm(pih * v.components * pih) * ph;
      q = detail::symmetrize(q);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(q);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw GeometryError("exp_map: SPD result lost positive definiteness");
      return {p.chart, q};
    }
    case ChartKind::Euclid:
      return {p.chart, p.coords + v.components};
  }
  throw GeometryError("exp_map: unknown chart");
}

inline TangentVector log_map(const ManifoldPoint& p, const ManifoldPoint& q) {
  if (p.chart != q.chart) throw GeometryError("log_map: chart mismatch");
  switch (p.chart.kind) {
    case ChartKind::Sphere: {
      double c = detail::clamp_unit((p.coords.transpose() * q.coords)(0, 0));
      if (c <= -1.0 + detail::kAntipodalTol)
        throw GeometryError("log_map: antipodal sphere points");
      if (c >= 1.0 - 1e-16) {
        // q == p up to rounding; the projected difference is the best zero.
        VectorXd w = q.coords - c * p.coords;
        return {p, w};
      }
      double theta = std::acos(c);
      VectorXd w = q.coords - c * p.coords;  // (I - p p^T) q
      return {p, theta / std::sqrt(1.0 - c * c) * w};
    }
    case ChartKind::Spd: {
      MatrixXd ph = detail::sym_sqrtm(p.coords);
      MatrixXd pih = detail::sym_invsqrtm(p.coords);
      MatrixXd v = ph * detail::sym_logm(pih * q.coords * pih) * ph;
      return {p, detail::symmetrize(v)};
    }
    case ChartKind::Euclid:
      return {p, q.coords - p.coords};
  }
  throw GeometryError("log_map: unknown chart");
}

inline double dist(const ManifoldPoint& p, const ManifoldPoint& q) {
  if (p.chart != q.chart) throw GeometryError("dist: chart mismatch");
  switch (p.chart.kind) {
    case ChartKind::Sphere: {
      double c = detail::clamp_unit((p.coords.transpose() * q.coords)(0, 0));
      return std::acos(c);
    }
    case ChartKind::Spd: {
      // tr^{1/2}(ln^2(p^{-1/2} q p^{-1/2}))
      MatrixXd pih = detail::sym_invsqrtm(p.coords);
      MatrixXd l = detail::sym_logm(pih * q.coords * pih);
      return l.norm();
    }
    case ChartKind::Euclid:
      return (p.coords - q.coords).norm();
  }
  return 0.0;
}

/// Parallel transport of v from p to q along the connecting geodesic.
inline TangentVector parallel_transport(const ManifoldPoint& p, const ManifoldPoint& q,
                                        const TangentVector& v) {
  if (!same_point(p, v.base, 1e-12)) throw GeometryError("parallel_transport: base mismatch");
  if (p.chart != q.chart) throw GeometryError("parallel_transport: chart mismatch");
  if (same_point(p, q, 1e-15)) return {q, v.components};
  switch (p.chart.kind) {
    case ChartKind::Sphere: {
      TangentVector u = log_map(p, q);
      double theta = norm(u);
      if (theta < 1e-15) return {q, v.components};
      VectorXd uhat = u.components / theta;
      double a = (uhat.transpose() * v.components)(0, 0);
      VectorXd w = v.components +
                   a * ((std::cos(theta) - 1.0) * uhat - std::sin(theta) * p.coords);
      return {q, w};
    }
    case ChartKind::Spd: {
      // E = p^{1/2} (p^{-1/2} q p^{-1/2})^{1/2} p^{-1/2} = (q p^{-1})^{1/2}
      MatrixXd ph = detail::sym_sqrtm(p.coords);
      MatrixXd pih = detail::sym_invsqrtm(p.coords);
      MatrixXd e = ph * detail::sym_sqrtm(pih * q.coords * pih) * pih;
      MatrixXd w = e * v.components * e.transpose();
      return {q, detail::symmetrize(w)};
    }
    case ChartKind::Euclid:
      return {q, v.components};
  }
  throw GeometryError("parallel_transport: unknown chart");
}

/// Point gamma(t) = exp_p(t log_p q) together with the velocity
/// gamma'(t), which satisfies gamma'(t) = log_{gamma(t)} q - log_{gamma(t)} p.
inline std::pair<ManifoldPoint, TangentVector> geodesic(const ManifoldPoint& p,
                                                        const ManifoldPoint& q, double t) {
  TangentVector u = log_map(p, q);
  TangentVector tu{p, t * u.components};
  ManifoldPoint gt = exp_map(p, tu);
  TangentVector vel = parallel_transport(p, gt, u);
  return {gt, vel};
}

// ---------------------------------------------------------------------------
// Frames

/// Generators of the global orthonormal frame on S^3: E_i(p) = M_i p.
inline const std::array<Eigen::Matrix4d, 3>& s3_frame_generators() {
  static const std::array<Eigen::Matrix4d, 3> gens = [] {
    std::array<Eigen::Matrix4d, 3> m;
    m[0] << 0, -1, 0, 0,
            1,  0, 0, 0,
            0,  0, 0, -1,
            0,  0, 1, 0;
    m[1] << 0, 0, -1, 0,
            0, 0,  0, 1,
            1, 0,  0, 0,
            0, -1, 0, 0;
    m[2] << 0, 0, 0, -1,
            0, 0, -1, 0,
            0, 1,  0, 0,
            1, 0,  0, 0;
    return m;
  }();
  return gens;
}

/// A field of orthonormal tangent bases. Supported: the global S^3 frame,
/// the canonical Euclidean frame, and the per-point rescaled coordinate
/// frame on SPD(n).
struct FrameField {
  Chart chart;
};

inline FrameField make_frame(const Chart& chart) {
  if (chart.kind == ChartKind::Sphere && chart.n != 3)
    throw GeometryError("frame_at: global sphere frames only supported on S^3");
  return {chart};
}

inline std::vector<TangentVector> frame_at(const FrameField& frame, const ManifoldPoint& p) {
  if (frame.chart != p.chart) throw GeometryError("frame_at: chart mismatch");
  std::vector<TangentVector> basis;
  switch (p.chart.kind) {
    case ChartKind::Sphere: {
      if (p.chart.n != 3) throw GeometryError("frame_at: unsupported sphere dimension");
      for (const auto& m : s3_frame_generators())
        basis.push_back({p, m * p.coords});
      break;
    }
    case ChartKind::Euclid: {
      for (int i = 0; i < p.chart.n; ++i) {
        VectorXd e = VectorXd::Zero(p.chart.n);
        e[i] = 1.0;
        basis.push_back({p, e});
      }
      break;
    }
    case ChartKind::Spd: {
      // p^{1/2} B p^{1/2} for the orthonormal coordinate basis B of symmetric
      // matrices; orthonormal at p in the affine-invariant metric.
      int n = p.chart.n;
      MatrixXd ph = detail::sym_sqrtm(p.coords);
      for (int i = 0; i < n; ++i) {
        MatrixXd b = MatrixXd::Zero(n, n);
        b(i, i) = 1.0;
        basis.push_back({p, ph * b * ph});
      }
      const double s = 1.0 / std::sqrt(2.0);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          MatrixXd b = MatrixXd::Zero(n, n);
          b(i, j) = b(j, i) = s;
          basis.push_back({p, ph * b * ph});
        }
      break;
    }
  }
  return basis;
}

// ---------------------------------------------------------------------------
// Serialization: {"chart":"sphere","n":3,"coords":[...]}

inline nlohmann::json to_json(const ManifoldPoint& p) {
  std::vector<double> flat(p.coords.data(), p.coords.data() + p.coords.size());
  return {{"chart", p.chart.name()}, {"n", p.chart.n}, {"coords", flat}};
}

inline ManifoldPoint point_from_json(const nlohmann::json& j) {
  const std::string chart = j.at("chart");
  const int n = j.at("n");
  std::vector<double> flat = j.at("coords");
  if (chart == "sphere") {
    VectorXd v = Eigen::Map<VectorXd>(flat.data(), static_cast<long>(flat.size()));
    if (static_cast<int>(flat.size()) != n + 1)
      throw GeometryError("point_from_json: sphere coords must have n+1 entries");
    return make_sphere_point(v);
  }
  if (chart == "euclid") {
    VectorXd v = Eigen::Map<VectorXd>(flat.data(), static_cast<long>(flat.size()));
    return make_euclid_point(v);
  }
  if (chart == "spd") {
    if (static_cast<int>(flat.size()) != n * n)
      throw GeometryError("point_from_json: spd coords must have n*n entries");
    MatrixXd m = Eigen::Map<MatrixXd>(flat.data(), n, n);
    return make_spd_point(m);
  }
  throw GeometryError("point_from_json: unknown chart tag " + chart);
}

}  // namespace geneq
