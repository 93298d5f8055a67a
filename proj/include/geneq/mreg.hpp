/**
 * Numerical laboratory for metric regularity on the SPD cone: the four probe
 * maps (log-trace, inverse-trace, and their set-valued variants), explicit
 * preimage witnesses, and sampled verification of the regularity inequality
 *   d(q, Phi^{-1}(x)) <= sigma d_e(x, Phi(q)).
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "geneq/manifold.hpp"

namespace geneq {

enum class ProbeMap { LnTr, InvTr, LnTrSetValued, InvTrSetValued };

inline const char* to_string(ProbeMap v) {
  switch (v) {
    case ProbeMap::LnTr: return "ln_tr";
    case ProbeMap::InvTr: return "inv_tr";
    case ProbeMap::LnTrSetValued: return "ln_tr_set_valued";
    case ProbeMap::InvTrSetValued: return "inv_tr_set_valued";
  }
  return "?";
}

/// A value set of the form {points} ∪ {intervals}.
struct ValueSet {
  std::vector<double> points;
  std::vector<std::pair<double, double>> intervals;

  double dist_to(double x) const {
    double d = std::numeric_limits<double>::infinity();
    for (double p : points) d = std::min(d, std::abs(x - p));
    for (auto [lo, hi] : intervals)
      d = std::min(d, x < lo ? lo - x : (x > hi ? x - hi : 0.0));
    return d;
  }
  bool contains(double x, double tol) const { return dist_to(x) <= tol; }
};

namespace detail {
constexpr double kSpecialPointTol = 1e-12;
}

/// Phi(p) per the probe map; set-valued branches trigger only on the exact
/// special points (1/n Id for the log-trace variant, Id for inverse-trace).
inline ValueSet phi_eval(ProbeMap variant, const ManifoldPoint& p) {
  if (p.chart.kind != ChartKind::Spd) throw GeometryError("phi_eval: SPD point required");
  const int n = p.chart.n;
  const double tr = p.coords.trace();
  switch (variant) {
    case ProbeMap::LnTr:
      return {{std::log(tr)}, {}};
    case ProbeMap::InvTr:
      return {{1.0 / tr}, {}};
    case ProbeMap::LnTrSetValued: {
      MatrixXd special = (1.0 / n) * MatrixXd::Identity(n, n);
      if ((p.coords - special).norm() <= detail::kSpecialPointTol)
        return {{0.0}, {{1.0, 2.0}}};
      return {{std::log(tr)}, {}};
    }
    case ProbeMap::InvTrSetValued: {
      if ((p.coords - MatrixXd::Identity(n, n)).norm() <= detail::kSpecialPointTol)
        return {{1.0 / n}, {{2.0, 3.0}}};
      return {{1.0 / tr}, {}};
    }
  }
  throw std::invalid_argument("phi_eval: unknown variant");
}

/// Explicit preimage point w with x ∈ Phi(w):
///   log-trace family: w = e^{x - ln tr(q)} q;  inverse-trace: w = q/(x tr(q)).
inline ManifoldPoint preimage_witness(ProbeMap variant, double x, const ManifoldPoint& q) {
  if (q.chart.kind != ChartKind::Spd) throw GeometryError("preimage_witness: SPD point required");
  const double tr = q.coords.trace();
  switch (variant) {
    case ProbeMap::LnTr:
    case ProbeMap::LnTrSetValued:
      return make_spd_point(std::exp(x - std::log(tr)) * q.coords);
    case ProbeMap::InvTr:
    case ProbeMap::InvTrSetValued:
      if (x <= 0.0)
        throw std::invalid_argument("preimage_witness: inverse-trace needs x > 0");
      return make_spd_point(q.coords / (x * tr));
  }
  throw std::invalid_argument("preimage_witness: unknown variant");
}

struct RegularityProbe {
  ProbeMap variant{ProbeMap::LnTr};
  int n{2};
  double sigma{0.0};       // <= 0 selects the certified default for the variant
  ManifoldPoint center;    // domain ball center
  double a{1.0};           // domain ball radius
  double x_min{-1.0}, x_max{1.0};
  int samples{1000};
  std::uint64_t seed{0};
};

/// Certified modulus: sqrt(n) for the log-trace maps, sqrt(n) * n e^a for the
/// inverse-trace maps (n e^a bounds the derivative of ln on (e^{-a}/n, e^a/n)).
inline double default_sigma(ProbeMap variant, int n, double a) {
  switch (variant) {
    case ProbeMap::LnTr:
    case ProbeMap::LnTrSetValued:
      return std::sqrt(double(n));
    case ProbeMap::InvTr:
    case ProbeMap::InvTrSetValued:
      return std::sqrt(double(n)) * double(n) * std::exp(a);
  }
  return 0.0;
}

struct ProbeReport {
  ProbeMap variant;
  int n{0};
  double sigma{0.0};
  int samples_tested{0};
  int violations{0};
  double worst_margin{0.0};  // max over samples of lhs - (sigma rhs + tol)
  double tightness{0.0};     // max of d(q,w) / (sigma d_e(x, Phi(q)))
  std::uint64_t seed{0};
};

namespace detail {

/// Random SPD point within distance <= a of `center`: log-uniform eigenvalue
/// direction in a random eigenbasis, pushed forward by exp_center.
inline ManifoldPoint sample_spd_in_ball(const ManifoldPoint& center, double a,
                                        std::mt19937_64& rng) {
  const int n = center.chart.n;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  VectorXd t(n);
  for (int i = 0; i < n; ++i) t[i] = 2.0 * unif(rng) - 1.0;
  double r = a * unif(rng);
  MatrixXd dir = q * t.asDiagonal() * q.transpose();
  TangentVector tv = make_tangent(center, symmetrize(dir));
  double nv = norm(tv);
  if (nv > 0) tv.components *= r / nv;  // metric norm r <= a, so d(center, .) <= a
  return exp_map(center, tv);
}

}  // namespace detail

/// Samples (q, x) over the probe's domain ball and x-range; checks the
/// witness bound d(q, w(x,q)) <= sigma d_e(x, Phi(q)) + 1e-10. For the
/// set-valued variants, samples outside the certified x-range contribute
/// nothing (the regularity guarantee is restricted to that range).
inline ProbeReport verify_regularity(const RegularityProbe& probe) {
  if (probe.samples < 1) throw std::invalid_argument("verify_regularity: samples >= 1 required");
  const double sigma =
      probe.sigma > 0 ? probe.sigma : default_sigma(probe.variant, probe.n, probe.a);
  const double tol = 1e-10;
  std::mt19937_64 rng(probe.seed);
  std::uniform_real_distribution<double> unif_x(probe.x_min, probe.x_max);

  ProbeReport report;
  report.variant = probe.variant;
  report.n = probe.n;
  report.sigma = sigma;
  report.seed = probe.seed;
  report.worst_margin = -std::numeric_limits<double>::infinity();

  for (int s = 0; s < probe.samples; ++s) {
    ManifoldPoint q = detail::sample_spd_in_ball(probe.center, probe.a, rng);
    double x = unif_x(rng);
    // Certified ranges: x < 1/2 for the set-valued log-trace map,
    // x in (e^{-a}/n, min{e^a/n, 1}) for the set-valued inverse-trace map.
    if (probe.variant == ProbeMap::LnTrSetValued && x >= 0.5) continue;
    if (probe.variant == ProbeMap::InvTrSetValued &&
        (x <= std::exp(-probe.a) / probe.n ||
         x >= std::min(std::exp(probe.a) / probe.n, 1.0)))
      continue;
    if ((probe.variant == ProbeMap::InvTr || probe.variant == ProbeMap::InvTrSetValued) &&
        x <= 0.0)
      continue;

    ManifoldPoint w = preimage_witness(probe.variant, x, q);
    double lhs = dist(q, w);
    double rhs = sigma * phi_eval(probe.variant, q).dist_to(x);
    report.samples_tested++;
    double margin = lhs - (rhs + tol);
    report.worst_margin = std::max(report.worst_margin, margin);
    if (margin > 0.0) report.violations++;
    if (rhs > 1e-14) report.tightness = std::max(report.tightness, lhs / rhs);
  }
  return report;
}

inline nlohmann::json to_json(const ProbeReport& r) {
  return {{"variant", to_string(r.variant)}, {"n", r.n},          {"sigma", r.sigma},
          {"samples", r.samples_tested},     {"violations", r.violations},
          {"worst_margin", r.worst_margin},  {"tightness", r.tightness},
          {"seed", r.seed}};
}

}  // namespace geneq
