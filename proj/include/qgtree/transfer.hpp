#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "qgtree/error.hpp"
#include "qgtree/potential.hpp"

namespace qgtree {

/// Endpoint values C(a), C'(a), S(a), S'(a) of the fundamental solutions of
/// -y'' + q y = lambda y with (y, y')(0) = (1, 0) and (0, 1).
struct TransferValues {
  double C = 1.0;
  double Cp = 0.0;
  double S = 0.0;
  double Sp = 1.0;
  double lambda = 0.0;

  double wronskian() const { return C * Sp - Cp * S; }

  /// Values for the same edge traversed from x = a to x = 0 (potential
  /// reversed): the fundamental matrix becomes P M^{-1} P with P = diag(1, -1).
  TransferValues reversed() const { return {Sp, Cp, S, C, lambda}; }
};

struct TransferOptions {
  // Relative local error per accepted step, measured in (rho*y, y') units.
  double rel_tol = 1e-12;
  int min_steps = 64;
  long max_steps = 5'000'000;
};

namespace detail {

using Mat2 = std::array<double, 4>;  // row-major {m00, m01, m10, m11}

inline Mat2 mul(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

/// Closed-form transfer for -y'' = omega2 * y on [0, a].
inline TransferValues constant_coefficient(double omega2, double a, double lambda) {
  TransferValues t;
  t.lambda = lambda;
  const double z = omega2 * a * a;
  if (std::abs(z) < 1e-8) {
    t.C = 1.0 - z / 2.0 + z * z / 24.0;
    t.S = a * (1.0 - z / 6.0 + z * z / 120.0);
    t.Cp = -omega2 * t.S;
    t.Sp = t.C;
  } else if (omega2 > 0.0) {
    const double w = std::sqrt(omega2);
    t.C = std::cos(w * a);
    t.S = std::sin(w * a) / w;
    t.Cp = -w * std::sin(w * a);
    t.Sp = t.C;
  } else {
    const double k = std::sqrt(-omega2);
    t.C = std::cosh(k * a);
    t.S = std::sinh(k * a) / k;
    t.Cp = k * std::sinh(k * a);
    t.Sp = t.C;
  }
  return t;
}

/// Fourth-order Magnus step for Y' = [[0,1],[q-lambda,0]] Y over [x, x+h].
/// The step matrix is an exact exponential of a trace-free matrix, so its
/// determinant (the Wronskian) is 1 up to rounding.
inline Mat2 magnus_step(const EdgePotential& q, double lambda, double x, double h) {
  static const double g = std::sqrt(3.0) / 6.0;
  const double f1 = q.eval_unchecked(x + h * (0.5 - g)) - lambda;
  const double f2 = q.eval_unchecked(x + h * (0.5 + g)) - lambda;
  const double fbar = 0.5 * (f1 + f2);
  const double d = (std::sqrt(3.0) / 12.0) * h * h * (f1 - f2);
  const double s2 = d * d + h * h * fbar;
  double ch, shs;  // cosh(s), sinh(s)/s
  if (std::abs(s2) < 1e-6) {
    ch = 1.0 + s2 / 2.0 + s2 * s2 / 24.0 + s2 * s2 * s2 / 720.0;
    shs = 1.0 + s2 / 6.0 + s2 * s2 / 120.0 + s2 * s2 * s2 / 5040.0;
  } else if (s2 > 0.0) {
    const double s = std::sqrt(s2);
    ch = std::cosh(s);
    shs = std::sinh(s) / s;
  } else {
    const double s = std::sqrt(-s2);
    ch = std::cos(s);
    shs = std::sin(s) / s;
  }
  return {ch + shs * d, shs * h, shs * h * fbar, ch - shs * d};
}

inline double scaled_diff(const Mat2& a, const Mat2& b, double rho) {
  // Compare in (rho*y, y') variables so all entries are O(1).
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]) * rho, std::abs(a[2] - b[2]) / rho,
                   std::abs(a[3] - b[3])});
}

inline double scaled_norm(const Mat2& a, double rho) {
  return std::max({std::abs(a[0]), std::abs(a[1]) * rho, std::abs(a[2]) / rho, std::abs(a[3])});
}

inline TransferValues integrate(const EdgePotential& q, double a, double lambda, const TransferOptions& opts) {
  const double rho = std::sqrt(std::max(std::abs(lambda), 1.0));
  const double h_max = std::min(a / opts.min_steps, 0.1 / rho);

  // Integrate piecewise between sample nodes so every step sees a smooth q.
  std::vector<double> breaks{0.0, a};
  if (q.kind() == EdgePotential::Kind::sampled) breaks = q.grid();

  Mat2 phi{1.0, 0.0, 0.0, 1.0};
  long steps = 0;
  double worst = 0.0;
  double h = h_max;
  for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
    double x = breaks[seg];
    const double end = breaks[seg + 1];
    while (x < end) {
      double hs = std::min({h, h_max, end - x});
      const bool last = (x + hs >= end);
      const Mat2 full = magnus_step(q, lambda, x, hs);
      const Mat2 half = mul(magnus_step(q, lambda, x + hs / 2, hs / 2), magnus_step(q, lambda, x, hs / 2));
      const double err = scaled_diff(full, half, rho) / 15.0;
      const double tol = opts.rel_tol * std::max(1.0, scaled_norm(half, rho));
      if (err <= tol || hs <= 1e-14 * a) {
        if (err > tol) worst = std::max(worst, err);
        phi = mul(half, phi);
        x = last ? end : x + hs;
        ++steps;
      }
      const double factor = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 2.0;
      h = hs * std::clamp(factor, 0.2, 2.0);
      if (steps > opts.max_steps)
        throw Error(Errc::integrator_failure, "step budget exhausted at x=" + std::to_string(x));
    }
  }
  if (worst > 1e3 * opts.rel_tol)
    throw Error(Errc::integrator_failure, "achieved local error " + std::to_string(worst));
  return {phi[0], phi[2], phi[1], phi[3], lambda};
}

}  // namespace detail

/// Fundamental-solution values at x = a for spectral parameter lambda.
inline TransferValues transfer_at(const EdgePotential& p, double a, double lambda, const TransferOptions& opts = {}) {
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(Errc::nonpositive_length, "transfer length");
  if (p.is_closed_form()) return detail::constant_coefficient(lambda - p.constant_value(), a, lambda);
  return detail::integrate(p, a, lambda, opts);
}

/// Scaled deviations from the large-rho expansions of C, C', S, S'.
struct AsymptoticResidual {
  double rho = 0.0;
  double rC = 0.0;   // rho   * |C  - cos - K sin / rho|
  double rCp = 0.0;  //         |C' + rho sin - K cos|
  double rS = 0.0;   // rho^2 * |S  - sin / rho + K cos / rho^2|
  double rSp = 0.0;  // rho   * |S' - cos - K sin / rho|
  double dC = 0.0;   // unscaled |C - cos(rho a)|
};

inline std::vector<AsymptoticResidual> asymptotic_residuals(const EdgePotential& p, double a,
                                                            const std::vector<double>& rhos,
                                                            const TransferOptions& opts = {}) {
  const double K = p.half_integral();
  std::vector<AsymptoticResidual> out;
  out.reserve(rhos.size());
  for (double rho : rhos) {
    if (!(rho > 0.0)) throw Error(Errc::out_of_domain, "rho must be positive");
    const TransferValues t = transfer_at(p, a, rho * rho, opts);
    const double c = std::cos(rho * a), s = std::sin(rho * a);
    AsymptoticResidual r;
    r.rho = rho;
    r.rC = rho * std::abs(t.C - c - K * s / rho);
    r.rCp = std::abs(t.Cp + rho * s - K * c);
    r.rS = rho * rho * std::abs(t.S - s / rho + K * c / (rho * rho));
    r.rSp = rho * std::abs(t.Sp - c - K * s / rho);
    r.dC = std::abs(t.C - c);
    out.push_back(r);
  }
  return out;
}

}  // namespace qgtree
