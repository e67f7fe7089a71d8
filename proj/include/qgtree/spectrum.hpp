#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <thread>
#include <vector>

#include "qgtree/charfn.hpp"
#include "qgtree/error.hpp"
#include "qgtree/potential.hpp"
#include "qgtree/tree.hpp"

namespace qgtree {

struct SpectrumEntry {
  double lambda = 0.0;
  int multiplicity = 1;
};

struct Window {
  double lo = 0.0;
  double hi = 0.0;
};

/// Admissible eigenvalue count (with multiplicity) below lambda_hi.
struct WeylRange {
  long expected = 0;
  long low = 0;
  long high = 0;

  bool contains(long n) const { return n >= low && n <= high; }
};

struct Spectrum {
  std::vector<SpectrumEntry> entries;
  Window window;
  double tolerance = 0.0;
  double step = 0.0;
  WeylRange weyl;
  bool weyl_checked = false;
  bool weyl_ok = true;

  long count() const {
    long n = 0;
    for (const auto& e : entries) n += e.multiplicity;
    return n;
  }

  /// Eigenvalues repeated according to multiplicity.
  std::vector<double> expanded() const {
    std::vector<double> out;
    for (const auto& e : entries)
      for (int k = 0; k < e.multiplicity; ++k) out.push_back(e.lambda);
    return out;
  }
};

/// floor(L sqrt(lambda_hi) / pi) with slack I, widened by the potential's sup norm.
inline WeylRange weyl_count(const MetricTree& tree, double lambda_hi, double potential_sup = 0.0) {
  const double L = tree.total_length();
  const long I = static_cast<long>(tree.edge_count());
  auto n = [&](double lam) { return lam > 0.0 ? static_cast<long>(std::floor(L * std::sqrt(lam) / std::numbers::pi)) : 0L; };
  WeylRange w;
  w.expected = n(lambda_hi);
  w.low = std::max(0L, n(lambda_hi - potential_sup) - I);
  w.high = n(lambda_hi + potential_sup) + I;
  return w;
}

/// Lower end of the window guaranteed to lie below every eigenvalue.
inline double default_lower_bound(const PotentialVector& q) { return -(q.sup_abs() + 1.0); }

/// Scan step in lambda units keeping the rho-step below pi/(4L).
inline double default_step(const MetricTree& tree, Window w) {
  const double L = tree.total_length();
  const double span = w.hi - w.lo;
  double step = span / 64.0;
  if (w.hi > 0.0) step = std::min(step, std::numbers::pi * std::numbers::pi / (4.0 * L * std::sqrt(w.hi)));
  return step;
}

struct RootOptions {
  double step = 0.0;               // 0 selects the caller's default
  double root_tol = 1e-12;         // relative bisection width
  double even_threshold = 1e-6;    // |f| at a no-sign-change minimum, relative to neighbours
  unsigned threads = 0;            // 0 = hardware concurrency
};

namespace detail {

inline std::vector<double> sample_parallel(const std::function<double(double)>& f, const std::vector<double>& xs,
                                           unsigned threads) {
  std::vector<double> ys(xs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, xs.size() / 64)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
    return ys;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (xs.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          const std::size_t b = t * chunk, e = std::min(xs.size(), b + chunk);
          for (std::size_t i = b; i < e; ++i) ys[i] = f(xs[i]);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return ys;
}

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

inline double bisect(const std::function<double(double)>& f, double a, double b, double fa, double tol) {
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (b - a <= tol * std::max(1.0, std::abs(m)) || m <= a || m >= b) break;
    const double fm = f(m);
    if (fm == 0.0) return m;
    if (sign(fm) == sign(fa)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Local order of the zero at x0 from |f(x0 +- 2t)| / |f(x0 +- t)| ~ 2^m.
inline double zero_order(const std::function<double(double)>& f, double x0, double t) {
  double acc = 0.0;
  int n = 0;
  for (double dir : {-1.0, 1.0}) {
    const double f1 = std::abs(f(x0 + dir * t)), f2 = std::abs(f(x0 + dir * 2.0 * t));
    if (f1 > 0.0 && f2 > 0.0) {
      acc += std::log2(f2 / f1);
      ++n;
    }
  }
  return n ? acc / n : 1.0;
}

inline int round_with_parity(double m, bool odd) {
  int k = std::max(1, static_cast<int>(std::lround(m)));
  if ((k % 2 == 1) != odd) k = (m >= k) ? k + 1 : std::max(odd ? 1 : 2, k - 1);
  return k;
}

}  // namespace detail

/// Zeros of an entire function sampled on a uniform grid over the window.
/// Sign changes are bisected; minima of |f| without a sign change are refined
/// through the derivative and kept when |f| drops below `even_threshold`
/// relative to the neighbouring samples. Multiplicity comes from the local
/// growth order |f(x0 + t)| ~ t^m.
inline std::vector<SpectrumEntry> find_zeros(const std::function<double(double)>& f, Window w, const RootOptions& opts) {
  if (!(w.hi > w.lo) || !std::isfinite(w.lo) || !std::isfinite(w.hi))
    throw Error(Errc::invalid_argument, "window must be finite with lo < hi");
  const double step = opts.step;
  if (!(step > 0.0)) throw Error(Errc::invalid_argument, "scan step must be positive");
  const auto count = static_cast<std::size_t>(std::ceil((w.hi - w.lo) / step));
  if (count > 50'000'000) throw Error(Errc::invalid_argument, "scan step too small for window");

  std::vector<double> xs(count + 1);
  for (std::size_t i = 0; i <= count; ++i) xs[i] = std::min(w.hi, w.lo + step * static_cast<double>(i));
  const std::vector<double> ys = detail::sample_parallel(f, xs, opts.threads);

  const double t_order = step / 16.0;
  std::vector<std::pair<double, bool>> roots;  // (location, odd order)
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ys[i] == 0.0) {
      // An exact zero on the grid; its order decides the parity. Another zero
      // may share a neighbouring cell, so probe just beside the node.
      roots.emplace_back(xs[i], true);
      const double probe = 1e-3 * step;
      if (i + 1 < xs.size() && ys[i + 1] != 0.0) {
        const double xr = xs[i] + probe, fr = f(xr);
        if (fr != 0.0 && detail::sign(fr) != detail::sign(ys[i + 1]))
          roots.emplace_back(detail::bisect(f, xr, xs[i + 1], fr, opts.root_tol), true);
      }
      if (i > 0 && ys[i - 1] != 0.0) {
        const double xl = xs[i] - probe, fl = f(xl);
        if (fl != 0.0 && detail::sign(fl) != detail::sign(ys[i - 1]))
          roots.emplace_back(detail::bisect(f, xs[i - 1], xl, ys[i - 1], opts.root_tol), true);
      }
      continue;
    }
    if (i + 1 < xs.size() && ys[i + 1] != 0.0 && detail::sign(ys[i]) != detail::sign(ys[i + 1])) {
      roots.emplace_back(detail::bisect(f, xs[i], xs[i + 1], ys[i], opts.root_tol), true);
      continue;
    }
    if (i == 0 || i + 1 >= xs.size()) continue;
    const double a = std::abs(ys[i - 1]), b = std::abs(ys[i]), c = std::abs(ys[i + 1]);
    if (!(b <= a && b <= c) || ys[i - 1] == 0.0 || ys[i + 1] == 0.0) continue;
    if (detail::sign(ys[i - 1]) != detail::sign(ys[i]) || detail::sign(ys[i + 1]) != detail::sign(ys[i])) continue;

    // Even-order candidate: locate the critical point of f in (x[i-1], x[i+1]).
    const double eta = 1e-5 * step;
    auto df = [&](double x) { return f(x + eta) - f(x - eta); };
    const double lo = xs[i - 1] + eta, hi = xs[i + 1] - eta;
    const double dlo = df(lo), dhi = df(hi);
    if (detail::sign(dlo) == detail::sign(dhi)) continue;
    const double xc = detail::bisect(df, lo, hi, dlo, opts.root_tol);
    const double fc = f(xc);
    const int s0 = detail::sign(ys[i]);
    if (fc != 0.0 && detail::sign(fc) != s0) {
      // Two simple zeros closer than the scan step.
      roots.emplace_back(detail::bisect(f, xs[i - 1], xc, ys[i - 1], opts.root_tol), true);
      roots.emplace_back(detail::bisect(f, xc, xs[i + 1], fc, opts.root_tol), true);
    } else if (std::abs(fc) <= opts.even_threshold * std::max(a, c)) {
      roots.emplace_back(xc, false);
    }
  }
  std::sort(roots.begin(), roots.end());

  std::vector<SpectrumEntry> out;
  const double merge_tol = 1e-9;
  for (const auto& [x, odd] : roots) {
    if (!out.empty() && std::abs(x - out.back().lambda) <= merge_tol * std::max(1.0, std::abs(x))) continue;
    const double m = detail::zero_order(f, x, t_order);
    // Grid-exact zeros carry no parity information.
    const bool on_grid = std::find(xs.begin(), xs.end(), x) != xs.end();
    const int mult = on_grid ? std::max(1, static_cast<int>(std::lround(m))) : detail::round_with_parity(m, odd);
    out.push_back({x, mult});
  }
  return out;
}

struct ScanOptions {
  double step = 0.0;                       // lambda units; 0 = default_step
  std::optional<VertexId> dirichlet_leaf;  // scan phi_D instead of phi_N
  bool use_determinant = false;            // det_char route instead of the recursion
  bool strict_weyl = false;                // throw on Weyl mismatch
  double root_tol = 1e-12;
  double even_threshold = 1e-6;
  unsigned threads = 0;
  TransferOptions transfer;
};

/// Eigenvalues in the window as zeros of phi_N (or phi_D with a Dirichlet leaf).
inline Spectrum scan_spectrum(const MetricTree& tree, const PotentialVector& q, Window w, const ScanOptions& opts = {}) {
  std::function<double(double)> f;
  if (opts.use_determinant) {
    DetFunction det(tree, q, opts.dirichlet_leaf, opts.transfer);
    f = [det](double lam) { return det(lam); };
  } else {
    CharFunction phi(tree, q, opts.dirichlet_leaf, opts.transfer);
    const bool dirichlet = opts.dirichlet_leaf.has_value();
    f = [phi, dirichlet](double lam) {
      const CharPair p = phi(lam);
      return dirichlet ? p.dirichlet() : p.neumann();
    };
  }

  RootOptions ro;
  ro.step = opts.step > 0.0 ? opts.step : default_step(tree, w);
  ro.root_tol = opts.root_tol;
  ro.even_threshold = opts.even_threshold;
  ro.threads = opts.threads;

  Spectrum s;
  s.window = w;
  s.step = ro.step;
  s.tolerance = opts.root_tol;
  s.entries = find_zeros(f, w, ro);

  if (w.lo <= default_lower_bound(q) && w.hi > 0.0) {
    s.weyl = weyl_count(tree, w.hi, q.sup_abs());
    s.weyl_checked = true;
    s.weyl_ok = s.weyl.contains(s.count());
    if (!s.weyl_ok && opts.strict_weyl)
      throw Error(Errc::weyl_mismatch, "found " + std::to_string(s.count()) + " eigenvalues, admissible [" +
                                           std::to_string(s.weyl.low) + ", " + std::to_string(s.weyl.high) + "]");
  }
  return s;
}

/// Smallest `count` eigenvalues with multiplicity, growing the window as needed.
inline std::vector<double> lowest_eigenvalues(const MetricTree& tree, const PotentialVector& q, std::size_t count,
                                              ScanOptions opts = {}) {
  const double L = tree.total_length();
  const double sup = q.sup_abs();
  const double lo = default_lower_bound(q);
  double hi = std::pow((static_cast<double>(count + tree.edge_count()) + 1.0) * std::numbers::pi / L, 2) + sup + 1.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    ScanOptions o = opts;
    o.step = 0.0;
    const Spectrum s = scan_spectrum(tree, q, {lo, hi}, o);
    auto all = s.expanded();
    if (all.size() >= count) {
      all.resize(count);
      return all;
    }
    hi *= 2.0;
  }
  throw Error(Errc::weyl_mismatch, "could not collect " + std::to_string(count) + " eigenvalues");
}

/// mu_n = 2 pi m_n / L.
struct MuSequence {
  std::vector<long long> m_values;
  std::vector<double> mu_values;
};

inline MuSequence mu_sequence(const MetricTree& tree, const std::vector<long long>& m_values) {
  MuSequence out;
  const long double L = tree.precise_total_length();
  for (std::size_t i = 0; i < m_values.size(); ++i) {
    if (m_values[i] <= 0 || (i > 0 && m_values[i] <= m_values[i - 1]))
      throw Error(Errc::invalid_argument, "m values must be positive and strictly increasing");
    out.m_values.push_back(m_values[i]);
    out.mu_values.push_back(static_cast<double>(2.0L * std::numbers::pi_v<long double> * m_values[i] / L));
  }
  return out;
}

/// Zero of psi_N nearest to mu. The search radius starts at 2|psi_N(mu)|/L,
/// the localisation radius implied by psi_N' >= L/2 near mu, and doubles up to
/// ten times that radius.
inline double rho_near_mu(const PsiFunction& psi, double mu) {
  if (!(mu > 0.0)) throw Error(Errc::out_of_domain, "mu must be positive");
  const double L = psi.tree().total_length();
  auto f = [&](double r) { return psi.at_rho(r).neumann(); };
  const double f0 = f(mu);
  if (f0 == 0.0) return mu;
  const double delta = 2.0 * std::abs(f0) / L + 8.0 * std::numeric_limits<double>::epsilon() * mu;
  const double tol = 1e-16;
  std::vector<double> widths;
  for (double w = delta; w < 10.0 * delta; w *= 2.0) widths.push_back(w);
  widths.push_back(10.0 * delta);
  for (double w : widths) {
    const double fl = f(mu - w), fr = f(mu + w);
    std::optional<double> best;
    if (detail::sign(fl) != detail::sign(f0)) best = detail::bisect(f, mu - w, mu, fl, tol);
    if (detail::sign(fr) != detail::sign(f0)) {
      const double r = detail::bisect(f, mu, mu + w, f0, tol);
      if (!best || std::abs(r - mu) < std::abs(*best - mu)) best = r;
    }
    if (best) return *best;
  }
  throw Error(Errc::no_zero_found, "no zero of psi_N within " + std::to_string(10.0 * delta) + " of mu=" + std::to_string(mu));
}

inline double rho_near_mu(const MetricTree& tree, double mu) { return rho_near_mu(PsiFunction(tree), mu); }

}  // namespace qgtree
