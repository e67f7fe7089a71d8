#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qgtree/charfn.hpp"
#include "qgtree/diophantine.hpp"
#include "qgtree/error.hpp"
#include "qgtree/potential.hpp"
#include "qgtree/spectrum.hpp"
#include "qgtree/tree.hpp"

namespace qgtree {

// ---------------------------------------------------------------------------
// Finite-difference oracle

/// Second-order finite-difference discretisation on the node graph of the
/// tree. Each edge is cut into ceil(a/h) equal cells; the three-point stencil
/// is written in flux form with half cells at vertices, which gives the
/// reflected (ghost-point) Neumann condition at pendant vertices and the
/// flux sum at junctions. The result is the symmetric pencil K - lambda M
/// with diagonal M.
class FdModel {
 public:
  FdModel(const MetricTree& tree, const PotentialVector& q, double h) {
    q.validate(tree);
    if (!(h > 0.0)) throw Error(Errc::invalid_argument, "mesh width must be positive");
    std::map<VertexId, int> vnode;
    for (VertexId v : tree.vertices()) vnode[v] = add_node();

    for (const Edge& e : tree.edges()) {
      const auto cells = static_cast<long>(std::ceil(e.length / h - 1e-9));
      if (cells - 1 < 8)
        throw Error(Errc::mesh_too_coarse, "edge " + std::to_string(e.id) + " gets " + std::to_string(cells - 1) +
                                               " interior nodes, need at least 8");
      const double hi = e.length / static_cast<double>(cells);
      const EdgePotential& p = q.at(e.id);
      // Local coordinate runs from the child (x = 0) to the parent (x = a).
      int prev = vnode[e.child];
      for (long k = 1; k <= cells; ++k) {
        const int cur = k == cells ? vnode[e.parent] : add_node();
        const double x0 = hi * static_cast<double>(k - 1), x1 = k == cells ? e.length : hi * static_cast<double>(k);
        couple(prev, cur, 1.0 / hi);
        mass_[prev] += 0.5 * hi;
        mass_[cur] += 0.5 * hi;
        pot_[prev] += 0.5 * hi * p.eval_unchecked(x0);
        pot_[cur] += 0.5 * hi * p.eval_unchecked(x1);
        prev = cur;
      }
    }
    order_and_link(vnode[tree.root()]);
  }

  std::size_t size() const noexcept { return mass_.size(); }

  /// Dense row-major K + diag(potential) and the diagonal of M; for small meshes.
  std::pair<std::vector<double>, std::vector<double>> dense_pencil() const {
    const std::size_t n = size();
    std::vector<double> k(n * n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      k[u * n + u] = diag_[u] + pot_[u];
      for (auto [w, x] : adj_[u]) k[u * n + static_cast<std::size_t>(w)] += x;
    }
    return {k, mass_};
  }

  /// Number of eigenvalues strictly below sigma (Sylvester inertia of
  /// K - sigma M via leaf-first LDL^T, which has no fill-in on a tree).
  long count_below(double sigma) const {
    std::vector<double> d(size());
    for (std::size_t u = 0; u < size(); ++u) d[u] = diag_[u] + pot_[u] - sigma * mass_[u];
    long negatives = 0;
    for (int u : post_order_) {
      double du = d[u];
      if (du == 0.0) du = -std::numeric_limits<double>::min();
      if (du < 0.0) ++negatives;
      if (up_[u] >= 0) d[up_[u]] -= up_w_[u] * up_w_[u] / du;
    }
    return negatives;
  }

  /// Bounds containing the whole spectrum.
  std::pair<double, double> spectral_bounds() const {
    double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
    for (std::size_t u = 0; u < size(); ++u) {
      const double c = (diag_[u] + pot_[u]) / mass_[u];
      const double r = off_sum_[u] / mass_[u];
      // Gershgorin on M^{-1/2} K M^{-1/2}; off-diagonal scaling bounded by the worst neighbour mass.
      lo = std::min(lo, c - r * max_ratio_);
      hi = std::max(hi, c + r * max_ratio_);
    }
    return {lo - 1.0, hi + 1.0};
  }

  /// k-th eigenvalue (0-based) by bisection on count_below.
  double eigenvalue(long k, double rel_tol = 1e-13) const {
    auto [lo, hi] = spectral_bounds();
    if (count_below(lo) > k || count_below(hi) <= k) throw Error(Errc::eigensolver_failure, "bad spectral bounds");
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (hi - lo <= rel_tol * std::max(1.0, std::abs(mid))) break;
      (count_below(mid) > k ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  int add_node() {
    mass_.push_back(0.0);
    pot_.push_back(0.0);
    diag_.push_back(0.0);
    off_sum_.push_back(0.0);
    adj_.emplace_back();
    return static_cast<int>(mass_.size()) - 1;
  }

  void couple(int a, int b, double w) {
    diag_[a] += w;
    diag_[b] += w;
    off_sum_[a] += w;
    off_sum_[b] += w;
    adj_[a].push_back({b, -w});
    adj_[b].push_back({a, -w});
  }

  void order_and_link(int root) {
    up_.assign(size(), -1);
    up_w_.assign(size(), 0.0);
    std::vector<int> stack{root}, pre;
    std::vector<char> seen(size(), 0);
    seen[root] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      pre.push_back(u);
      for (auto [w, k] : adj_[u]) {
        if (seen[w]) continue;
        seen[w] = 1;
        up_[w] = u;
        up_w_[w] = k;
        stack.push_back(w);
      }
    }
    post_order_.assign(pre.rbegin(), pre.rend());
    max_ratio_ = 1.0;
    for (std::size_t u = 0; u < size(); ++u)
      for (auto [w, k] : adj_[u]) max_ratio_ = std::max(max_ratio_, std::sqrt(mass_[u] / mass_[w]));
  }

  std::vector<double> mass_, pot_, diag_, off_sum_;
  std::vector<std::vector<std::pair<int, double>>> adj_;
  std::vector<int> up_;
  std::vector<double> up_w_;
  std::vector<int> post_order_;
  double max_ratio_ = 1.0;
};

/// Smallest `count` eigenvalues of the finite-difference problem, grouped
/// into entries when they coincide to bisection accuracy.
inline Spectrum fd_eigenvalues(const MetricTree& tree, const PotentialVector& q, double h, std::size_t count) {
  if (count == 0) throw Error(Errc::invalid_argument, "count must be positive");
  const FdModel model(tree, q, h);
  if (count > model.size()) throw Error(Errc::invalid_argument, "count exceeds number of unknowns");
  Spectrum s;
  s.step = h;
  s.tolerance = 1e-13;
  for (std::size_t k = 0; k < count; ++k) {
    const double lam = model.eigenvalue(static_cast<long>(k));
    if (!s.entries.empty() && std::abs(lam - s.entries.back().lambda) <= 1e-10 * std::max(1.0, std::abs(lam)))
      ++s.entries.back().multiplicity;
    else
      s.entries.push_back({lam, 1});
  }
  s.window = {s.entries.front().lambda, s.entries.back().lambda};
  return s;
}

/// Scan vs finite differences on the lowest eigenvalues.
struct OracleComparison {
  std::vector<double> scan;
  std::vector<double> fd;
  std::vector<double> diffs;
  std::vector<double> tolerances;  // max(1e-2, 10 h^2 lambda)
  double max_diff = 0.0;
  bool agree = true;
};

inline OracleComparison oracle_compare(const MetricTree& tree, const PotentialVector& q, double h, std::size_t count,
                                       const ScanOptions& opts = {}) {
  OracleComparison c;
  c.scan = lowest_eigenvalues(tree, q, count, opts);
  c.fd = fd_eigenvalues(tree, q, h, count).expanded();
  for (std::size_t i = 0; i < count; ++i) {
    const double d = std::abs(c.scan[i] - c.fd[i]);
    const double tol = std::max(1e-2, 10.0 * h * h * std::abs(c.scan[i]));
    c.diffs.push_back(d);
    c.tolerances.push_back(tol);
    c.max_diff = std::max(c.max_diff, d);
    if (!(d <= tol)) c.agree = false;
  }
  return c;
}

// ---------------------------------------------------------------------------
// The mu_n ladder

/// One rung: Diophantine denominator m, mu = 2 pi m / L, the psi pair at mu
/// and the nearby zero rho of psi_N.
struct LadderRung {
  long long n = 0;
  long long m = 0;
  double mu = 0.0;
  double psiN_mu = 0.0;
  double psiD_mu = 0.0;
  double rho = std::numeric_limits<double>::quiet_NaN();
  bool rho_found = false;
};

struct LadderOptions {
  std::size_t rungs = 8;
  ApproxOptions approx;
};

/// Grid parameters for the ladder: n = 1, 2, ... for rational ratios;
/// otherwise n = max(I, 2) * 2^j within the pigeonhole budget.
inline std::vector<long long> ladder_grid(const MetricTree& tree, const LadderOptions& opts = {}) {
  const auto alphas = length_ratios(tree);
  std::vector<long long> ns;
  if (detect_rational(alphas, opts.approx.max_denominator, opts.approx.rational_tol)) {
    for (std::size_t j = 1; j <= opts.rungs; ++j) ns.push_back(static_cast<long long>(j));
    return ns;
  }
  const std::size_t I = alphas.size();
  for (long long n = std::max<long long>(static_cast<long long>(I), 2);; n *= 2) {
    const std::uint64_t pts = detail::saturating_pow(n, I);
    if (pts == std::numeric_limits<std::uint64_t>::max() || pts + 1 > opts.approx.budget) break;
    ns.push_back(n);
  }
  return ns;
}

inline std::vector<LadderRung> mu_ladder(const MetricTree& tree, const std::vector<long long>& n_list,
                                         const ApproxOptions& approx = {}) {
  const auto alphas = length_ratios(tree);
  const auto seq = m_sequence(alphas, n_list, approx);
  const PsiFunction psi(tree);
  std::vector<LadderRung> out;
  for (const SimultaneousApprox& s : seq) {
    if (!out.empty() && s.m <= out.back().m) continue;
    LadderRung r;
    r.n = s.n;
    r.m = s.m;
    r.mu = mu_sequence(tree, {s.m}).mu_values[0];
    const CharPair z = psi.at_rho(r.mu);
    r.psiN_mu = z.neumann();
    r.psiD_mu = z.dirichlet();
    try {
      r.rho = rho_near_mu(psi, r.mu);
      r.rho_found = true;
    } catch (const Error& e) {
      if (e.code() != Errc::no_zero_found) throw;
    }
    out.push_back(r);
  }
  return out;
}

/// Least-squares slope of log|y| against log x; points with y == 0 are skipped.
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    if (!(xs[i] > 0.0) || !(std::abs(ys[i]) > 0.0)) continue;
    const double lx = std::log(xs[i]), ly = std::log(std::abs(ys[i]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (n * sxy - sx * sy) / den;
}

/// True when medians over sliding windows of three never increase.
inline bool trend_nonincreasing(const std::vector<double>& v, double slack = 0.0) {
  if (v.size() < 3) return true;
  std::vector<double> med;
  for (std::size_t i = 0; i + 2 < v.size(); ++i) {
    std::array<double, 3> w{v[i], v[i + 1], v[i + 2]};
    std::sort(w.begin(), w.end());
    med.push_back(w[1]);
  }
  for (std::size_t i = 1; i < med.size(); ++i)
    if (med[i] > med[i - 1] * (1.0 + slack) + 1e-15) return false;
  return true;
}

// ---------------------------------------------------------------------------
// The uniqueness experiment

struct EstimatorRung {
  long long m = 0;
  double rho = 0.0;
  double estimate = 0.0;
  double error = 0.0;
};

struct ExperimentOptions {
  double gap_tolerance = 1e-3;
  double estimator_rel_tol = 0.1;   // relative to max(|sum K|, (1/2) sum int |q|)
  double vanish_tolerance = 1e-3;   // for sum K, lambda_1 and the constant residual
  LadderOptions ladder;
  ScanOptions scan;
};

struct ExperimentReport {
  std::string tree_summary;
  std::string potential_summary;
  std::size_t count = 0;
  std::vector<double> sigma_q;
  std::vector<double> sigma_0;
  std::vector<double> gaps;
  double max_gap = 0.0;
  double gap_tolerance = 0.0;

  double sumK_true = 0.0;
  double abs_half_integral = 0.0;  // (1/2) sum int |q|
  std::vector<EstimatorRung> trace;
  double sumK_estimate = std::numeric_limits<double>::quiet_NaN();
  double estimator_tolerance = 0.0;
  bool estimator_ok = false;
  bool estimator_trend_ok = false;

  double rayleigh_quotient = 0.0;  // sum int q / L for y = 1
  double lambda1 = 0.0;
  double constant_residual = 0.0;  // || q - lambda_1 || in L^2(tree)

  bool spectra_equal = false;
  bool potential_vanishes = false;
  std::string verdict;
  bool pass = false;
};

namespace detail {

/// 5-point Gauss-Legendre on n equal cells of [a, b].
template <class F>
double gauss_integral(F&& f, double a, double b, int cells) {
  static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
  static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                              0.2369268850561891};
  double acc = 0.0;
  const double h = (b - a) / cells;
  for (int c = 0; c < cells; ++c) {
    const double m = a + (c + 0.5) * h;
    for (int k = 0; k < 5; ++k) acc += w[k] * f(m + 0.5 * h * x[k]);
  }
  return 0.5 * h * acc;
}

/// Integral of g(q(x)) over an edge, splitting at sample nodes.
template <class G>
double edge_integral(const EdgePotential& p, G&& g) {
  auto f = [&](double x) { return g(p.eval_unchecked(x)); };
  if (p.kind() != EdgePotential::Kind::sampled) return gauss_integral(f, 0.0, p.length(), 64);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < p.grid().size(); ++i) acc += gauss_integral(f, p.grid()[i], p.grid()[i + 1], 2);
  return acc;
}

inline std::string describe(const MetricTree& t) {
  std::ostringstream os;
  os << "I=" << t.edge_count() << " L=" << std::setprecision(10) << t.total_length() << " root=" << t.root();
  return os.str();
}

inline std::string describe(const PotentialVector& q) {
  static const char* names[] = {"zero", "constant", "poly", "samples"};
  std::ostringstream os;
  bool first = true;
  for (const auto& [id, p] : q.entries()) {
    os << (first ? "" : " ") << id << ':' << names[static_cast<int>(p.kind())];
    first = false;
  }
  return os.str();
}

}  // namespace detail

/// Compares sigma(Q) with sigma(0) on the first N eigenvalues and collects
/// the quantities the uniqueness argument runs through: the sum K estimator
/// along the rho_n ladder, the Rayleigh quotient of y = 1 and the residual
/// of the constant function as an eigenfunction.
inline ExperimentReport ambarzumyan_experiment(const MetricTree& tree, const PotentialVector& q, std::size_t N,
                                               const ExperimentOptions& opts = {}) {
  if (N < 1) throw Error(Errc::invalid_argument, "N must be >= 1");
  q.validate(tree);
  ExperimentReport r;
  r.tree_summary = detail::describe(tree);
  r.potential_summary = detail::describe(q);
  r.count = N;
  r.gap_tolerance = opts.gap_tolerance;

  r.sigma_q = lowest_eigenvalues(tree, q, N, opts.scan);
  r.sigma_0 = lowest_eigenvalues(tree, PotentialVector::zero(tree), N, opts.scan);
  for (std::size_t i = 0; i < N; ++i) {
    r.gaps.push_back(std::abs(r.sigma_q[i] - r.sigma_0[i]));
    r.max_gap = std::max(r.max_gap, r.gaps.back());
  }
  r.spectra_equal = r.max_gap <= opts.gap_tolerance;

  r.sumK_true = sum_K(q);
  for (const auto& [id, p] : q.entries()) r.abs_half_integral += 0.5 * detail::edge_integral(p, [](double v) { return std::abs(v); });
  r.estimator_tolerance = opts.estimator_rel_tol * std::max(std::abs(r.sumK_true), r.abs_half_integral);

  const CharFunction phi(tree, q, std::nullopt, opts.scan.transfer);
  const PsiFunction psi(tree);
  for (const LadderRung& rung : mu_ladder(tree, ladder_grid(tree, opts.ladder), opts.ladder.approx)) {
    if (!rung.rho_found) continue;
    try {
      const double est = sumK_estimate(phi, psi, rung.rho);
      r.trace.push_back({rung.m, rung.rho, est, std::abs(est - r.sumK_true)});
    } catch (const Error& e) {
      if (e.code() != Errc::estimator_unreliable) throw;
    }
  }
  if (!r.trace.empty()) {
    r.sumK_estimate = r.trace.back().estimate;
    r.estimator_ok = r.trace.back().error <= r.estimator_tolerance;
    std::vector<double> errs;
    for (const auto& t : r.trace) errs.push_back(t.error);
    r.estimator_trend_ok = trend_nonincreasing(errs, 0.05);
  }

  const double L = tree.total_length();
  r.rayleigh_quotient = 2.0 * r.sumK_true / L;
  r.lambda1 = r.sigma_q.front();
  double res2 = 0.0;
  for (const auto& [id, p] : q.entries()) {
    const double l1 = r.lambda1;
    res2 += detail::edge_integral(p, [l1](double v) { return (v - l1) * (v - l1); });
  }
  r.constant_residual = std::sqrt(res2);
  r.potential_vanishes = std::abs(r.sumK_true) <= opts.vanish_tolerance &&
                         std::abs(r.lambda1) <= opts.vanish_tolerance &&
                         r.constant_residual <= opts.vanish_tolerance;

  if (!r.spectra_equal) {
    r.verdict = "spectra differ";
    r.pass = r.estimator_ok;
  } else if (r.potential_vanishes) {
    r.verdict = "spectra equal, potential vanishes";
    r.pass = r.estimator_ok;
  } else {
    r.verdict = "spectra equal, potential does not vanish";
    r.pass = false;
  }
  if (!r.estimator_ok) r.verdict += " (sum K estimate disagrees)";
  return r;
}

inline void write_report(std::ostream& os, const ExperimentReport& r) {
  const auto old = os.precision(10);
  os << "tree: " << r.tree_summary << "\n";
  os << "potential: " << r.potential_summary << "\n";
  os << "index,lambda_q,lambda_0,gap\n";
  for (std::size_t i = 0; i < r.count; ++i)
    os << i << ',' << r.sigma_q[i] << ',' << r.sigma_0[i] << ',' << r.gaps[i] << "\n";
  os << "max gap: " << r.max_gap << " (tolerance " << r.gap_tolerance << ")\n";
  os << "sum K: true " << r.sumK_true << ", estimate " << r.sumK_estimate << " (tolerance " << r.estimator_tolerance
     << ")\n";
  os << "m,rho,estimate,error\n";
  for (const auto& t : r.trace) os << t.m << ',' << t.rho << ',' << t.estimate << ',' << t.error << "\n";
  os << "rayleigh quotient of y=1: " << r.rayleigh_quotient << "\n";
  os << "lambda_1: " << r.lambda1 << ", constant residual: " << r.constant_residual << "\n";
  os << "verdict: " << r.verdict << "\n";
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Sampling for plots

/// CSV of (lambda, phiN, phiD, psiN, psiD) on a uniform grid, 15 significant digits.
inline void charfn_samples(std::ostream& os, const MetricTree& tree, const PotentialVector& q, Window w,
                           std::size_t count, std::optional<VertexId> dirichlet_leaf = std::nullopt) {
  if (count < 2) throw Error(Errc::invalid_argument, "count must be >= 2");
  if (!(w.hi > w.lo)) throw Error(Errc::invalid_argument, "window must have lo < hi");
  const CharFunction phi(tree, q, dirichlet_leaf);
  const PsiFunction psi(tree, dirichlet_leaf);
  const auto old = os.precision(15);
  os << "lambda,phiN,phiD,psiN,psiD\n";
  for (std::size_t i = 0; i < count; ++i) {
    const double lam = i + 1 == count ? w.hi : w.lo + (w.hi - w.lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    const CharPair p = phi(lam), z = psi(lam);
    os << lam << ',' << p.neumann() << ',' << p.dirichlet() << ',' << z.neumann() << ',' << z.dirichlet() << "\n";
  }
  os.precision(old);
}

}  // namespace qgtree
