#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qgtree/error.hpp"
#include "qgtree/tree.hpp"

namespace qgtree {

/// Common-denominator approximation k_i / m of the length ratios alpha_i.
struct SimultaneousApprox {
  long long n = 0;
  long long m = 0;
  std::vector<long long> k;
  std::vector<double> errors;  // |alpha_i - k_i / m|
  double bound = 0.0;          // m^(-1 - 1/I)
  bool rational = false;       // taken from the exact rational representation
};

struct RationalRatios {
  long long p = 0;
  std::vector<long long> q;
};

struct ApproxOptions {
  std::uint64_t budget = 10'000'000;  // max pigeonhole points n^I + 1
  long long max_denominator = 1'000'000;
  long double rational_tol = 1e-12L;
};

/// Length ratios a_i / L in extended precision.
inline std::vector<long double> length_ratios(const MetricTree& tree) {
  const long double L = tree.precise_total_length();
  std::vector<long double> out;
  for (const Edge& e : tree.edges()) out.push_back(e.precise_length / L);
  return out;
}

/// Smallest p <= max_denominator with alpha_i = q_i / p for all i.
inline std::optional<RationalRatios> detect_rational(std::span<const long double> alphas, long long max_denominator,
                                                     long double tol = 1e-12L) {
  if (max_denominator < 1) throw Error(Errc::invalid_argument, "max_denominator must be >= 1");
  for (long long p = 1; p <= max_denominator; ++p) {
    bool ok = true;
    for (long double a : alphas) {
      const long double q = std::nearbyint(a * p);
      if (std::abs(a - q / p) > tol) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    RationalRatios r{p, {}};
    for (long double a : alphas) r.q.push_back(static_cast<long long>(std::nearbyint(a * p)));
    return r;
  }
  return std::nullopt;
}

namespace detail {

inline void check_ratios(std::span<const long double> alphas) {
  if (alphas.empty()) throw Error(Errc::invalid_argument, "no ratios");
  long double sum = 0.0L;
  for (long double a : alphas) {
    if (!(a > 0.0L) || a > 1.0L) throw Error(Errc::invalid_argument, "ratios must lie in (0, 1]");
    sum += a;
  }
  if (std::abs(sum - 1.0L) > 1e-12L) throw Error(Errc::invalid_argument, "ratios must sum to 1");
}

inline std::uint64_t saturating_pow(long long n, std::size_t e) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < e; ++i) {
    if (r > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(n))
      return std::numeric_limits<std::uint64_t>::max();
    r *= static_cast<std::uint64_t>(n);
  }
  return r;
}

inline SimultaneousApprox finish(long long n, long long m, std::vector<long long> k, std::span<const long double> alphas,
                                 bool rational) {
  SimultaneousApprox s;
  s.n = n;
  s.m = m;
  s.k = std::move(k);
  s.rational = rational;
  const auto I = static_cast<long double>(alphas.size());
  s.bound = static_cast<double>(std::pow(static_cast<long double>(m), -1.0L - 1.0L / I));
  for (std::size_t i = 0; i < alphas.size(); ++i)
    s.errors.push_back(static_cast<double>(std::abs(alphas[i] - static_cast<long double>(s.k[i]) / m)));
  return s;
}

}  // namespace detail

/// Pigeonhole construction: among the fractional-part vectors of p * alpha,
/// p = 0..n^I, two share a subcube of side 1/n; m = p2 - p1. The first
/// collision in increasing p is returned. Rational ratios (denominator up to
/// `max_denominator`) short-circuit to their exact representation.
inline SimultaneousApprox simultaneous_approx(std::span<const long double> alphas, long long n,
                                              const ApproxOptions& opts = {}) {
  detail::check_ratios(alphas);
  if (n < 1) throw Error(Errc::invalid_argument, "n must be >= 1");
  const std::size_t I = alphas.size();

  if (auto r = detect_rational(alphas, opts.max_denominator, opts.rational_tol))
    return detail::finish(n, r->p, r->q, alphas, true);

  const std::uint64_t cells = detail::saturating_pow(n, I);
  if (cells == std::numeric_limits<std::uint64_t>::max() || cells + 1 > opts.budget) {
    long long best = 1;
    while (detail::saturating_pow(best + 1, I) + 1 <= opts.budget) ++best;
    throw Error(Errc::budget_exceeded, "n^I + 1 exceeds budget " + std::to_string(opts.budget) +
                                           "; largest feasible n is " + std::to_string(best));
  }

  std::unordered_map<std::uint64_t, std::uint64_t> first_seen;
  first_seen.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(cells + 1, 1u << 20)));
  const auto nl = static_cast<long double>(n);
  std::vector<long long> floors(I);
  for (std::uint64_t p = 0; p <= cells; ++p) {
    std::uint64_t key = 0;
    for (std::size_t i = I; i-- > 0;) {
      const long double x = static_cast<long double>(p) * alphas[i];
      const long double fl = std::floor(x);
      const long double frac = x - fl;
      // Cells (j/n, (j+1)/n], with 0 in cell 0: boundary points go to the lower cell.
      long long cell = static_cast<long long>(std::ceil(frac * nl)) - 1;
      cell = std::clamp(cell, 0LL, n - 1);
      key = key * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(cell);
    }
    auto [it, inserted] = first_seen.try_emplace(key, p);
    if (inserted) continue;

    const std::uint64_t p1 = it->second;
    const auto m = static_cast<long long>(p - p1);
    std::vector<long long> k(I);
    bool strict = true;
    for (std::size_t i = 0; i < I; ++i) {
      const long double x2 = static_cast<long double>(p) * alphas[i], x1 = static_cast<long double>(p1) * alphas[i];
      k[i] = static_cast<long long>(std::floor(x2) - std::floor(x1));
      if (!(std::abs(static_cast<long double>(m) * alphas[i] - k[i]) < 1.0L / nl)) strict = false;
    }
    // Only the closed cell 0 can produce a gap of exactly 1/n; skip such pairs.
    if (!strict) continue;

    SimultaneousApprox s = detail::finish(n, m, std::move(k), alphas, false);
    for (std::size_t i = 0; i < I; ++i)
      if (!(s.errors[i] < s.bound)) throw std::logic_error("pigeonhole bound violated");
    return s;
  }
  throw std::logic_error("pigeonhole principle failed to produce a collision");
}

/// Approximations along an increasing list of n. Rational ratios q_i/p are
/// scaled to k_i = n q_i, m = n p so that m grows without bound.
inline std::vector<SimultaneousApprox> m_sequence(std::span<const long double> alphas, const std::vector<long long>& n_list,
                                                  const ApproxOptions& opts = {}) {
  std::vector<SimultaneousApprox> out;
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    if (j > 0 && n_list[j] <= n_list[j - 1]) throw Error(Errc::invalid_argument, "n list must be increasing");
    SimultaneousApprox s = simultaneous_approx(alphas, n_list[j], opts);
    if (s.rational) {
      for (long long& k : s.k) k *= n_list[j];
      s = detail::finish(n_list[j], s.m * n_list[j], s.k, alphas, true);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline long long sum_k(const SimultaneousApprox& s) {
  long long t = 0;
  for (long long k : s.k) t += k;
  return t;
}

}  // namespace qgtree
