#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qgtree/error.hpp"
#include "qgtree/tree.hpp"

namespace qgtree {

/// Potential q_i on one edge, in the edge's local coordinate x in [0, a].
class EdgePotential {
 public:
  enum class Kind { zero, constant, polynomial, sampled };

  EdgePotential() = default;

  static EdgePotential zero(double length) { return EdgePotential(Kind::zero, length); }

  static EdgePotential constant(double c, double length) {
    EdgePotential p(Kind::constant, length);
    p.coeffs_ = {c};
    return p;
  }

  /// q(x) = c[0] + c[1] x + c[2] x^2 + ...
  static EdgePotential polynomial(std::vector<double> coeffs, double length) {
    if (coeffs.empty()) return zero(length);
    EdgePotential p(Kind::polynomial, length);
    p.coeffs_ = std::move(coeffs);
    return p;
  }

  /// Piecewise-linear interpolation of (grid, values); grid strictly
  /// increasing from 0 to `length`.
  static EdgePotential sampled(std::vector<double> grid, std::vector<double> values, double length) {
    if (grid.size() != values.size() || grid.size() < 2)
      throw Error(Errc::invalid_potential, "sampled potential needs matching grid/values of size >= 2");
    const double tol = 1e-9 * std::max(1.0, length);
    if (std::abs(grid.front()) > tol || std::abs(grid.back() - length) > tol)
      throw Error(Errc::invalid_potential, "sample grid must span [0, a]");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1])) throw Error(Errc::invalid_potential, "sample grid not increasing");
    for (double v : values)
      if (!std::isfinite(v)) throw Error(Errc::invalid_potential, "non-finite sample");
    grid.front() = 0.0;
    grid.back() = length;
    EdgePotential p(Kind::sampled, length);
    p.grid_ = std::move(grid);
    p.values_ = std::move(values);
    return p;
  }

  /// Samples `f` on a uniform grid of `points` nodes.
  static EdgePotential sample(const std::function<double(double)>& f, double length, int points) {
    if (points < 2) throw Error(Errc::invalid_potential, "need at least two samples");
    std::vector<double> grid(points), values(points);
    for (int i = 0; i < points; ++i) {
      grid[i] = length * i / (points - 1);
      values[i] = f(grid[i]);
    }
    return sampled(std::move(grid), std::move(values), length);
  }

  Kind kind() const noexcept { return kind_; }
  double length() const noexcept { return length_; }
  const std::vector<double>& coefficients() const noexcept { return coeffs_; }
  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool is_closed_form() const noexcept { return kind_ == Kind::zero || kind_ == Kind::constant; }

  /// Constant value for zero/constant kinds.
  double constant_value() const noexcept { return kind_ == Kind::constant ? coeffs_[0] : 0.0; }

  double operator()(double x) const {
    const double tol = 1e-12 * std::max(1.0, length_);
    if (!(x >= -tol && x <= length_ + tol))
      throw Error(Errc::out_of_domain, "x=" + std::to_string(x) + " outside [0, " + std::to_string(length_) + "]");
    return eval_unchecked(std::clamp(x, 0.0, length_));
  }

  double eval_unchecked(double x) const {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::constant: return coeffs_[0];
      case Kind::polynomial: {
        double acc = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
        return acc;
      }
      case Kind::sampled: {
        auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
        if (it == grid_.begin()) return values_.front();
        if (it == grid_.end()) return values_.back();
        const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
        const double t = (x - grid_[i]) / (grid_[i + 1] - grid_[i]);
        return values_[i] + t * (values_[i + 1] - values_[i]);
      }
    }
    return 0.0;
  }

  /// K = (1/2) * integral of q over [0, a]. Exact for closed forms and
  /// polynomials, trapezoid rule (exact for the interpolant) for samples.
  double half_integral() const {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::constant: return 0.5 * coeffs_[0] * length_;
      case Kind::polynomial: {
        double acc = 0.0;
        for (std::size_t k = coeffs_.size(); k-- > 0;) acc = acc * length_ + coeffs_[k] / double(k + 1);
        return 0.5 * acc * length_;
      }
      case Kind::sampled: {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < grid_.size(); ++i)
          acc += (grid_[i + 1] - grid_[i]) * (values_[i] + values_[i + 1]);
        return 0.25 * acc;
      }
    }
    return 0.0;
  }

  /// Upper bound on sup |q| over [0, a].
  double sup_abs() const {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::constant: return std::abs(coeffs_[0]);
      case Kind::polynomial: {
        double acc = 0.0, pw = 1.0;
        for (double c : coeffs_) {
          acc += std::abs(c) * pw;
          pw *= length_;
        }
        return acc;
      }
      case Kind::sampled: {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
      }
    }
    return 0.0;
  }

  /// Potential x -> q(a - x), i.e. the same edge seen from the other end.
  EdgePotential reversed() const {
    switch (kind_) {
      case Kind::zero:
      case Kind::constant: return *this;
      case Kind::polynomial: {
        // sum_k c_k (a - x)^k expanded in powers of x.
        const std::size_t n = coeffs_.size();
        std::vector<double> out(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
          double binom = 1.0;
          for (std::size_t j = 0; j <= k; ++j) {
            out[j] += coeffs_[k] * binom * std::pow(length_, double(k - j)) * ((j % 2) ? -1.0 : 1.0);
            binom = binom * double(k - j) / double(j + 1);
          }
        }
        return polynomial(std::move(out), length_);
      }
      case Kind::sampled: {
        std::vector<double> g(grid_.size()), v(values_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) {
          g[i] = length_ - grid_[grid_.size() - 1 - i];
          v[i] = values_[values_.size() - 1 - i];
        }
        return sampled(std::move(g), std::move(v), length_);
      }
    }
    return *this;
  }

  /// q + c
  EdgePotential shifted(double c) const {
    switch (kind_) {
      case Kind::zero: return constant(c, length_);
      case Kind::constant: return constant(coeffs_[0] + c, length_);
      case Kind::polynomial: {
        auto k = coeffs_;
        k[0] += c;
        return polynomial(std::move(k), length_);
      }
      case Kind::sampled: {
        auto v = values_;
        for (double& x : v) x += c;
        return sampled(grid_, std::move(v), length_);
      }
    }
    return *this;
  }

  /// s * q
  EdgePotential scaled(double s) const {
    EdgePotential p = *this;
    for (double& c : p.coeffs_) c *= s;
    for (double& v : p.values_) v *= s;
    return p;
  }

 private:
  EdgePotential(Kind kind, double length) : kind_(kind), length_(length) {
    if (!(length > 0.0) || !std::isfinite(length)) throw Error(Errc::nonpositive_length, "potential domain");
  }

  Kind kind_ = Kind::zero;
  double length_ = 1.0;
  std::vector<double> coeffs_;
  std::vector<double> grid_;
  std::vector<double> values_;
};

inline double eval_q(const EdgePotential& p, double x) { return p(x); }
inline double half_integral(const EdgePotential& p) { return p.half_integral(); }
inline EdgePotential reverse(const EdgePotential& p) { return p.reversed(); }

/// One potential per edge, keyed by edge id.
class PotentialVector {
 public:
  PotentialVector() = default;

  static PotentialVector zero(const MetricTree& tree) {
    PotentialVector q;
    for (const Edge& e : tree.edges()) q.set(e.id, EdgePotential::zero(e.length));
    return q;
  }

  static PotentialVector constant(const MetricTree& tree, double c) {
    PotentialVector q;
    for (const Edge& e : tree.edges()) q.set(e.id, EdgePotential::constant(c, e.length));
    return q;
  }

  void set(EdgeId id, EdgePotential p) { entries_.insert_or_assign(id, std::move(p)); }

  const EdgePotential& at(EdgeId id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw Error(Errc::unknown_edge, "no potential for edge " + std::to_string(id));
    return it->second;
  }

  bool contains(EdgeId id) const { return entries_.count(id) != 0; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<EdgeId, EdgePotential>& entries() const noexcept { return entries_; }

  /// Throws unless there is exactly one entry per tree edge with a matching domain.
  void validate(const MetricTree& tree) const {
    if (entries_.size() != tree.edge_count())
      throw Error(Errc::invalid_potential, "potential count does not match edge count");
    for (const Edge& e : tree.edges()) {
      const EdgePotential& p = at(e.id);
      if (std::abs(p.length() - e.length) > 1e-12 * std::max(1.0, e.length))
        throw Error(Errc::invalid_potential, "domain length mismatch on edge " + std::to_string(e.id));
    }
  }

  bool all_zero() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const auto& kv) { return kv.second.kind() == EdgePotential::Kind::zero; });
  }

  double sup_abs() const {
    double m = 0.0;
    for (const auto& [id, p] : entries_) m = std::max(m, p.sup_abs());
    return m;
  }

  PotentialVector shifted(double c) const {
    PotentialVector q;
    for (const auto& [id, p] : entries_) q.set(id, p.shifted(c));
    return q;
  }

  PotentialVector scaled(double s) const {
    PotentialVector q;
    for (const auto& [id, p] : entries_) q.set(id, p.scaled(s));
    return q;
  }

 private:
  std::map<EdgeId, EdgePotential> entries_;
};

inline double sum_K(const PotentialVector& q) {
  double s = 0.0;
  for (const auto& [id, p] : q.entries()) s += p.half_integral();
  return s;
}

/// Re-expresses potentials given for `from` in the orientation of `to`
/// (same edge set), reversing the edges whose direction flipped.
inline PotentialVector reorient(const MetricTree& from, const MetricTree& to, const PotentialVector& q) {
  PotentialVector out;
  for (const Edge& e : to.edges()) {
    const Edge& old = from.edge(e.id);
    out.set(e.id, old.child == e.child ? q.at(e.id) : q.at(e.id).reversed());
  }
  return out;
}

}  // namespace qgtree
