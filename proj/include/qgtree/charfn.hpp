#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qgtree/error.hpp"
#include "qgtree/potential.hpp"
#include "qgtree/transfer.hpp"
#include "qgtree/tree.hpp"

namespace qgtree {

/// Characteristic functions at one spectral parameter: phiN for the
/// all-Neumann problem, phiD for Dirichlet at one pendant vertex. The
/// represented values are phiN * 2^exponent and phiD * 2^exponent.
struct CharPair {
  double phiN = 0.0;
  double phiD = 0.0;
  double lambda = 0.0;
  int exponent = 0;

  double neumann() const { return std::ldexp(phiN, exponent); }
  double dirichlet() const { return std::ldexp(phiD, exponent); }
};

/// Precompiled leaf-peeling recursion for one tree and one Dirichlet vertex.
///
/// Each node stands for a subtree with a distinguished pendant vertex and
/// yields the pair (N, D) by peeling the edge at that vertex:
///   N = c * N(remainder) - c' * prod D(split subtrees)
///   D = -s * N(remainder) + s' * prod D(split subtrees)
/// where (c, c', s, s') are the edge's endpoint values read from the pendant
/// end (reversed when the pendant vertex is the parent end). A single edge
/// yields (-c', s').
class PeelPlan {
 public:
  struct Node {
    std::size_t edge_index = 0;  // position in tree.edges()
    bool leaf_is_child = true;
    int remainder = -1;
    std::vector<int> subtrees;
  };

  PeelPlan() = default;

  static PeelPlan build(const MetricTree& tree, std::optional<VertexId> dirichlet_leaf = std::nullopt) {
    PeelPlan plan;
    plan.edge_count_ = tree.edge_count();
    for (std::size_t i = 0; i < tree.edges().size(); ++i) plan.index_of_[tree.edges()[i].id] = i;
    VertexId leaf;
    if (dirichlet_leaf) {
      if (!tree.has_vertex(*dirichlet_leaf) || !tree.is_pendant(*dirichlet_leaf))
        throw Error(Errc::not_pendant, "Dirichlet vertex " + std::to_string(*dirichlet_leaf));
      leaf = *dirichlet_leaf;
    } else {
      leaf = tree.leaf_of(next_peel_edge(tree));
    }
    plan.dirichlet_vertex_ = leaf;
    std::map<std::pair<std::vector<EdgeId>, VertexId>, int> memo;
    plan.root_ = plan.add(tree, leaf, memo);
    return plan;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  int root() const noexcept { return root_; }
  std::size_t edge_count() const noexcept { return edge_count_; }
  VertexId dirichlet_vertex() const noexcept { return dirichlet_vertex_; }

  /// Evaluates the recursion for per-edge values listed in tree.edges() order.
  CharPair evaluate(std::span<const TransferValues> values, double lambda) const {
    // Deep trees overflow doubles; carry a power-of-two exponent per node.
    const bool carry = edge_count_ > 16;
    std::vector<Value> out(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& node = nodes_[i];
      TransferValues t = values[node.edge_index];
      if (!node.leaf_is_child) t = t.reversed();
      Value v;
      if (node.remainder < 0) {
        v = {-t.Cp, t.Sp, 0};
      } else {
        const Value& rem = out[static_cast<std::size_t>(node.remainder)];
        double prod = 1.0;
        int pexp = 0;
        for (int s : node.subtrees) {
          prod *= out[static_cast<std::size_t>(s)].d;
          pexp += out[static_cast<std::size_t>(s)].e;
          if (carry) normalize(prod, pexp);
        }
        const int e = std::max(rem.e, pexp);
        const double n_rem = std::ldexp(rem.n, rem.e - e);
        const double p = std::ldexp(prod, pexp - e);
        v = {t.C * n_rem - t.Cp * p, -t.S * n_rem + t.Sp * p, e};
      }
      if (carry) normalize(v);
      out[i] = v;
    }
    const Value& r = out[static_cast<std::size_t>(root_)];
    return {r.n, r.d, lambda, r.e};
  }

 private:
  struct Value {
    double n = 0.0, d = 0.0;
    int e = 0;
  };

  static void normalize(double& x, int& e) {
    if (x == 0.0 || !std::isfinite(x)) return;
    int k;
    x = std::frexp(x, &k);
    e += k;
  }

  static void normalize(Value& v) {
    const double m = std::max(std::abs(v.n), std::abs(v.d));
    if (m == 0.0 || !std::isfinite(m)) return;
    int k;
    std::frexp(m, &k);
    v.n = std::ldexp(v.n, -k);
    v.d = std::ldexp(v.d, -k);
    v.e += k;
  }

  int add(const MetricTree& tree, VertexId leaf,
          std::map<std::pair<std::vector<EdgeId>, VertexId>, int>& memo) {
    std::vector<EdgeId> key;
    for (const Edge& e : tree.edges()) key.push_back(e.id);
    auto found = memo.find({key, leaf});
    if (found != memo.end()) return found->second;

    const EdgeId eid = tree.incident(leaf).front();
    Node node;
    node.edge_index = index_of_.at(eid);
    node.leaf_is_child = tree.edge(eid).child == leaf;
    if (tree.edge_count() > 1) {
      PeelStep step = peel(tree, eid);
      const MetricTree& rem = step.neumann_remainder;
      node.remainder = add(rem, rem.leaf_of(next_peel_edge(rem)), memo);
      for (const auto& [sub, mark] : step.dirichlet_subtrees) node.subtrees.push_back(add(sub, mark.vertex, memo));
    }
    nodes_.push_back(std::move(node));
    const int id = static_cast<int>(nodes_.size()) - 1;
    memo.emplace(std::make_pair(std::move(key), leaf), id);
    return id;
  }

  std::vector<Node> nodes_;
  int root_ = -1;
  std::size_t edge_count_ = 0;
  VertexId dirichlet_vertex_ = 0;
  std::map<EdgeId, std::size_t> index_of_;
};

/// phi_N / phi_D of a tree with potentials, evaluated through a PeelPlan.
class CharFunction {
 public:
  CharFunction(MetricTree tree, PotentialVector q, std::optional<VertexId> dirichlet_leaf = std::nullopt,
               TransferOptions opts = {})
      : tree_(std::move(tree)), q_(std::move(q)), opts_(opts) {
    q_.validate(tree_);
    plan_ = PeelPlan::build(tree_, dirichlet_leaf);
  }

  CharPair operator()(double lambda) const {
    std::vector<TransferValues> values;
    values.reserve(tree_.edge_count());
    for (const Edge& e : tree_.edges()) values.push_back(transfer_at(q_.at(e.id), e.length, lambda, opts_));
    return plan_.evaluate(values, lambda);
  }

  const MetricTree& tree() const noexcept { return tree_; }
  const PotentialVector& potentials() const noexcept { return q_; }
  const PeelPlan& plan() const noexcept { return plan_; }

 private:
  MetricTree tree_;
  PotentialVector q_;
  TransferOptions opts_;
  PeelPlan plan_;
};

/// phi_N / phi_D at one lambda. Without `dirichlet_leaf`, phiD uses the leaf
/// of the first peeled edge.
inline CharPair char_pair(const MetricTree& tree, const PotentialVector& q, double lambda,
                          std::optional<VertexId> dirichlet_leaf = std::nullopt) {
  return CharFunction(tree, q, dirichlet_leaf)(lambda);
}

/// Zero-potential pair (psi_N, psi_D) via the trigonometric recursion.
/// For lambda > 0, psi_N = phi_N / rho and psi_D = phi_D with rho = sqrt(lambda);
/// for lambda < 0 the same holds with rho replaced by sqrt(-lambda) (hyperbolic branch).
class PsiFunction {
 public:
  explicit PsiFunction(MetricTree tree, std::optional<VertexId> dirichlet_leaf = std::nullopt)
      : tree_(std::move(tree)), plan_(PeelPlan::build(tree_, dirichlet_leaf)) {}

  CharPair at_rho(double rho) const {
    std::vector<TransferValues> values;
    values.reserve(tree_.edge_count());
    for (const Edge& e : tree_.edges()) {
      const double c = std::cos(rho * e.length), s = std::sin(rho * e.length);
      values.push_back({c, -s, s, c, rho * rho});
    }
    return plan_.evaluate(values, rho * rho);
  }

  CharPair operator()(double lambda) const {
    if (lambda >= 0.0) {
      CharPair p = at_rho(std::sqrt(lambda));
      p.lambda = lambda;
      return p;
    }
    const double k = std::sqrt(-lambda);
    std::vector<TransferValues> values;
    values.reserve(tree_.edge_count());
    for (const Edge& e : tree_.edges()) {
      const double c = std::cosh(k * e.length), s = std::sinh(k * e.length);
      values.push_back({c, s, s, c, lambda});
    }
    return plan_.evaluate(values, lambda);
  }

  /// d psi_N / d rho by central differences.
  double dneumann_drho(double rho, double h = 1e-6) const {
    return (at_rho(rho + h).neumann() - at_rho(rho - h).neumann()) / (2.0 * h);
  }

  const MetricTree& tree() const noexcept { return tree_; }

 private:
  MetricTree tree_;
  PeelPlan plan_;
};

inline CharPair psi_pair(const MetricTree& tree, double lambda,
                         std::optional<VertexId> dirichlet_leaf = std::nullopt) {
  return PsiFunction(tree, dirichlet_leaf)(lambda);
}

/// Coefficient matrix of the vertex conditions for y_i = A_i C_i + B_i S_i.
/// Rows: one per pendant vertex (Neumann, or Dirichlet at the marked vertex),
/// then deg-1 continuity rows and one Kirchhoff row per internal vertex.
struct AssembledMatrix {
  std::size_t size = 0;
  std::vector<double> data;  // row-major

  double& operator()(std::size_t r, std::size_t c) { return data[r * size + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * size + c]; }
};

inline AssembledMatrix assemble(const MetricTree& tree, std::span<const TransferValues> values, double lambda,
                                std::optional<VertexId> dirichlet_leaf = std::nullopt) {
  const std::size_t n = 2 * tree.edge_count();
  AssembledMatrix m{n, std::vector<double>(n * n, 0.0)};
  // Column scaling of the S-coefficients balances C' ~ rho against S ~ 1/rho.
  const double scale = std::max(1.0, std::sqrt(std::abs(lambda)));
  std::map<EdgeId, std::size_t> col;
  for (std::size_t i = 0; i < tree.edges().size(); ++i) col[tree.edges()[i].id] = 2 * i;

  struct EndValues {
    double y_c, y_s, dy_c, dy_s;  // value and outward derivative rows
  };
  auto end_values = [&](EdgeId id, VertexId v) {
    const Edge& e = tree.edge(id);
    const TransferValues& t = values[col[id] / 2];
    if (e.child == v) return EndValues{1.0, 0.0, 0.0, 1.0};
    return EndValues{t.C, t.S, -t.Cp, -t.Sp};
  };

  std::size_t row = 0;
  for (VertexId v : tree.vertices()) {
    const auto& inc = tree.incident(v);
    if (inc.size() == 1) {
      const EdgeId id = inc.front();
      const EndValues ev = end_values(id, v);
      const bool dirichlet = dirichlet_leaf && *dirichlet_leaf == v;
      m(row, col[id]) = dirichlet ? ev.y_c : ev.dy_c;
      m(row, col[id] + 1) = (dirichlet ? ev.y_s : ev.dy_s) * scale;
      ++row;
      continue;
    }
    const EndValues first = end_values(inc.front(), v);
    for (std::size_t j = 1; j < inc.size(); ++j) {
      const EndValues ev = end_values(inc[j], v);
      m(row, col[inc.front()]) = first.y_c;
      m(row, col[inc.front()] + 1) = first.y_s * scale;
      m(row, col[inc[j]]) = -ev.y_c;
      m(row, col[inc[j]] + 1) = -ev.y_s * scale;
      ++row;
    }
    for (EdgeId id : inc) {
      const EndValues ev = end_values(id, v);
      m(row, col[id]) = ev.dy_c;
      m(row, col[id] + 1) = ev.dy_s * scale;
    }
    ++row;
  }
  if (row != n) throw Error(Errc::invalid_argument, "malformed tree: assembled " + std::to_string(row) + " rows");
  return m;
}

/// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(AssembledMatrix m) {
  const std::size_t n = m.size;
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(m(r, k)) > std::abs(m(p, k))) p = r;
    if (m(p, k) == 0.0) return 0.0;
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m(k, c), m(p, c));
      det = -det;
    }
    det *= m(k, k);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = m(r, k) / m(k, k);
      if (f == 0.0) continue;
      for (std::size_t c = k; c < n; ++c) m(r, c) -= f * m(k, c);
    }
  }
  return det;
}

/// Independent route to the characteristic function: determinant of the
/// full vertex-condition system.
class DetFunction {
 public:
  DetFunction(MetricTree tree, PotentialVector q, std::optional<VertexId> dirichlet_leaf = std::nullopt,
              TransferOptions opts = {})
      : tree_(std::move(tree)), q_(std::move(q)), leaf_(dirichlet_leaf), opts_(opts) {
    q_.validate(tree_);
    if (leaf_ && (!tree_.has_vertex(*leaf_) || !tree_.is_pendant(*leaf_)))
      throw Error(Errc::not_pendant, "Dirichlet vertex " + std::to_string(*leaf_));
  }

  double operator()(double lambda) const {
    std::vector<TransferValues> values;
    values.reserve(tree_.edge_count());
    for (const Edge& e : tree_.edges()) values.push_back(transfer_at(q_.at(e.id), e.length, lambda, opts_));
    return determinant(assemble(tree_, values, lambda, leaf_));
  }

 private:
  MetricTree tree_;
  PotentialVector q_;
  std::optional<VertexId> leaf_;
  TransferOptions opts_;
};

inline double det_char(const MetricTree& tree, const PotentialVector& q, double lambda,
                       std::optional<VertexId> dirichlet_leaf = std::nullopt) {
  return DetFunction(tree, q, dirichlet_leaf)(lambda);
}

/// (rho psi_N(rho) - phi_N(rho)) / psi_D(rho); tends to sum K_i along zeros of psi_N.
inline double sumK_estimate(const CharFunction& phi, const PsiFunction& psi, double rho_n) {
  if (!(rho_n > 0.0)) throw Error(Errc::out_of_domain, "rho_n must be positive");
  const CharPair z = psi.at_rho(rho_n);
  const double psiD = z.dirichlet();
  if (std::abs(psiD) < 0.1)
    throw Error(Errc::estimator_unreliable, "|psi_D(rho_n)| = " + std::to_string(std::abs(psiD)));
  const CharPair p = phi(rho_n * rho_n);
  return (rho_n * z.neumann() - p.neumann()) / psiD;
}

inline double sumK_estimate(const MetricTree& tree, const PotentialVector& q, double rho_n) {
  return sumK_estimate(CharFunction(tree, q), PsiFunction(tree), rho_n);
}

}  // namespace qgtree
