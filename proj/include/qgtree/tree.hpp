#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qgtree/error.hpp"

namespace qgtree {

using VertexId = int;
using EdgeId = int;

/// An edge of a metric tree. The child endpoint carries local coordinate 0
/// and lies farther from the root; the parent endpoint carries coordinate
/// `length`.
struct Edge {
  EdgeId id = 0;
  VertexId child = 0;
  VertexId parent = 0;
  double length = 0.0;
  // Extended-precision copy of the length, kept for the Diophantine module.
  long double precise_length = 0.0L;
};

enum class BoundaryKind { neumann, dirichlet };

struct BoundaryMark {
  VertexId vertex = 0;
  BoundaryKind kind = BoundaryKind::dirichlet;
};

struct TreeOptions {
  // Subtrees produced by peeling may have a pendant root.
  bool allow_pendant_root = false;
  // A lone edge has no internal vertex; accepted as the degenerate base case.
  bool allow_single_edge = true;
};

/// Rooted metric tree. Immutable after construction; edges are stored
/// sorted by id and oriented so that `child` is farther from the root.
class MetricTree {
 public:
  MetricTree() = default;

  static MetricTree build(std::vector<Edge> edges, VertexId root, TreeOptions opts = {}) {
    MetricTree t;
    t.init(std::move(edges), root, opts);
    return t;
  }

  static MetricTree single_edge(double length, EdgeId id = 0) {
    return build({Edge{id, 1, 0, length, static_cast<long double>(length)}}, 0);
  }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<VertexId>& vertices() const noexcept { return vertices_; }
  VertexId root() const noexcept { return root_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t vertex_count() const noexcept { return vertices_.size(); }

  /// True when the root is not an internal vertex (single edges, peeled subtrees).
  bool degenerate_root() const { return degree(root_) < 2; }

  bool has_vertex(VertexId v) const { return info_.count(v) != 0; }
  bool has_edge(EdgeId e) const { return edge_index(e).has_value(); }

  const Edge& edge(EdgeId id) const {
    auto idx = edge_index(id);
    if (!idx) throw Error(Errc::unknown_edge, std::to_string(id));
    return edges_[*idx];
  }

  const std::vector<EdgeId>& incident(VertexId v) const { return vertex_info(v).incident; }
  int degree(VertexId v) const { return static_cast<int>(vertex_info(v).incident.size()); }
  bool is_pendant(VertexId v) const { return degree(v) == 1; }

  /// Number of edges between `v` and the root.
  int depth(VertexId v) const { return vertex_info(v).depth; }

  bool is_boundary_edge(EdgeId id) const {
    const Edge& e = edge(id);
    return is_pendant(e.child) || is_pendant(e.parent);
  }

  /// Pendant endpoint of a boundary edge; the child end when both are pendant.
  VertexId leaf_of(EdgeId id) const {
    const Edge& e = edge(id);
    if (is_pendant(e.child)) return e.child;
    if (is_pendant(e.parent)) return e.parent;
    throw Error(Errc::not_boundary_edge, "edge " + std::to_string(id));
  }

  VertexId other_end(EdgeId id, VertexId v) const {
    const Edge& e = edge(id);
    return e.child == v ? e.parent : e.child;
  }

  std::vector<VertexId> pendant_vertices() const {
    std::vector<VertexId> out;
    for (VertexId v : vertices_)
      if (is_pendant(v)) out.push_back(v);
    return out;
  }

  double total_length() const {
    return std::accumulate(edges_.begin(), edges_.end(), 0.0,
                           [](double s, const Edge& e) { return s + e.length; });
  }

  long double precise_total_length() const {
    long double s = 0.0L;
    for (const Edge& e : edges_) s += e.precise_length;
    return s;
  }

  /// Same edges re-oriented towards a new root. Orientation flips where the
  /// new root lies on the child side of an edge.
  MetricTree rerooted(VertexId new_root, TreeOptions opts = {}) const {
    return build(edges_, new_root, opts);
  }

 private:
  struct VertexInfo {
    std::vector<EdgeId> incident;
    int depth = 0;
  };

  std::optional<std::size_t> edge_index(EdgeId id) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), id,
                               [](const Edge& e, EdgeId x) { return e.id < x; });
    if (it == edges_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - edges_.begin());
  }

  const VertexInfo& vertex_info(VertexId v) const {
    auto it = info_.find(v);
    if (it == info_.end()) throw Error(Errc::unknown_vertex, std::to_string(v));
    return it->second;
  }

  void init(std::vector<Edge> edges, VertexId root, TreeOptions opts) {
    if (edges.empty()) throw Error(Errc::invalid_argument, "tree has no edges");
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (edges[i].id == edges[i - 1].id)
        throw Error(Errc::duplicate_edge, std::to_string(edges[i].id));

    std::set<VertexId> vset;
    for (const Edge& e : edges) {
      if (!(e.length > 0.0) || !std::isfinite(e.length))
        throw Error(Errc::nonpositive_length, "edge " + std::to_string(e.id));
      if (e.child == e.parent) throw Error(Errc::cycle, "self-loop at edge " + std::to_string(e.id));
      vset.insert(e.child);
      vset.insert(e.parent);
    }

    // Union-find: a repeated merge means a cycle.
    std::map<VertexId, VertexId> parent_of;
    for (VertexId v : vset) parent_of[v] = v;
    auto find = [&](VertexId v) {
      while (parent_of[v] != v) {
        parent_of[v] = parent_of[parent_of[v]];
        v = parent_of[v];
      }
      return v;
    };
    for (const Edge& e : edges) {
      VertexId a = find(e.child), b = find(e.parent);
      if (a == b) throw Error(Errc::cycle, "at edge " + std::to_string(e.id));
      parent_of[a] = b;
    }
    if (vset.size() != edges.size() + 1) throw Error(Errc::disconnected, "");
    if (!vset.count(root)) throw Error(Errc::unknown_vertex, "root " + std::to_string(root));

    std::map<VertexId, VertexInfo> info;
    for (VertexId v : vset) info[v];
    for (const Edge& e : edges) {
      info[e.child].incident.push_back(e.id);
      info[e.parent].incident.push_back(e.id);
    }
    const auto root_degree = info[root].incident.size();
    if (edges.size() == 1) {
      if (!opts.allow_single_edge) throw Error(Errc::root_pendant, "single edge has no internal vertex");
    } else if (root_degree < 2 && !opts.allow_pendant_root) {
      throw Error(Errc::root_pendant, "vertex " + std::to_string(root));
    }

    // Breadth-first orientation from the root.
    auto by_id = [&](EdgeId id) -> Edge& {
      return *std::lower_bound(edges.begin(), edges.end(), id,
                               [](const Edge& e, EdgeId x) { return e.id < x; });
    };
    std::deque<VertexId> queue{root};
    std::set<VertexId> seen{root};
    info[root].depth = 0;
    while (!queue.empty()) {
      VertexId v = queue.front();
      queue.pop_front();
      for (EdgeId id : info[v].incident) {
        Edge& e = by_id(id);
        VertexId w = e.child == v ? e.parent : e.child;
        if (seen.count(w)) continue;
        if (e.child == v) std::swap(e.child, e.parent);
        seen.insert(w);
        info[w].depth = info[v].depth + 1;
        queue.push_back(w);
      }
    }
    for (auto& [v, vi] : info) std::sort(vi.incident.begin(), vi.incident.end());

    edges_ = std::move(edges);
    vertices_.assign(vset.begin(), vset.end());
    root_ = root;
    info_ = std::move(info);
  }

  std::vector<Edge> edges_;
  std::vector<VertexId> vertices_;
  VertexId root_ = 0;
  std::map<VertexId, VertexInfo> info_;
};

inline double total_length(const MetricTree& tree) { return tree.total_length(); }

/// Result of removing one boundary edge (leaf peeling).
struct PeelStep {
  EdgeId removed_edge = 0;
  VertexId leaf_vertex = 0;
  VertexId attachment_vertex = 0;
  MetricTree neumann_remainder;
  std::vector<std::pair<MetricTree, BoundaryMark>> dirichlet_subtrees;
};

namespace detail {

inline MetricTree subtree_of(const MetricTree& tree, const std::vector<EdgeId>& ids) {
  std::vector<Edge> sub;
  sub.reserve(ids.size());
  for (EdgeId id : ids) sub.push_back(tree.edge(id));
  // The vertex closest to the current root keeps every orientation intact.
  VertexId root = sub.front().parent;
  for (const Edge& e : sub)
    for (VertexId v : {e.child, e.parent})
      if (tree.depth(v) < tree.depth(root)) root = v;
  return MetricTree::build(std::move(sub), root, TreeOptions{true, true});
}

}  // namespace detail

/// Removes the boundary edge `leaf_edge`. The remainder keeps Kirchhoff
/// conditions at the attachment vertex (Neumann when it becomes pendant); the
/// Dirichlet subtrees are the remainder split at the attachment vertex.
inline PeelStep peel(const MetricTree& tree, EdgeId leaf_edge) {
  if (tree.edge_count() < 2) throw Error(Errc::single_edge, "cannot peel a single-edge tree");
  if (!tree.is_boundary_edge(leaf_edge))
    throw Error(Errc::not_boundary_edge, "edge " + std::to_string(leaf_edge));

  PeelStep step;
  step.removed_edge = leaf_edge;
  step.leaf_vertex = tree.leaf_of(leaf_edge);
  step.attachment_vertex = tree.other_end(leaf_edge, step.leaf_vertex);

  std::vector<EdgeId> rest;
  for (const Edge& e : tree.edges())
    if (e.id != leaf_edge) rest.push_back(e.id);
  step.neumann_remainder = detail::subtree_of(tree, rest);

  const MetricTree& rem = step.neumann_remainder;
  const VertexId v = step.attachment_vertex;
  for (EdgeId start : rem.incident(v)) {
    std::vector<EdgeId> component{start};
    std::set<EdgeId> seen{start};
    std::deque<VertexId> queue{rem.other_end(start, v)};
    while (!queue.empty()) {
      VertexId w = queue.front();
      queue.pop_front();
      for (EdgeId id : rem.incident(w)) {
        if (seen.count(id)) continue;
        seen.insert(id);
        component.push_back(id);
        queue.push_back(rem.other_end(id, w));
      }
    }
    std::sort(component.begin(), component.end());
    step.dirichlet_subtrees.emplace_back(detail::subtree_of(rem, component),
                                         BoundaryMark{v, BoundaryKind::dirichlet});
  }
  return step;
}

/// Boundary edge peeled first: the one whose leaf is deepest, ties to the smallest id.
inline EdgeId next_peel_edge(const MetricTree& tree) {
  EdgeId best = -1;
  int best_depth = -1;
  for (const Edge& e : tree.edges()) {
    if (!tree.is_boundary_edge(e.id)) continue;
    int d = tree.depth(tree.leaf_of(e.id));
    if (d > best_depth) {
      best_depth = d;
      best = e.id;
    }
  }
  return best;
}

/// Deterministic peel sequence reducing the tree to a single edge (I-1 entries).
inline std::vector<EdgeId> peel_order(const MetricTree& tree) {
  std::vector<EdgeId> order;
  MetricTree current = tree;
  while (current.edge_count() > 1) {
    EdgeId e = next_peel_edge(current);
    order.push_back(e);
    current = peel(current, e).neumann_remainder;
  }
  return order;
}

}  // namespace qgtree
