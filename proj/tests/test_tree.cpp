#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "qgtree/tree.hpp"

using namespace qgtree;

namespace {

Edge E(int id, int child, int parent, double a) { return Edge{id, child, parent, a, a}; }

MetricTree star3() { return MetricTree::build({E(1, 1, 0, 1), E(2, 2, 0, 1), E(3, 3, 0, 1)}, 0); }

// Random tree on n+1 vertices; vertex k>0 attaches to a random earlier vertex.
MetricTree random_tree(int n, std::mt19937& rng) {
  std::vector<Edge> edges;
  std::uniform_real_distribution<double> len(0.3, 2.0);
  for (int v = 1; v <= n; ++v) {
    const int p = std::uniform_int_distribution<int>(0, v - 1)(rng);
    edges.push_back(E(v - 1, v, p, len(rng)));
  }
  std::vector<int> deg(n + 1, 0);
  for (const auto& e : edges) ++deg[e.child], ++deg[e.parent];
  int root = 0;
  while (deg[root] < 2) ++root;
  return MetricTree::build(edges, root);
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::invalid_argument;
}

}  // namespace

TEST(Tree, StarOrientation) {
  const MetricTree t = star3();
  EXPECT_EQ(t.edge_count(), 3u);
  EXPECT_EQ(t.vertex_count(), 4u);
  for (const Edge& e : t.edges()) {
    EXPECT_EQ(e.parent, 0);
    EXPECT_TRUE(t.is_pendant(e.child));
  }
  EXPECT_DOUBLE_EQ(total_length(t), 3.0);
}

TEST(Tree, PathOrientationFollowsRoot) {
  // v0 - v2 - v1 with a_2 = 2 (v0-v2), a_1 = 1 (v2-v1), rooted at v2.
  const MetricTree t = MetricTree::build({E(1, 2, 1, 1), E(2, 0, 2, 2)}, 2);
  EXPECT_EQ(t.edge(1).child, 1);
  EXPECT_EQ(t.edge(1).parent, 2);
  EXPECT_EQ(t.edge(2).child, 0);
  EXPECT_EQ(t.edge(2).parent, 2);
}

TEST(Tree, DeepPathOrientation) {
  const MetricTree t = MetricTree::build({E(0, 0, 1, 1), E(1, 1, 2, 2), E(2, 2, 3, 1)}, 1);
  EXPECT_EQ(t.edge(1).child, 2);
  EXPECT_EQ(t.edge(2).child, 3);
  EXPECT_EQ(t.edge(2).parent, 2);
  EXPECT_EQ(t.depth(3), 2);
}

TEST(Tree, TotalLength) {
  EXPECT_DOUBLE_EQ(total_length(MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, 2), E(2, 3, 0, 3)}, 0)), 6.0);
  EXPECT_NEAR(total_length(MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, std::sqrt(2.0))}, 0)), 2.41421356, 1e-8);
}

TEST(Tree, Errors) {
  EXPECT_EQ(code_of([] { MetricTree::build({E(0, 1, 0, 1), E(1, 2, 1, 1), E(2, 0, 2, 1)}, 0); }), Errc::cycle);
  EXPECT_EQ(code_of([] { MetricTree::build({E(0, 1, 0, 1), E(1, 3, 2, 1)}, 0); }), Errc::disconnected);
  EXPECT_EQ(code_of([] { MetricTree::build({E(0, 1, 0, 0.0), E(1, 2, 0, 1)}, 0); }), Errc::nonpositive_length);
  EXPECT_EQ(code_of([] { MetricTree::build({E(0, 1, 0, -1.0), E(1, 2, 0, 1)}, 0); }), Errc::nonpositive_length);
  EXPECT_EQ(code_of([] { MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, 1)}, 1); }), Errc::root_pendant);
  EXPECT_EQ(code_of([] { MetricTree::build({E(0, 1, 0, 1), E(0, 2, 0, 1)}, 0); }), Errc::duplicate_edge);
  EXPECT_EQ(code_of([] { MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, 1)}, 7); }), Errc::unknown_vertex);
  EXPECT_EQ(code_of([] { MetricTree::build({E(0, 1, 1, 1)}, 1); }), Errc::cycle);
}

TEST(Tree, SingleEdge) {
  const MetricTree t = MetricTree::single_edge(1.0);
  EXPECT_TRUE(t.degenerate_root());
  EXPECT_EQ(t.edge_count(), 1u);
  TreeOptions strict;
  strict.allow_single_edge = false;
  EXPECT_EQ(code_of([&] { MetricTree::build({E(0, 1, 0, 1)}, 0, strict); }), Errc::root_pendant);
}

TEST(Tree, PeelStar) {
  const PeelStep s = peel(star3(), 1);
  EXPECT_EQ(s.removed_edge, 1);
  EXPECT_EQ(s.leaf_vertex, 1);
  EXPECT_EQ(s.attachment_vertex, 0);
  EXPECT_EQ(s.neumann_remainder.edge_count(), 2u);
  EXPECT_EQ(s.neumann_remainder.degree(0), 2);
  ASSERT_EQ(s.dirichlet_subtrees.size(), 2u);
  for (const auto& [sub, mark] : s.dirichlet_subtrees) {
    EXPECT_EQ(sub.edge_count(), 1u);
    EXPECT_EQ(mark.vertex, 0);
    EXPECT_EQ(mark.kind, BoundaryKind::dirichlet);
  }
}

TEST(Tree, PeelPath) {
  const MetricTree t = MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, 2)}, 0);
  const PeelStep s = peel(t, 0);
  EXPECT_EQ(s.neumann_remainder.edge_count(), 1u);
  EXPECT_TRUE(s.neumann_remainder.is_pendant(0));
  ASSERT_EQ(s.dirichlet_subtrees.size(), 1u);
}

TEST(Tree, PeelErrors) {
  const MetricTree t = MetricTree::build({E(0, 1, 0, 1), E(1, 2, 1, 1), E(2, 3, 0, 1), E(3, 4, 0, 1)}, 0);
  EXPECT_EQ(code_of([&] { peel(t, 0); }), Errc::not_boundary_edge);
  EXPECT_EQ(code_of([] { peel(MetricTree::single_edge(1.0), 0); }), Errc::single_edge);
}

TEST(Tree, PeelCaterpillarComponents) {
  // Spine 0-1-2-3 with a leg on each spine vertex; 5 edges.
  const MetricTree t = MetricTree::build({E(0, 0, 1, 1), E(1, 1, 2, 1), E(2, 2, 3, 1), E(3, 4, 1, 1), E(4, 5, 2, 1)}, 1);
  const EdgeId first = next_peel_edge(t);
  const PeelStep s = peel(t, first);
  EXPECT_EQ(s.neumann_remainder.edge_count(), 4u);
  // Enumerate components of the remainder with the attachment vertex removed.
  const VertexId v = s.attachment_vertex;
  std::set<VertexId> seen{v};
  int components = 0;
  for (EdgeId start : s.neumann_remainder.incident(v)) {
    const VertexId w = s.neumann_remainder.other_end(start, v);
    if (seen.count(w)) continue;
    ++components;
    std::vector<VertexId> stack{w};
    seen.insert(w);
    while (!stack.empty()) {
      const VertexId x = stack.back();
      stack.pop_back();
      for (EdgeId id : s.neumann_remainder.incident(x)) {
        const VertexId y = s.neumann_remainder.other_end(id, x);
        if (!seen.count(y)) seen.insert(y), stack.push_back(y);
      }
    }
  }
  EXPECT_EQ(static_cast<int>(s.dirichlet_subtrees.size()), components);
  EXPECT_EQ(components, t.degree(v) - 1);
}

TEST(Tree, PeelOrderStarTieBreak) {
  EXPECT_EQ(peel_order(star3()), (std::vector<EdgeId>{1, 2}));
}

TEST(Tree, PeelOrderDeepestFirst) {
  // Path 0-1-2-3 rooted at 1: leaf 3 (depth 2) goes before leaf 0 (depth 1).
  const MetricTree t = MetricTree::build({E(0, 0, 1, 1), E(1, 2, 1, 1), E(2, 3, 2, 1)}, 1);
  EXPECT_EQ(peel_order(t).front(), 2);
}

TEST(Tree, PeelConservationRandom) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const MetricTree t = random_tree(7, rng);
    EXPECT_EQ(peel_order(t), peel_order(t));
    MetricTree cur = t;
    while (cur.edge_count() > 1) {
      const PeelStep s = peel(cur, next_peel_edge(cur));
      std::multiset<EdgeId> before, after{s.removed_edge}, sub;
      for (const Edge& e : cur.edges()) before.insert(e.id);
      for (const Edge& e : s.neumann_remainder.edges()) after.insert(e.id);
      for (const auto& [st, mark] : s.dirichlet_subtrees) {
        EXPECT_TRUE(st.is_pendant(mark.vertex));
        for (const Edge& e : st.edges()) sub.insert(e.id);
      }
      EXPECT_EQ(before, after);
      std::multiset<EdgeId> rem;
      for (const Edge& e : s.neumann_remainder.edges()) rem.insert(e.id);
      EXPECT_EQ(rem, sub);
      EXPECT_EQ(s.neumann_remainder.vertex_count(), s.neumann_remainder.edge_count() + 1);
      cur = s.neumann_remainder;
    }
  }
}

TEST(Tree, RerootKeepsLengthsAndDegrees) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const MetricTree t = random_tree(6, rng);
    for (VertexId v : t.vertices()) {
      if (t.degree(v) < 2) continue;
      const MetricTree r = t.rerooted(v);
      EXPECT_EQ(r.root(), v);
      std::multiset<double> a, b;
      for (const Edge& e : t.edges()) a.insert(e.length);
      for (const Edge& e : r.edges()) b.insert(e.length);
      EXPECT_EQ(a, b);
      for (VertexId w : t.vertices()) EXPECT_EQ(t.degree(w), r.degree(w));
    }
  }
}
