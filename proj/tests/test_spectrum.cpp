#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qgtree/spectrum.hpp"

using namespace qgtree;
using std::numbers::pi;

namespace {

Edge E(int id, int child, int parent, double a) { return Edge{id, child, parent, a, a}; }

MetricTree star3() { return MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, 1), E(2, 3, 0, 1)}, 0); }

}  // namespace

TEST(Spectrum, IntervalWindow) {
  const MetricTree t = MetricTree::single_edge(1.0);
  const Spectrum s = scan_spectrum(t, PotentialVector::zero(t), {-1.0, 100.0});
  ASSERT_EQ(s.entries.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(s.entries[k].lambda, k * k * pi * pi, 1e-10 * std::max(1.0, k * k * pi * pi));
    EXPECT_EQ(s.entries[k].multiplicity, 1);
  }
  EXPECT_TRUE(s.weyl_checked);
  EXPECT_TRUE(s.weyl_ok);
}

TEST(Spectrum, StarMultiplicities) {
  const MetricTree t = star3();
  const Spectrum s = scan_spectrum(t, PotentialVector::zero(t), {-1.0, 25.0});
  const std::vector<std::pair<double, int>> expect{{0.0, 1}, {pi * pi / 4, 2}, {pi * pi, 1}, {9 * pi * pi / 4, 2}};
  ASSERT_EQ(s.entries.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    EXPECT_NEAR(s.entries[i].lambda, expect[i].first, 1e-9);
    EXPECT_EQ(s.entries[i].multiplicity, expect[i].second);
  }
}

TEST(Spectrum, RationalPath) {
  const MetricTree t = MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, 2)}, 0);
  const Spectrum s = scan_spectrum(t, PotentialVector::zero(t), {-1.0, 60.0});
  for (int m = 0; (m * pi / 3) * (m * pi / 3) < 60.0; ++m) {
    const double target = (m * pi / 3) * (m * pi / 3);
    bool found = false;
    for (const auto& e : s.entries) found |= std::abs(e.lambda - target) <= 1e-8 * std::max(1.0, target);
    EXPECT_TRUE(found) << "m=" << m;
  }
}

TEST(Spectrum, WeylCount) {
  const WeylRange w = weyl_count(MetricTree::single_edge(1.0), 100.0);
  EXPECT_EQ(w.expected, 3);
  EXPECT_TRUE(w.contains(4));
  const MetricTree t = star3();
  const WeylRange ws = weyl_count(t, 25.0);
  EXPECT_EQ(ws.expected, 4);
  EXPECT_TRUE(ws.contains(scan_spectrum(t, PotentialVector::zero(t), {-1.0, 25.0}).count()));
}

TEST(Spectrum, HalvedStepNeverLosesRoots) {
  const MetricTree t = MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, 0.6), E(2, 3, 2, 1.3), E(3, 4, 2, 0.45)}, 0);
  PotentialVector q;
  for (const Edge& e : t.edges()) q.set(e.id, EdgePotential::polynomial({0.5, -1.0, 2.0}, e.length));
  ScanOptions o;
  o.step = default_step(t, {-4.0, 150.0});
  const long coarse = scan_spectrum(t, q, {-4.0, 150.0}, o).count();
  o.step /= 2;
  const long fine = scan_spectrum(t, q, {-4.0, 150.0}, o).count();
  EXPECT_GE(fine, coarse);
}

TEST(Spectrum, RecursionMatchesDeterminant) {
  const MetricTree t = MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, 0.6), E(2, 3, 2, 1.3), E(3, 4, 2, 0.45)}, 0);
  PotentialVector q;
  for (const Edge& e : t.edges()) q.set(e.id, EdgePotential::constant(1.5 - e.id, e.length));
  ScanOptions d;
  d.use_determinant = true;
  const auto a = scan_spectrum(t, q, {-4.0, 200.0}).entries;
  const auto b = scan_spectrum(t, q, {-4.0, 200.0}, d).entries;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].lambda, b[i].lambda, 1e-8 * std::max(1.0, std::abs(a[i].lambda)));
    EXPECT_EQ(a[i].multiplicity, b[i].multiplicity);
  }
}

TEST(Spectrum, StrictWeylThrowsOnCoarseScan) {
  const MetricTree t = MetricTree::single_edge(1.0);
  ScanOptions o;
  o.step = 150.0;  // far above the safe step; misses eigenvalues
  o.strict_weyl = true;
  EXPECT_THROW(scan_spectrum(t, PotentialVector::zero(t), {-1.0, 400.0}, o), Error);
}

TEST(Spectrum, LowestEigenvalues) {
  const MetricTree t = star3();
  const auto v = lowest_eigenvalues(t, PotentialVector::zero(t), 4);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_NEAR(v[1], pi * pi / 4, 1e-9);
  EXPECT_NEAR(v[2], pi * pi / 4, 1e-9);
  EXPECT_NEAR(v[3], pi * pi, 1e-9);
}

TEST(Spectrum, FindZerosDoubleRoot) {
  const auto f = [](double x) { return (x - 1.3) * (x - 1.3) * (x + 2.0); };
  RootOptions o;
  o.step = 0.07;
  const auto z = find_zeros(f, {-3.0, 3.0}, o);
  ASSERT_EQ(z.size(), 2u);
  EXPECT_NEAR(z[0].lambda, -2.0, 1e-12);
  EXPECT_EQ(z[0].multiplicity, 1);
  EXPECT_NEAR(z[1].lambda, 1.3, 1e-6);
  EXPECT_EQ(z[1].multiplicity, 2);
}

TEST(Spectrum, FindZerosCloseSimplePair) {
  // Two simple zeros inside one scan cell, seen as a minimum of |f|.
  const auto f = [](double x) { return (x - 0.53) * (x - 0.55); };
  RootOptions o;
  o.step = 0.1;
  const auto z = find_zeros(f, {0.0, 1.05}, o);
  ASSERT_EQ(z.size(), 2u);
  EXPECT_NEAR(z[0].lambda, 0.53, 1e-12);
  EXPECT_NEAR(z[1].lambda, 0.55, 1e-12);
}

TEST(Spectrum, FindZerosGridZeroWithNeighbour) {
  // One zero lands exactly on a grid node, the other sits in the next cell.
  const auto f = [](double x) { return (x - 0.5) * (x - 0.52); };
  RootOptions o;
  o.step = 0.1;
  const auto z = find_zeros(f, {0.0, 1.0}, o);
  ASSERT_EQ(z.size(), 2u);
  EXPECT_EQ(z[0].lambda, 0.5);
  EXPECT_NEAR(z[1].lambda, 0.52, 1e-12);
  EXPECT_EQ(z[0].multiplicity, 1);
}

TEST(Spectrum, MuSequence) {
  const MetricTree t = star3();
  const MuSequence s = mu_sequence(t, {3, 6});
  EXPECT_NEAR(s.mu_values[0], 2 * pi, 1e-15);
  EXPECT_NEAR(s.mu_values[1], 4 * pi, 1e-15);
  const MetricTree p = MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, std::sqrt(2.0))}, 0);
  EXPECT_NEAR(mu_sequence(p, {29}).mu_values[0], 58 * pi / (1 + std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(mu_sequence(p, {29}).mu_values[0], 75.4748, 1e-3);
  EXPECT_THROW(mu_sequence(t, {6, 3}), Error);
}

TEST(Spectrum, RhoNearMuRational) {
  EXPECT_NEAR(rho_near_mu(MetricTree::single_edge(1.0), 2 * 5 * pi), 10 * pi, 1e-12);
  // Star with lengths 1, 1, 1: psi_N = 3 sin cos^2 vanishes at 2 pi n.
  EXPECT_NEAR(rho_near_mu(star3(), 4 * pi), 4 * pi, 1e-12);
}

TEST(Spectrum, RhoNearMuIrrational) {
  const MetricTree t =
      MetricTree::build({E(0, 1, 0, 1), E(1, 2, 0, std::sqrt(2.0)), E(2, 3, 0, std::sqrt(3.0))}, 0);
  const PsiFunction psi(t);
  const double mu = mu_sequence(t, {79}).mu_values[0];
  const double rho = rho_near_mu(psi, mu);
  EXPECT_NEAR(psi.at_rho(rho).neumann(), 0.0, 1e-10);
  EXPECT_LT(std::abs(rho - mu), 1e-2);
}
