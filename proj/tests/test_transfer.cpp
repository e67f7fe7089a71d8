#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "qgtree/transfer.hpp"

using namespace qgtree;
using std::numbers::pi;

namespace {

// Classical RK4 on y'' = (q - lambda) y with a fixed step; an oracle
// independent of the Magnus integrator.
std::array<double, 4> rk4(const std::function<double(double)>& q, double a, double lambda, int steps) {
  auto rhs = [&](double x, const std::array<double, 4>& y) {
    const double f = q(x) - lambda;
    return std::array<double, 4>{y[1], f * y[0], y[3], f * y[2]};
  };
  std::array<double, 4> y{1.0, 0.0, 0.0, 1.0};  // (C, C', S, S')
  const double h = a / steps;
  for (int i = 0; i < steps; ++i) {
    const double x = i * h;
    auto add = [](const std::array<double, 4>& u, const std::array<double, 4>& v, double s) {
      return std::array<double, 4>{u[0] + s * v[0], u[1] + s * v[1], u[2] + s * v[2], u[3] + s * v[3]};
    };
    const auto k1 = rhs(x, y);
    const auto k2 = rhs(x + h / 2, add(y, k1, h / 2));
    const auto k3 = rhs(x + h / 2, add(y, k2, h / 2));
    const auto k4 = rhs(x + h, add(y, k3, h));
    for (int j = 0; j < 4; ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y;
}

}  // namespace

TEST(Transfer, ZeroAtPiSquared) {
  const auto t = transfer_at(EdgePotential::zero(1.0), 1.0, pi * pi);
  EXPECT_NEAR(t.C, -1.0, 1e-15);
  EXPECT_NEAR(t.Cp, 0.0, 1e-14);
  EXPECT_NEAR(t.S, 0.0, 1e-15);
  EXPECT_NEAR(t.Sp, -1.0, 1e-15);
}

TEST(Transfer, ConstantDegenerateOmega) {
  const auto t = transfer_at(EdgePotential::constant(5.0, 1.0), 1.0, 5.0);
  EXPECT_DOUBLE_EQ(t.C, 1.0);
  EXPECT_DOUBLE_EQ(t.Cp, 0.0);
  EXPECT_DOUBLE_EQ(t.S, 1.0);
  EXPECT_DOUBLE_EQ(t.Sp, 1.0);
}

TEST(Transfer, NegativeLambdaHyperbolic) {
  const auto t = transfer_at(EdgePotential::zero(2.0), 2.0, -1.0);
  EXPECT_NEAR(t.C, std::cosh(2.0), 1e-14);
  EXPECT_NEAR(t.S, std::sinh(2.0), 1e-14);
  EXPECT_NEAR(t.Cp, std::sinh(2.0), 1e-14);
}

TEST(Transfer, PolynomialAgainstRk4StepHalving) {
  const auto p = EdgePotential::polynomial({0.0, 1.0}, 1.0);
  const auto t = transfer_at(p, 1.0, 4.0);
  auto q = [](double x) { return x; };
  const auto coarse = rk4(q, 1.0, 4.0, 2000);
  const auto fine = rk4(q, 1.0, 4.0, 4000);
  const double got[4] = {t.C, t.Cp, t.S, t.Sp};
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(coarse[j], fine[j], 1e-10);  // the reference itself has converged
    EXPECT_NEAR(got[j], fine[j], 1e-8);
  }
}

TEST(Transfer, SampledAgainstRk4) {
  const auto p = EdgePotential::sampled({0.0, 0.4, 1.3}, {2.0, -1.0, 3.0}, 1.3);
  const auto t = transfer_at(p, 1.3, 7.0);
  auto q = [&](double x) { return p.eval_unchecked(x); };
  // The kink at 0.4 is a grid node of the RK4 run (1.3 / 2600 * 800 = 0.4).
  const auto ref = rk4(q, 1.3, 7.0, 2600 * 4);
  EXPECT_NEAR(t.C, ref[0], 1e-9);
  EXPECT_NEAR(t.Cp, ref[1], 1e-9);
  EXPECT_NEAR(t.S, ref[2], 1e-9);
  EXPECT_NEAR(t.Sp, ref[3], 1e-9);
}

TEST(Transfer, ConstantShiftIdentity) {
  for (double lam : {-3.0, 0.5, 17.0, 400.0}) {
    const auto a = transfer_at(EdgePotential::constant(2.5, 1.3), 1.3, lam);
    const auto b = transfer_at(EdgePotential::zero(1.3), 1.3, lam - 2.5);
    EXPECT_EQ(a.C, b.C);
    EXPECT_EQ(a.Cp, b.Cp);
    EXPECT_EQ(a.S, b.S);
    EXPECT_EQ(a.Sp, b.Sp);
  }
}

TEST(Transfer, BranchSeamContinuity) {
  for (const auto& p : {EdgePotential::zero(1.0), EdgePotential::polynomial({1.0, -2.0}, 1.0)}) {
    const auto lo = transfer_at(p, 1.0, -1e-8), hi = transfer_at(p, 1.0, 1e-8);
    EXPECT_NEAR(lo.C, hi.C, 1e-6);
    EXPECT_NEAR(lo.Cp, hi.Cp, 1e-6);
    EXPECT_NEAR(lo.S, hi.S, 1e-6);
    EXPECT_NEAR(lo.Sp, hi.Sp, 1e-6);
  }
}

TEST(Transfer, ReversedEdge) {
  // Integrating the reversed potential equals P M^{-1} P of the original.
  const auto p = EdgePotential::polynomial({0.3, 1.0, -2.0}, 1.1);
  const auto t = transfer_at(p, 1.1, 9.0);
  const auto r = transfer_at(p.reversed(), 1.1, 9.0);
  const auto tr = t.reversed();
  EXPECT_NEAR(r.C, tr.C, 1e-10);
  EXPECT_NEAR(r.Cp, tr.Cp, 1e-10);
  EXPECT_NEAR(r.S, tr.S, 1e-10);
  EXPECT_NEAR(r.Sp, tr.Sp, 1e-10);
}

TEST(Transfer, WronskianRandom) {
  // Absolute check where lambda - q >= -5 (values stay O(e^5)); elsewhere the
  // product C S' is huge and only the relative error is meaningful.
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const double a = 0.2 + 2.0 * std::abs(U(rng));
    const auto p = EdgePotential::polynomial({U(rng), U(rng), U(rng)}, a);
    const double lam = 2.0 + 300.0 * std::abs(U(rng));
    EXPECT_NEAR(transfer_at(p, a, lam).wronskian(), 1.0, 1e-10);
  }
  for (int i = 0; i < 300; ++i) {
    const double a = 0.2 + 2.0 * std::abs(U(rng));
    const auto p = EdgePotential::polynomial({5 * U(rng), 5 * U(rng), 5 * U(rng)}, a);
    const double lam = 300.0 * U(rng);
    const TransferValues t = transfer_at(p, a, lam);
    const double scale = std::abs(t.C * t.Sp) + std::abs(t.Cp * t.S);
    EXPECT_NEAR(t.wronskian(), 1.0, 1e-11 * scale);
  }
}

TEST(Transfer, BadLength) { EXPECT_THROW(transfer_at(EdgePotential::zero(1.0), 0.0, 1.0), Error); }

TEST(Asymptotics, ZeroPotentialExact) {
  for (const auto& r : asymptotic_residuals(EdgePotential::zero(1.0), 1.0, {5.0, 10.0, 20.0})) {
    EXPECT_NEAR(r.rC, 0.0, 1e-12);
    EXPECT_NEAR(r.rCp, 0.0, 1e-12);
    EXPECT_NEAR(r.rS, 0.0, 1e-10);
    EXPECT_NEAR(r.rSp, 0.0, 1e-12);
  }
}

TEST(Asymptotics, ConstantClosedForm) {
  // C = cos(omega a) with omega = sqrt(rho^2 - c); r_C computed directly.
  const double c = 3.0;
  const std::vector<double> rhos{10, 40, 160, 640};
  const auto res = asymptotic_residuals(EdgePotential::constant(c, 1.0), 1.0, rhos);
  double prev = 1e300;
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    const double rho = rhos[i], w = std::sqrt(rho * rho - c);
    const double expect = rho * std::abs(std::cos(w) - std::cos(rho) - 0.5 * c * std::sin(rho) / rho);
    EXPECT_NEAR(res[i].rC, expect, 1e-9 * rho);
    EXPECT_LT(res[i].rC, prev);
    prev = res[i].rC;
  }
  EXPECT_LT(res.back().rC, 0.05);
}

TEST(Asymptotics, LinearPotentialDecay) {
  const auto p = EdgePotential::polynomial({0.0, 1.0}, 1.0);
  // The scaled residuals oscillate with rho, so compare their envelopes:
  // the maximum over one period [rho0, rho0 + 2 pi] falls as rho0 doubles.
  double prev = 1e300;
  for (double rho0 : {20.0, 40.0, 80.0, 160.0}) {
    std::vector<double> rhos;
    for (int k = 0; k < 64; ++k) rhos.push_back(rho0 + 2 * pi * k / 64);
    double env = 0.0;
    for (const auto& r : asymptotic_residuals(p, 1.0, rhos)) env = std::max({env, r.rC, r.rSp});
    EXPECT_LT(env, prev) << "rho0=" << rho0;
    prev = env;
  }

  // Unscaled |C - cos(rho a)| over a decade, fitted on the envelope.
  std::vector<double> lx, ly;
  for (double rho = 20.0; rho <= 200.0; rho *= 1.2589254117941673) {
    // Evaluate where sin(rho) = +-1 to sample the envelope of K sin(rho)/rho.
    const double r = (std::floor(rho / pi) + 0.5) * pi;
    lx.push_back(std::log(r));
    ly.push_back(std::log(asymptotic_residuals(p, 1.0, {r})[0].dC));
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) sx += lx[i], sy += ly[i], sxx += lx[i] * lx[i], sxy += lx[i] * ly[i];
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_LE(slope, -1.0 + 0.1);
}
