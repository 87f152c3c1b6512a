#include "crnobs/kinetics.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "crnobs/errors.hpp"
#include "fixtures.hpp"

namespace crnobs {
namespace {

using testing::Enzyme;
using testing::McKeithan;
using testing::McKeithanOutput;
using testing::TwoSpecies;

Eigen::VectorXd RandomPositive(std::mt19937_64& rng, int n, double lo = 0.1, double hi = 10) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = std::exp(u(rng));
  return x;
}

TEST(OutputMapTest, Validation) {
  EXPECT_NO_THROW(OutputMap(Eigen::MatrixXd::Identity(3, 3)));
  Eigen::MatrixXd frac(1, 2);
  frac << 0.5, 1;
  EXPECT_THROW(OutputMap{frac}, ValidationError);
  Eigen::MatrixXd zero_row = Eigen::MatrixXd::Zero(2, 2);
  zero_row(0, 0) = 1;
  EXPECT_THROW(OutputMap{zero_row}, ValidationError);
  Eigen::MatrixXd real_ok(1, 2);
  real_ok << 1.5, 0;
  EXPECT_NO_THROW(OutputMap{real_ok});
}

TEST(EvalFTest, McKeithanAtOnes) {
  const Eigen::VectorXd f = EvalF(McKeithan(), Eigen::VectorXd::Ones(4));
  EXPECT_NEAR(f[0], 4.5, 1e-15);
  EXPECT_NEAR(f[1], 4.5, 1e-15);
  EXPECT_NEAR(f[2], -3.5, 1e-15);
  EXPECT_NEAR(f[3], -1.0, 1e-15);
}

TEST(EvalFTest, TwoSpeciesEquilibrium) {
  EXPECT_EQ(EvalF(TwoSpecies(), Eigen::Vector2d(4, 1)).norm(), 0.0);
  EXPECT_EQ(EvalF(TwoSpecies(), Eigen::Vector2d(8, 2)).norm(), 0.0);
}

TEST(EvalFTest, NoActiveSourceComplex) {
  // every complex has a vanishing monomial, so no reaction fires
  EXPECT_EQ(EvalF(McKeithan(), Eigen::Vector4d(0, 2, 0, 0)).norm(), 0.0);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(6);
  x[4] = 0;  // E
  x[2] = 0;  // Q
  EXPECT_EQ(EvalFBlock(Enzyme(), 0, x).norm(), 0.0);
}

TEST(EvalFTest, Overflow) {
  EXPECT_THROW(EvalF(McKeithan(), Eigen::VectorXd::Constant(4, 1e200)), OverflowError);
}

TEST(EvalFTest, FieldLiesInStoichiometricSubspace) {
  std::mt19937_64 rng(1);
  for (const auto& net : {McKeithan(), TwoSpecies(), Enzyme()}) {
    const StoichSubspace sub = StoichBasis(net);
    for (int s = 0; s < 1000; ++s) {
      const Eigen::VectorXd f = EvalF(net, RandomPositive(rng, net.num_species()));
      EXPECT_LE((sub.q * f).norm(), 1e-10 * (1 + f.norm()));
    }
  }
}

TEST(EvalFTest, BlockAdditive) {
  const ReactionNetwork net = Enzyme();
  std::mt19937_64 rng(2);
  for (int s = 0; s < 100; ++s) {
    const Eigen::VectorXd x = RandomPositive(rng, 6);
    const Eigen::VectorXd sum = EvalFBlock(net, 0, x) + EvalFBlock(net, 1, x);
    EXPECT_LE((EvalF(net, x) - sum).norm(), 1e-13 * (1 + sum.norm()));
  }
  // printed f1, f2 with the illustrative constants
  Eigen::VectorXd x(6);
  x << 1.1, 0.7, 2.0, 0.4, 1.3, 0.9;
  const double S = x[0], P = x[1], Q = x[2], R = x[3], E = x[4], I = x[5];
  const double k1 = 1, km1 = 2, km2 = 0.5, k2 = 3, k3 = 1.5, km3 = 0.7;
  Eigen::VectorXd f1(6), f2(6);
  f1 << km1 * Q - k1 * S * E, -km2 * P * E + k2 * Q,
      -km1 * Q + k1 * S * E + km2 * P * E - k2 * Q, 0,
      km1 * Q - k1 * S * E - km2 * P * E + k2 * Q, 0;
  f2 << 0, 0, km3 * R - k3 * Q * I, -km3 * R + k3 * Q * I, 0, km3 * R - k3 * Q * I;
  EXPECT_LE((EvalFBlock(net, 0, x) - f1).norm(), 1e-14);
  EXPECT_LE((EvalFBlock(net, 1, x) - f2).norm(), 1e-14);
}

template <typename F>
Eigen::MatrixXd CentralDifference(F&& fn, const Eigen::VectorXd& x) {
  const Eigen::VectorXd f0 = fn(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index l = 0; l < x.size(); ++l) {
    const double h = 1e-6 * (1 + std::abs(x[l]));
    Eigen::VectorXd xp = x, xm = x;
    xp[l] += h;
    xm[l] -= h;
    jac.col(l) = (fn(xp) - fn(xm)) / (2 * h);
  }
  return jac;
}

TEST(EvalJacobianFTest, McKeithanColumnOne) {
  const Eigen::MatrixXd jac = EvalJacobianF(McKeithan(), Eigen::VectorXd::Ones(4));
  EXPECT_EQ(Eigen::VectorXd(jac.col(0)), Eigen::Vector4d(-0.5, -0.5, 0.5, 0));
}

TEST(EvalJacobianFTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (const auto& net : {McKeithan(), TwoSpecies(), Enzyme()}) {
    for (int s = 0; s < 200; ++s) {
      const Eigen::VectorXd x = RandomPositive(rng, net.num_species());
      const Eigen::MatrixXd jac = EvalJacobianF(net, x);
      const Eigen::MatrixXd fd =
          CentralDifference([&](const Eigen::VectorXd& v) { return EvalF(net, v); }, x);
      EXPECT_LE((jac - fd).norm(), 1e-6 * (1 + jac.norm()));
    }
  }
}

TEST(EvalHTest, Examples) {
  EXPECT_EQ(EvalH(McKeithanOutput(), Eigen::Vector4d(2, 3, 5, 7)), Eigen::Vector2d(18, 14));
  const Eigen::Vector3d x(0.3, 2, 7);
  EXPECT_EQ(EvalH(OutputMap(Eigen::MatrixXd::Identity(3, 3)), x), x);
  Eigen::MatrixXd c(1, 2);
  c << 4, 1;
  EXPECT_EQ(EvalH(OutputMap(c), Eigen::Vector2d(4, 1))[0], 256.0);
}

TEST(EvalHTest, AbsoluteValueAndZeroExponent) {
  Eigen::MatrixXd c(1, 3);
  c << 1, 2, 0;
  EXPECT_EQ(EvalH(OutputMap(c), Eigen::Vector3d(-2, -3, 0))[0], 18.0);
}

TEST(EvalHLogTest, Examples) {
  EXPECT_EQ(EvalHLog(McKeithanOutput(), Eigen::VectorXd::Ones(4)).norm(), 0.0);
  const double e = std::exp(1.0);
  const Eigen::VectorXd hl = EvalHLog(McKeithanOutput(), Eigen::Vector4d(e, e, 1, e));
  EXPECT_NEAR(hl[0], 3, 1e-15);
  EXPECT_NEAR(hl[1], 2, 1e-15);
  // x3 is not used by any output
  EXPECT_NO_THROW(EvalHLog(McKeithanOutput(), Eigen::Vector4d(1, 1, 0, 1)));
  try {
    EvalHLog(McKeithanOutput(), Eigen::Vector4d(1, 1, 1, 0));
    FAIL();
  } catch (const DomainError& err) {
    EXPECT_EQ(err.coordinate(), 3);
  }
}

TEST(EvalHLogTest, LogOfOutputIsLinear) {
  std::mt19937_64 rng(4);
  const OutputMap c = McKeithanOutput();
  for (int s = 0; s < 1000; ++s) {
    const Eigen::VectorXd x = RandomPositive(rng, 4, 1e-3, 1e3);
    const Eigen::VectorXd h = EvalH(c, x);
    const Eigen::VectorXd eh = ExpMap(EvalHLog(c, x));
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(eh[i] / h[i], 1.0, 1e-12);
  }
}

TEST(EvalJacobianHTest, Examples) {
  Eigen::MatrixXd c(1, 2);
  c << 4, 1;
  const Eigen::MatrixXd jac = EvalJacobianH(OutputMap(c), Eigen::Vector2d(4, 1));
  EXPECT_EQ(jac(0, 0), 256.0);
  EXPECT_EQ(jac(0, 1), 256.0);
  EXPECT_EQ(EvalJacobianH(OutputMap(Eigen::MatrixXd::Identity(2, 2)), Eigen::Vector2d(2, 3)),
            Eigen::MatrixXd::Identity(2, 2));
  EXPECT_THROW(EvalJacobianH(OutputMap(c), Eigen::Vector2d(4, 0)), DomainError);
}

TEST(EvalJacobianHTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd real_c(2, 3);
  real_c << 1.5, 0, 2, 0, 3, 1;
  for (const OutputMap& c : {McKeithanOutput(), testing::EnzymeOutput(), OutputMap(real_c)}) {
    for (int s = 0; s < 200; ++s) {
      const Eigen::VectorXd x = RandomPositive(rng, c.num_species());
      const Eigen::MatrixXd jac = EvalJacobianH(c, x);
      const Eigen::MatrixXd fd =
          CentralDifference([&](const Eigen::VectorXd& v) { return EvalH(c, v); }, x);
      EXPECT_LE((jac - fd).norm(), 1e-6 * (1 + jac.norm()));
    }
  }
}

TEST(RhoTest, InversePair) {
  EXPECT_EQ(Rho(Eigen::VectorXd::Ones(3)).norm(), 0.0);
  const Eigen::VectorXd r = Rho(Eigen::Vector2d(std::exp(2.0), 1));
  EXPECT_NEAR(r[0], 2, 1e-15);
  EXPECT_EQ(r[1], 0);
  std::mt19937_64 rng(6);
  for (int s = 0; s < 100; ++s) {
    const Eigen::VectorXd x = RandomPositive(rng, 5, 1e-6, 1e6);
    const Eigen::VectorXd back = ExpMap(Rho(x));
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(back[i] / x[i], 1.0, 1e-14);
  }
  EXPECT_THROW(Rho(Eigen::Vector2d(1, 0)), DomainError);
}

}  // namespace
}  // namespace crnobs
