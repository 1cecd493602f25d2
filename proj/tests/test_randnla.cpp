#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "nschur/analysis.hpp"
#include "nschur/nystrom.hpp"
#include "oracles.hpp"

using namespace nschur;

namespace {

/// Q diag(mu) Q^T with a random orthogonal Q; returns the matrix and Q.
struct SpectralMatrix {
  DenseBlock B;
  DenseBlock Q;
};

SpectralMatrix with_spectrum(const Vector& mu, unsigned seed) {
  const Index n = mu.size();
  Eigen::HouseholderQR<DenseBlock> qr(oracle::random_block(n, n, seed));
  SpectralMatrix m;
  m.Q = qr.householderQ() * DenseBlock::Identity(n, n);
  m.B = m.Q * mu.asDiagonal() * m.Q.transpose();
  m.B = 0.5 * (m.B + m.B.transpose()).eval();
  return m;
}

double orthonormality_error(const DenseBlock& U) {
  return (U.transpose() * U - DenseBlock::Identity(U.cols(), U.cols())).norm();
}

}  // namespace

TEST(GaussianSketch, Deterministic) {
  const DenseBlock a = gaussian_sketch(100, 5, 42);
  const DenseBlock b = gaussian_sketch(100, 5, 42);
  EXPECT_EQ(a, b);
}

TEST(GaussianSketch, SampleMomentsMatchStandardNormal) {
  const DenseBlock G = gaussian_sketch(10000, 2, 0);
  for (Index j = 0; j < 2; ++j) {
    const double mean = G.col(j).mean();
    const double var = (G.col(j).array() - mean).square().sum() / (10000.0 - 1.0);
    EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(10000.0));
    EXPECT_LE(std::abs(var - 1.0), 0.1);
  }
}

TEST(GaussianSketch, ZeroColumns) {
  const DenseBlock G = gaussian_sketch(7, 0, 1);
  EXPECT_EQ(G.rows(), 7);
  EXPECT_EQ(G.cols(), 0);
}

TEST(Nystrom, RankOneExact) {
  Vector u = oracle::random_block(40, 1, 3).col(0);
  u.normalize();
  const auto B = dense_operator(u * u.transpose());
  SketchConfig cfg;
  cfg.k = 1;
  cfg.p = 2;
  cfg.seed = 5;
  const auto a = nystrom_approx(B, cfg);
  ASSERT_EQ(a.rank(), 1);
  EXPECT_NEAR(a.Sigma(0), 1.0, 1e-10);
  const double sign = a.U.col(0).dot(u) > 0 ? 1.0 : -1.0;
  EXPECT_LE((sign * a.U.col(0) - u).norm(), 1e-10);
}

TEST(Nystrom, ZeroMatrixCollapses) {
  SketchConfig cfg;
  cfg.k = 3;
  cfg.p = 1;
  const auto a = nystrom_approx(dense_operator(DenseBlock::Zero(10, 10)), cfg);
  EXPECT_TRUE(a.rank_collapsed);
  EXPECT_EQ(a.rank(), 0);
  EXPECT_EQ(a.U.rows(), 10);
}

TEST(Nystrom, DecayingDiagonalNearOptimal) {
  Vector mu(60);
  const double head[] = {10, 5, 2, 1, 0.5, 0.1};
  for (Index i = 0; i < 60; ++i) mu(i) = i < 6 ? head[i] : 0.1 * std::pow(0.8, static_cast<double>(i - 5));
  const DenseBlock B = mu.asDiagonal();
  const double sigma4 = oracle::eigenvalues(B).reverse()(3);
  ASSERT_DOUBLE_EQ(sigma4, 1.0);
  double mean = 0.0;
  for (unsigned s = 0; s < 20; ++s) {
    SketchConfig cfg;
    cfg.k = 3;
    cfg.p = 3;
    cfg.q = 1;
    cfg.seed = s;
    const auto a = nystrom_approx(dense_operator(B), cfg);
    mean += oracle::norm2(B - reconstruct(a)) / 20.0;
  }
  EXPECT_LE(mean, 10.0 * sigma4);
}

TEST(Nystrom, OutputInvariants) {
  const DenseBlock A = oracle::random_spd(50, 7);
  for (Index q : {0, 1, 3}) {
    SketchConfig cfg;
    cfg.k = 8;
    cfg.p = 4;
    cfg.q = q;
    cfg.seed = 11;
    const auto a = nystrom_approx(dense_operator(A), cfg);
    ASSERT_EQ(a.rank(), 8);
    EXPECT_LE(orthonormality_error(a.U), 1e-10);
    for (Index j = 0; j < a.rank(); ++j) {
      EXPECT_GE(a.Sigma(j), 0.0);
      if (j > 0) {
        EXPECT_LE(a.Sigma(j), a.Sigma(j - 1));
      }
    }
  }
}

TEST(Nystrom, RankLimitedByThreshold) {
  // Rank-2 input with k = 4: the core matrix has only two eigenvalues above the default threshold.
  const DenseBlock V = oracle::random_block(30, 2, 2);
  const DenseBlock B = V * V.transpose();
  SketchConfig cfg;
  cfg.k = 4;
  cfg.p = 2;
  const auto a = nystrom_approx(dense_operator(B), cfg);
  EXPECT_EQ(a.core_rank, 2);
  EXPECT_EQ(a.rank(), 2);
  EXPECT_FALSE(a.rank_collapsed);
  EXPECT_LE((B - reconstruct(a)).norm(), 1e-10 * B.norm());
}

TEST(Nystrom, ExplicitEpsilonDropsSmallDirections) {
  Vector mu = Vector::Zero(20);
  mu(0) = 4.0;
  mu(1) = 1e-6;
  const DenseBlock B = with_spectrum(mu, 3).B;
  SketchConfig cfg;
  cfg.k = 2;
  cfg.p = 2;
  cfg.epsilon = 1e-3;
  const auto a = nystrom_approx(dense_operator(B), cfg);
  EXPECT_EQ(a.rank(), 1);
}

TEST(Nystrom, PowerStepsApplyOperatorQPlusOneTimes) {
  const DenseBlock A = oracle::random_spd(20, 1);
  for (Index q : {0, 1, 2, 5}) {
    int calls = 0;
    const auto op = make_operator(20, [&](const DenseBlock& X) -> DenseBlock {
      ++calls;
      return A * X;
    });
    SketchConfig cfg;
    cfg.k = 3;
    cfg.q = q;
    nystrom_approx(op, cfg);
    EXPECT_EQ(calls, q + 1);
  }
}

TEST(Nystrom, RejectsInvalidConfig) {
  const auto op = identity_operator(5);
  SketchConfig c;
  c.k = 0;
  EXPECT_THROW(nystrom_approx(op, c), InvalidArgument);
  c.k = 4;
  c.p = 2;
  EXPECT_THROW(nystrom_approx(op, c), InvalidArgument);
  c.p = -1;
  EXPECT_THROW(nystrom_approx(op, c), InvalidArgument);
  c.p = 0;
  c.q = -1;
  EXPECT_THROW(nystrom_approx(op, c), InvalidArgument);
}

TEST(Nystrom, NonFiniteOperatorFails) {
  const auto op = make_operator(6, [](const DenseBlock& X) -> DenseBlock {
    DenseBlock Y = X;
    Y(0, 0) = std::numeric_limits<double>::quiet_NaN();
    return Y;
  });
  SketchConfig c;
  c.k = 2;
  EXPECT_THROW(nystrom_approx(op, c), NumericalFailure);
}

TEST(Nystrom, ExactOnLowRankInputs) {
  for (Index r : {1, 3, 5}) {
    for (unsigned s = 0; s < 20; ++s) {
      const DenseBlock V = oracle::random_block(80, r, 100 + s);
      const DenseBlock B = V * V.transpose();
      SketchConfig cfg;
      cfg.k = 5;
      cfg.p = 2;
      cfg.seed = s;
      const auto a = nystrom_approx(dense_operator(B), cfg);
      EXPECT_LE((B - reconstruct(a)).norm(), 1e-9 * B.norm()) << "r=" << r << " seed=" << s;
    }
  }
}

TEST(Nystrom, ApproximationIsPositiveSemidefinite) {
  Vector mu(70);
  for (Index i = 0; i < 70; ++i) mu(i) = 1.0 / (1.0 + static_cast<double>(i));
  const DenseBlock B = with_spectrum(mu, 9).B;
  for (unsigned s = 0; s < 10; ++s) {
    SketchConfig cfg;
    cfg.k = 10;
    cfg.p = 5;
    cfg.q = s % 3;
    cfg.seed = s;
    const auto a = nystrom_approx(dense_operator(B), cfg);
    EXPECT_GE(a.Sigma.minCoeff(), 0.0);
    const Vector ev = oracle::eigenvalues(reconstruct(a));
    EXPECT_GE(ev(0), -1e-12 * ev(ev.size() - 1));
  }
}

TEST(Nystrom, ErrorNonincreasingInPowerSteps) {
  // Slowly decaying spectrum: the regime where power iteration pays off.
  Vector mu(200);
  for (Index i = 0; i < 200; ++i) mu(i) = 1.0 / std::sqrt(1.0 + static_cast<double>(i));
  const DenseBlock B = with_spectrum(mu, 21).B;
  double prev = std::numeric_limits<double>::infinity();
  for (Index q : {0, 1, 2, 4}) {
    double mean = 0.0;
    for (unsigned s = 0; s < 20; ++s) {
      SketchConfig cfg;
      cfg.k = 20;
      cfg.p = 5;
      cfg.q = q;
      cfg.seed = s;
      mean += oracle::norm2(B - reconstruct(nystrom_approx(dense_operator(B), cfg))) / 20.0;
    }
    EXPECT_LE(mean, prev) << "q=" << q;
    prev = mean;
  }
}

TEST(Nystrom, AngleBoundHoldsInMean) {
  // sin of the angle between the j-th eigenvector and the (k+p)-dimensional
  // sketch range, against gamma_{j,k}^{q+1} E(c) with gamma = mu_{k+1}/mu_j.
  const Index n = 120, k = 6, p = 4;
  Vector mu(n);
  for (Index i = 0; i < n; ++i) mu(i) = std::pow(0.7, static_cast<double>(i));
  const auto sm = with_spectrum(mu, 5);
  const double Ec = expected_c(k, p, n);
  for (Index q : {0, 1, 2}) {
    Vector mean_sin = Vector::Zero(k);
    for (unsigned s = 0; s < 50; ++s) {
      SketchConfig cfg;
      cfg.k = k + p;
      cfg.p = 0;
      cfg.q = q;
      cfg.seed = s;
      const auto a = nystrom_approx(dense_operator(sm.B), cfg);
      for (Index j = 0; j < k; ++j) {
        const Vector u = sm.Q.col(j);
        mean_sin(j) += (u - a.U * (a.U.transpose() * u)).norm() / 50.0;
      }
    }
    for (Index j = 0; j < k; ++j) {
      const double gamma = mu(k) / mu(j);
      EXPECT_LE(mean_sin(j), std::pow(gamma, static_cast<double>(q + 1)) * Ec) << "q=" << q << " j=" << j;
    }
  }
}

TEST(SubspaceAngle, IdenticalIsZero) {
  const DenseBlock U = orthonormalize(oracle::random_block(20, 4, 1));
  EXPECT_LE(subspace_angle(U, U), 1e-14);
}

TEST(SubspaceAngle, OrthogonalIsOne) {
  const DenseBlock e1 = DenseBlock::Identity(3, 3).col(0);
  const DenseBlock e2 = DenseBlock::Identity(3, 3).col(1);
  EXPECT_NEAR(subspace_angle(e1, e2), 1.0, 1e-15);
}

TEST(SubspaceAngle, MatchesPrincipalAnglesFromSvd) {
  for (unsigned s = 0; s < 5; ++s) {
    const DenseBlock U = orthonormalize(oracle::random_block(30, 3, 10 + s));
    const DenseBlock V = orthonormalize(oracle::random_block(30, 3, 20 + s));
    Eigen::JacobiSVD<DenseBlock> svd(U.transpose() * V);
    const double cmin = svd.singularValues().minCoeff();
    EXPECT_NEAR(subspace_angle(U, V), std::sqrt(1.0 - cmin * cmin), 1e-12);
  }
}

TEST(SubspaceAngle, RejectsNonOrthonormal) {
  const DenseBlock U = orthonormalize(oracle::random_block(10, 2, 1));
  EXPECT_THROW(subspace_angle(2.0 * U, U), InvalidArgument);
  EXPECT_THROW(subspace_angle(U, DenseBlock::Identity(9, 2)), DimensionMismatch);
}
