#include "diqc/conic.h"

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace diqc {
namespace {

constexpr double kTol = 1e-8;

void ExpectKkt(const SdpSolution& s, double bound = 10 * kTol) {
  ASSERT_EQ(s.status, SdpStatus::kOptimal) << s.message;
  EXPECT_LE(s.primal_residual, bound);
  EXPECT_LE(s.dual_residual, bound);
  EXPECT_LE(s.gap, bound);
  EXPECT_GE(s.min_eig_x, -bound);
}

// min x  s.t.  [[x, 1], [1, x]] PSD, written with a free x.
SdpProblem ArrowProblem() {
  SdpProblem p;
  const int x = p.AddFree();
  const int blk = p.AddBlock(2);
  for (int i = 0; i < 2; ++i) {
    const int r = p.AddRow(0.0);
    p.AddBlockCoeff(r, blk, i, i, 1.0);
    p.AddFreeCoeff(r, x, -1.0);
  }
  const int r = p.AddRow(1.0);
  p.AddBlockCoeff(r, blk, 0, 1, 0.5);
  p.AddFreeCost(x, 1.0);
  return p;
}

// Bisection oracle for the same problem: smallest x with min eig >= 0.
double ArrowOracle() {
  double lo = -5.0, hi = 5.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    Eigen::Matrix2d m;
    m << mid, 1, 1, mid;
    (m.selfadjointView<Eigen::Lower>().eigenvalues()(0) >= 0 ? hi : lo) = mid;
  }
  return hi;
}

TEST(SolveSdpTest, ArrowMatchesBisection) {
  const SdpSolution s = SolveSdp(ArrowProblem());
  ExpectKkt(s);
  EXPECT_NEAR(s.free(0), 1.0, 1e-7);
  EXPECT_NEAR(s.free(0), ArrowOracle(), 1e-6);
  EXPECT_NEAR(s.primal_objective, 1.0, 1e-7);
}

TEST(SolveSdpTest, IdentityFeasibility) {
  SdpProblem p;
  const int blk = p.AddBlock(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      const int r = p.AddRow(i == j ? 1.0 : 0.0);
      p.AddBlockCoeff(r, blk, i, j, i == j ? 1.0 : 0.5);
    }
  }
  const SdpSolution s = SolveSdp(p);
  ExpectKkt(s);
  EXPECT_LE((s.x[0] - Eigen::Matrix3d::Identity()).norm(), 1e-7);
}

TEST(SolveSdpTest, NegativeScalarIsPrimalInfeasible) {
  SdpProblem p;
  const int blk = p.AddBlock(1);
  const int r = p.AddRow(-1.0);
  p.AddBlockCoeff(r, blk, 0, 0, 1.0);
  const SdpSolution s = SolveSdp(p);
  ASSERT_EQ(s.status, SdpStatus::kPrimalInfeasible) << s.message;
  // Farkas ray: rhs'y = 1 and -A^*(y) PSD, i.e. y < 0 here.
  EXPECT_NEAR(-1.0 * s.y(0), 1.0, 1e-12);
  EXPECT_GE(-s.y(0), kTol);
  EXPECT_LE(s.ray_residual, kTol);
}

TEST(SolveSdpTest, InconsistentEqualitiesArePrimalInfeasible) {
  SdpProblem p;
  const int blk = p.AddBlock(2);
  p.AddBlockCoeff(p.AddRow(1.0), blk, 0, 0, 1.0);
  p.AddBlockCoeff(p.AddRow(2.0), blk, 0, 0, 1.0);
  const SdpSolution s = SolveSdp(p);
  EXPECT_EQ(s.status, SdpStatus::kPrimalInfeasible);
  EXPECT_NEAR(s.y(0) + 2 * s.y(1), 1.0, 1e-12);
}

TEST(SolveSdpTest, UnboundedIsDualInfeasible) {
  // min -X00 s.t. X01 = 0.
  SdpProblem p;
  const int blk = p.AddBlock(2);
  p.AddBlockCoeff(p.AddRow(0.0), blk, 0, 1, 0.5);
  p.AddBlockCost(blk, 0, 0, -1.0);
  const SdpSolution s = SolveSdp(p);
  ASSERT_EQ(s.status, SdpStatus::kDualInfeasible) << s.message;
  EXPECT_NEAR(s.x[0](0, 0), 1.0, 1e-6);
  EXPECT_LE(s.ray_residual, 1e-6);

  SdpProblem q;
  q.AddBlock(1);
  q.AddBlockCoeff(q.AddRow(1.0), 0, 0, 0, 1.0);
  const int u = q.AddFree();
  q.AddFreeCost(u, 1.0);
  EXPECT_EQ(SolveSdp(q).status, SdpStatus::kDualInfeasible);
}

TEST(SolveSdpTest, MinEigenvalueOverSpectraplex) {
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 3 + trial;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < c.size(); ++i) c.data()[i] = g(rng);
    c = 0.5 * (c + c.transpose()).eval();
    SdpProblem p;
    const int blk = p.AddBlock(n);
    const int r = p.AddRow(1.0);
    for (int i = 0; i < n; ++i) p.AddBlockCoeff(r, blk, i, i, 1.0);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) p.AddBlockCost(blk, i, j, c(i, j));
    }
    const SdpSolution s = SolveSdp(p);
    ExpectKkt(s);
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues()(0);
    EXPECT_NEAR(s.primal_objective, lmin, 1e-7 * (1 + std::abs(lmin)));
  }
}

TEST(SolveSdpTest, MaxEigenvalueWithFreeVariable) {
  std::mt19937 rng(6);
  std::normal_distribution<double> g;
  Eigen::MatrixXd c(4, 4);
  for (int i = 0; i < 16; ++i) c.data()[i] = g(rng);
  c = 0.5 * (c + c.transpose()).eval();
  // min t  s.t.  X = t I - C PSD.
  SdpProblem p;
  const int t = p.AddFree();
  const int blk = p.AddBlock(4);
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      const int r = p.AddRow(-c(i, j));
      p.AddBlockCoeff(r, blk, i, j, i == j ? 1.0 : 0.5);
      if (i == j) p.AddFreeCoeff(r, t, -1.0);
    }
  }
  p.AddFreeCost(t, 1.0);
  const SdpSolution s = SolveSdp(p);
  ExpectKkt(s);
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues()(3);
  EXPECT_NEAR(s.free(0), lmax, 1e-7 * (1 + std::abs(lmax)));
}

TEST(SolveSdpTest, ComplementarityDecreasesMonotonically) {
  for (const SdpProblem& p : {ArrowProblem()}) {
    const SdpSolution s = SolveSdp(p);
    for (size_t k = 1; k < s.mu_history.size(); ++k) {
      EXPECT_LE(s.mu_history[k], s.mu_history[k - 1] * (1 + 1e-10));
    }
  }
}

TEST(SolveSdpTest, IterationLimitReported) {
  SdpOptions opt;
  opt.max_iter = 2;
  const SdpSolution s = SolveSdp(ArrowProblem(), opt);
  EXPECT_EQ(s.status, SdpStatus::kMaxIter);
  EXPECT_FALSE(s.message.empty());
}

TEST(SolveSdpTest, RejectsMalformedProblems) {
  SdpProblem p;
  EXPECT_THROW(SolveSdp(p), std::invalid_argument);
  p.AddBlock(2);
  p.AddBlockCoeff(p.AddRow(1.0), 0, 2, 0, 1.0);
  EXPECT_THROW(SolveSdp(p), std::invalid_argument);
}

TEST(DumpProblemTest, RoundTrip) {
  const SdpProblem p = ArrowProblem();
  std::stringstream ss;
  DumpProblem(p, ss);
  const SdpProblem q = ParseProblem(ss);
  EXPECT_EQ(q.num_free, p.num_free);
  EXPECT_EQ(q.block_sizes, p.block_sizes);
  EXPECT_EQ(q.rhs, p.rhs);
  EXPECT_EQ(q.constraints.size(), p.constraints.size());
  EXPECT_NEAR(SolveSdp(q).primal_objective, SolveSdp(p).primal_objective, 1e-12);

  std::stringstream bad("diqc-sdp 1\nblocks 1 2\nrows 1\nbogus 3\n");
  EXPECT_THROW(ParseProblem(bad), std::invalid_argument);
}

}  // namespace
}  // namespace diqc
