#include "diqc/lti.h"

#include <cmath>

#include <gtest/gtest.h>

#include "diqc/iqc.h"
#include "diqc/linalg.h"

namespace diqc {
namespace {

StateSpace Lag(double a) {
  return StateSpace(Eigen::MatrixXd::Constant(1, 1, -a), Eigen::MatrixXd::Ones(1, 1),
                    Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1));
}

TEST(FreqResponseTest, FirstOrderLag) {
  const StateSpace g = Lag(1.0);
  EXPECT_NEAR(std::abs(FreqResponse(g, 0.0)(0, 0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(FreqResponse(g, 1.0)(0, 0) - std::complex<double>(0.5, -0.5)), 0.0, 1e-15);
  Eigen::Matrix2d d;
  d << 1, 2, 3, 4;
  for (double w : {0.0, 1.0, 1e3}) {
    EXPECT_TRUE(FreqResponse(StateSpace::Static(d), w).real().isApprox(d));
  }
}

TEST(FreqResponseTest, PoleOnAxisThrows) {
  Eigen::Matrix2d a;
  a << 0, 1, -1, 0;
  StateSpace g(a, Eigen::Vector2d(0, 1), Eigen::RowVector2d(1, 0), Eigen::MatrixXd::Zero(1, 1));
  EXPECT_THROW(FreqResponse(g, 1.0), std::domain_error);
}

TEST(StackOutputsTest, Examples) {
  const StateSpace one = StackOutputs({Lag(2.0)});
  EXPECT_TRUE(one.A.isApprox(Lag(2.0).A));
  EXPECT_EQ(one.outputs(), 1);

  const StateSpace two = StackOutputs({Lag(1.0), Lag(3.0)});
  EXPECT_EQ(two.states(), 2);
  EXPECT_EQ(two.outputs(), 2);
  for (double w : LogGrid(1e-2, 1e2, 10)) {
    const Eigen::MatrixXcd g = FreqResponse(two, w);
    EXPECT_LE(std::abs(g(0, 0) - FreqResponse(Lag(1.0), w)(0, 0)), 1e-10);
    EXPECT_LE(std::abs(g(1, 0) - FreqResponse(Lag(3.0), w)(0, 0)), 1e-10);
  }

  Eigen::MatrixXd d1(1, 2), d2(2, 2);
  d1 << 1, 2;
  d2 << 3, 4, 5, 6;
  const StateSpace st = StackOutputs({StateSpace::Static(d1), StateSpace::Static(d2)});
  Eigen::MatrixXd want(3, 2);
  want << d1, d2;
  EXPECT_EQ(st.states(), 0);
  EXPECT_TRUE(st.D.isApprox(want));

  EXPECT_THROW(StackOutputs({StateSpace::Static(d1), Lag(1.0)}), std::invalid_argument);
}

TEST(MultiplierFreqTest, Examples) {
  const Eigen::Matrix2d m = Eigen::Vector2d(1, -1).asDiagonal();
  for (double w : {0.0, 1.0, 50.0}) {
    EXPECT_TRUE(MultiplierFreq(StateSpace::Static(Eigen::Matrix2d::Identity()), m, w)
                    .real()
                    .isApprox(Eigen::MatrixXd(m)));
  }
  const MultiplierSet ms = DelayMultipliers(1.0);
  const Eigen::MatrixXcd pi = MultiplierFreq(ms.entry(1).psi, ms.entry(1).m, 1.0);
  EXPECT_NEAR(pi(0, 0).real(), 1.08 / 1.15, 1e-12);
  EXPECT_NEAR(1.08 / 1.15, 0.939130, 1e-6);
  EXPECT_LE((pi - pi.adjoint()).norm(), 1e-12);

  // Psi = [1/(s+1); 1] acting on (v, w).
  StateSpace psi(Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::RowVector2d(1, 0),
                 Eigen::Vector2d(1, 0), (Eigen::Matrix2d() << 0, 0, 0, 1).finished());
  const Eigen::MatrixXcd hi = MultiplierFreq(psi, m, 1e6);
  EXPECT_NEAR(hi(0, 0).real(), 0.0, 1e-11);
  EXPECT_NEAR(hi(1, 1).real(), -1.0, 1e-14);
}

TEST(JFactorTest, StaticAlreadyFactored) {
  const Eigen::Matrix2d m = Eigen::Vector2d(1, -1).asDiagonal();
  const JFactor f = JSpectralFactorize(StateSpace::Static(Eigen::Matrix2d::Identity()), m, 1, 1);
  EXPECT_TRUE(f.psi_tilde.D.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  EXPECT_TRUE(f.m_tilde.isApprox(Eigen::MatrixXd(m)));
  EXPECT_TRUE(f.strict_sign_conditions);
}

class JetMultiplierFactorTest : public ::testing::TestWithParam<double> {};

TEST_P(JetMultiplierFactorTest, GridIdentityAndRiccati) {
  const MultiplierSet ms = DelayMultipliers(GetParam());
  const CombinedMultiplier c = Combine(ms, Eigen::Vector2d(1.0, 1.0));
  const JFactor f = JSpectralFactorize(c.psi, c.m_lambda, 1, 1);
  EXPECT_EQ(f.psi_tilde.states(), c.psi.states());
  EXPECT_LE(JFactorGridResidual(c.psi, c.m_lambda, f, LogGrid(1e-3, 1e3, 200)), 1e-6);
  EXPECT_LE(f.are_residual, 1e-8);
  const Eigen::MatrixXd r_inv = f.r.inverse();
  const Eigen::MatrixXd acl =
      c.psi.A - c.psi.B * r_inv * (f.x * c.psi.B + f.s).transpose();
  EXPECT_TRUE(IsHurwitz(acl));
  // Pi_vv(0) = 0 for this family: the strict sign conditions cannot hold.
  EXPECT_FALSE(f.strict_sign_conditions);
}

INSTANTIATE_TEST_SUITE_P(Theta, JetMultiplierFactorTest, ::testing::Values(0.04, 0.08));

TEST(JFactorTest, NormBoundOnlyGivesZeroRiccati) {
  const MultiplierSet ms = DelayMultipliers(0.04);
  const CombinedMultiplier c = Combine(ms, Eigen::Vector2d(1.0, 0.0));
  const JFactor f = JSpectralFactorize(c.psi, c.m_lambda, 1, 1);
  EXPECT_LE(f.x.norm(), 1e-12);
  EXPECT_LE(f.psi_tilde.C.norm(), 1e-12);
}

TEST(JFactorTest, WrongInertiaRejected) {
  const Eigen::Matrix2d m = Eigen::Vector2d(1, 1).asDiagonal();
  EXPECT_THROW(JSpectralFactorize(StateSpace::Static(Eigen::Matrix2d::Identity()), m, 1, 1),
               std::invalid_argument);
}

TEST(RandomStableLtiTest, SeededAndStable) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const StateSpace g = RandomStableLti(seed);
    EXPECT_GE(g.states(), 1);
    EXPECT_LE(g.states(), 4);
    EXPECT_LE(SpectralAbscissa(g.A), -0.2 + 1e-9);
  }
  EXPECT_TRUE(RandomStableLti(7).A.isApprox(RandomStableLti(7).A));
  EXPECT_LE(RandomStableLti(3, 1).states(), 1);
}

}  // namespace
}  // namespace diqc
