#include "diqc/iqc.h"

#include <cmath>
#include <numbers>
#include <random>

#include <fftw3.h>
#include <gtest/gtest.h>

#include "diqc/lti.h"

namespace diqc {
namespace {

TEST(DelayMultipliersTest, Structure) {
  const MultiplierSet ms = DelayMultipliers(0.1);
  ASSERT_EQ(ms.size(), 2);
  Eigen::Matrix2d m1;
  m1 << 0, -1, -1, -1;
  EXPECT_TRUE(ms.entry(0).m.isApprox(Eigen::MatrixXd(m1)));
  // |v|^2 - |v + w|^2 = -2vw - w^2.
  for (double v : {-1.0, 0.3, 2.0}) {
    for (double w : {-0.5, 0.0, 1.5}) {
      const Eigen::Vector2d z(v, w);
      EXPECT_NEAR(z.dot(m1 * z), v * v - (v + w) * (v + w), 1e-14);
    }
  }
  EXPECT_EQ(ms.entry(1).psi.states(), 2);
  EXPECT_FALSE(ms.FirstIsNormBound());
}

TEST(DelayMultipliersTest, ZeroDelayDegenerates) {
  const MultiplierSet ms = DelayMultipliers(0.0);
  EXPECT_EQ(ms.entry(1).psi.states(), 0);
  const Eigen::MatrixXcd pi = MultiplierFreq(ms.entry(1).psi, ms.entry(1).m, 3.0);
  EXPECT_NEAR(std::abs(pi(0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(pi(1, 1).real(), -1.0, 1e-15);
  EXPECT_THROW(DelayMultipliers(-1.0), std::invalid_argument);
}

TEST(DelayMultipliersTest, EtaScaling) {
  for (double theta : {0.04, 0.16, 1.0}) {
    const MultiplierSet ms = DelayMultipliers(theta);
    for (double w : {0.01, 1.0, 30.0}) {
      const Eigen::MatrixXcd pi = MultiplierFreq(ms.entry(1).psi, ms.entry(1).m, w);
      EXPECT_NEAR(pi(0, 0).real(), DelayEta(theta * w), 1e-10);
    }
  }
  EXPECT_NEAR(DelayEta(1.0), 0.939130, 1e-6);
}

TEST(NormBoundTest, Examples) {
  const MultiplierEntry e = NormBoundMultiplier(1, 1);
  EXPECT_TRUE(e.m.isApprox(Eigen::MatrixXd(Eigen::Vector2d(1, -1).asDiagonal())));
  const Eigen::MatrixXcd p0 = MultiplierFreq(e.psi, e.m, 0.0);
  for (double w : {1.0, 100.0}) {
    EXPECT_LE((MultiplierFreq(e.psi, e.m, w) - p0).norm(), 1e-14);
  }
  MultiplierSet ms(1, 1);
  ms.Add(e);
  EXPECT_TRUE(ms.FirstIsNormBound());
  EXPECT_TRUE(CheckAssumption1(ms, CheckGrid()).all_pass());
  EXPECT_THROW(NormBoundMultiplier(0, 1), std::invalid_argument);
}

TEST(Assumption1Test, DelaySetPassesAndSignFlipFails) {
  EXPECT_TRUE(CheckAssumption1(DelayMultipliers(0.1), CheckGrid()).all_pass());
  MultiplierSet bad(1, 1);
  bad.Add({"flipped", StateSpace::Static(Eigen::Matrix2d::Identity()),
           Eigen::Vector2d(-1, 1).asDiagonal()});
  const Assumption1Report r = CheckAssumption1(bad, CheckGrid());
  EXPECT_FALSE(r.entries[0].vv_ok);
  EXPECT_FALSE(r.entries[0].ww_ok);
  EXPECT_FALSE(r.all_pass());
}

TEST(MultiplierSetTest, RejectsUnstableFilterAndBadShapes) {
  MultiplierSet ms(1, 1);
  StateSpace unstable(Eigen::MatrixXd::Ones(1, 1), Eigen::RowVector2d(1, 0),
                      Eigen::Vector2d(1, 0), Eigen::Matrix2d::Identity());
  EXPECT_THROW(ms.Add({"u", unstable, Eigen::Matrix2d::Identity()}), std::invalid_argument);
  EXPECT_THROW(ms.Add({"s", StateSpace::Static(Eigen::Matrix3d::Identity()),
                       Eigen::Matrix3d::Identity()}),
               std::invalid_argument);
  Eigen::Matrix2d asym;
  asym << 1, 2, 0, 1;
  EXPECT_THROW(ms.Add({"a", StateSpace::Static(Eigen::Matrix2d::Identity()), asym}),
               std::invalid_argument);
}

TEST(CombineTest, LinearityInLambda) {
  const MultiplierSet ms = DelayMultipliers(0.04);
  const CombinedMultiplier c10 = Combine(ms, Eigen::Vector2d(1, 0));
  const CombinedMultiplier c20 = Combine(ms, Eigen::Vector2d(2, 0));
  const CombinedMultiplier c11 = Combine(ms, Eigen::Vector2d(1, 1));
  const CombinedMultiplier c03 = Combine(ms, Eigen::Vector2d(0.5, 3));
  const CombinedMultiplier sum = Combine(ms, Eigen::Vector2d(1.5, 4));
  for (double w : LogGrid(1e-3, 1e3, 50)) {
    const Eigen::MatrixXcd p1 = MultiplierFreq(ms.entry(0).psi, ms.entry(0).m, w);
    EXPECT_LE((MultiplierFreq(c10.psi, c10.m_lambda, w) - p1).norm(), 1e-12);
    EXPECT_LE((MultiplierFreq(c20.psi, c20.m_lambda, w) - 2.0 * p1).norm(), 1e-12);
    const Eigen::MatrixXcd lin = MultiplierFreq(c11.psi, c11.m_lambda, w) +
                                 MultiplierFreq(c03.psi, c03.m_lambda, w);
    EXPECT_LE((MultiplierFreq(sum.psi, sum.m_lambda, w) - lin).norm(), 1e-10);
  }
  // At w = 0 eta vanishes, so only the vv block of Pi_lambda reduces to Pi_1;
  // the ww block keeps the -|w|^2 term of the second constraint.
  const Eigen::MatrixXcd p1 = MultiplierFreq(ms.entry(0).psi, ms.entry(0).m, 0.0);
  const Eigen::MatrixXcd p11 = MultiplierFreq(c11.psi, c11.m_lambda, 0.0);
  EXPECT_NEAR(std::abs(p11(0, 0) - p1(0, 0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(p11(0, 1) - p1(0, 1)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(p11(1, 1) - (p1(1, 1) - 1.0)), 0.0, 1e-12);
}

TEST(CombineTest, RejectsLambdaOutsideSet) {
  const MultiplierSet ms = DelayMultipliers(0.04);
  EXPECT_THROW(Combine(ms, Eigen::Vector2d(0.0, 1.0)), std::invalid_argument);
  EXPECT_THROW(Combine(ms, Eigen::Vector2d(1.0, -1.0)), std::invalid_argument);
  EXPECT_THROW(Combine(ms, Eigen::Vector3d(1.0, 1.0, 1.0)), std::invalid_argument);
}

TEST(HardIqcTest, ZeroSignals) {
  const MultiplierSet ms = DelayMultipliers(0.04);
  const int n = 1000;
  const auto q = HardIqcPartialIntegrals(ms.entry(1).psi, ms.entry(1).m,
                                         Eigen::MatrixXd::Zero(n, 1),
                                         Eigen::MatrixXd::Zero(n, 1), 1e-4);
  for (double x : q) EXPECT_EQ(x, 0.0);
}

TEST(HardIqcTest, NormBoundDetectsSoftViolation) {
  const MultiplierEntry e = NormBoundMultiplier(1, 1);
  const int n = 2001;
  const double dt = 1e-3;
  Eigen::MatrixXd w(n, 1);
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    w(k, 0) = t > 0.5 && t < 1.5 ? std::pow(std::sin(std::numbers::pi * (t - 0.5)), 2) : 0.0;
  }
  const auto q = HardIqcPartialIntegrals(e.psi, e.m, Eigen::MatrixXd::Zero(n, 1), w, dt);
  EXPECT_LT(q.back(), -0.3);
  EXPECT_LT(*std::min_element(q.begin(), q.end()), 0.0);
}

TEST(HardIqcTest, SineThroughDelayIsHard) {
  const double theta = 0.04, dt = 2e-4, horizon = 20.0;
  const int lag = static_cast<int>(std::lround(theta / dt));
  const int n = static_cast<int>(horizon / dt) + 1;
  Eigen::MatrixXd v(n, 1), w(n, 1);
  for (int k = 0; k < n; ++k) v(k, 0) = std::sin(k * dt);
  for (int k = 0; k < n; ++k) w(k, 0) = (k >= lag ? v(k - lag, 0) : 0.0) - v(k, 0);
  const MultiplierSet ms = DelayMultipliers(theta);
  const CombinedMultiplier c = Combine(ms, Eigen::Vector2d(1, 1));
  const JFactor f = JSpectralFactorize(c.psi, c.m_lambda, 1, 1);
  const auto q = HardIqcPartialIntegrals(f.psi_tilde, f.m_tilde, v, w, dt);
  EXPECT_GE(*std::min_element(q.begin(), q.end()), -1e-6);
}

TEST(HardIqcTest, RejectsCoarseStep) {
  const MultiplierSet ms = DelayMultipliers(0.04);
  EXPECT_THROW(HardIqcPartialIntegrals(ms.entry(1).psi, ms.entry(1).m, Eigen::MatrixXd::Zero(5, 1),
                                       Eigen::MatrixXd::Zero(5, 1), 0.01),
               std::invalid_argument);
}

// Linear time-invariant delay: both constraints hold as plain integrals over
// the whole line, checked in the frequency domain.
TEST(DelayIqcTest, FrequencyDomainIntegralsNonnegative) {
  const int n = 1 << 14;
  const double dt = 0.01, theta = 0.1;
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> freq(0.05, 20.0);
  std::vector<double> in(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<double, 8> f, p;
    for (int k = 0; k < 8; ++k) {
      f[k] = freq(rng);
      p[k] = phase(rng);
    }
    // Compactly supported in the first half so the circular shift is linear.
    for (int i = 0; i < n; ++i) {
      const double t = i * dt, span = n * dt / 2;
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += std::sin(f[k] * t + p[k]);
      in[i] = t < span ? s * std::pow(std::sin(std::numbers::pi * t / span), 2) : 0.0;
    }
    fftw_execute(plan);
    double energy = 0.0, iqc1 = 0.0, iqc2 = 0.0;
    for (int k = 0; k <= n / 2; ++k) {
      const double weight = (k == 0 || k == n / 2) ? 1.0 : 2.0;
      const double om = 2 * std::numbers::pi * k / (n * dt);
      const std::complex<double> v(out[k][0], out[k][1]);
      const std::complex<double> shift = std::exp(std::complex<double>(0, -om * theta));
      const std::complex<double> w = (shift - 1.0) * v;
      energy += weight * std::norm(v);
      iqc1 += weight * (std::norm(v) - std::norm(v + w));
      iqc2 += weight * (DelayEta(theta * om) * std::norm(v) - std::norm(w));
    }
    EXPECT_GE(iqc1, -1e-4 * energy);
    EXPECT_GE(iqc2, -1e-4 * energy);
  }
  fftw_destroy_plan(plan);
  fftw_free(out);
}

}  // namespace
}  // namespace diqc
