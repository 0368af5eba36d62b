#include "diqc/sim.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "diqc/iqc.h"

namespace diqc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd Scalar(double v) { return VectorXd::Constant(1, v); }

// x' = a x + k v(t - theta) + d with v = x, e = x.
DelayLoop ScalarDelay(double a, double k) {
  DelayLoop l;
  l.nx = l.nv = l.nd = l.ne = 1;
  l.v = [](const VectorXd& x, const VectorXd&, double) { return x; };
  l.f = [a, k](const VectorXd& x, const VectorXd& w, const VectorXd& d, double) {
    return VectorXd(a * x + k * (x + w) + d);
  };
  l.out = [](const VectorXd& x, const VectorXd&, const VectorXd&, double) { return x; };
  return l;
}

NominalSystem FirstOrderLag() {
  NominalSystem ns;
  ns.registry = VarRegistry({"x", "d"});
  ns.x = {0};
  ns.d = {1};
  ns.f = {ParsePolynomial("-x + d", ns.registry)};
  ns.h = {ParsePolynomial("x", ns.registry)};
  return ns;
}

ControlPlant Jet() {
  ControlPlant p;
  p.registry = VarRegistry({"psi", "phi", "w", "d"});
  p.x = {0, 1};
  p.f = {ParsePolynomial("phi", p.registry),
         ParsePolynomial("-psi - 1.5*phi^2 - 0.5*phi^3", p.registry)};
  p.b = (MatrixXd(2, 1) << 1, 0).finished();
  p.e = (MatrixXd(2, 1) << 0, 1).finished();
  p.c = (MatrixXd(1, 2) << 0, 1).finished();
  p.d = MatrixXd::Constant(1, 1, 0.1);
  return p;
}

TEST(SimulateTest, Rk4IsFourthOrder) {
  // x' = -2x + cos 3t, x(0) = 0.
  auto exact = [](double t) {
    return -2.0 / 13.0 * std::exp(-2.0 * t) + (2.0 * std::cos(3 * t) + 3.0 * std::sin(3 * t)) / 13.0;
  };
  auto f = [](const VectorXd& x, const VectorXd& d, double) { return VectorXd(-2.0 * x + d); };
  auto out = [](const VectorXd& x, const VectorXd&, double) { return x; };
  Signal d = [](double t) { return Scalar(std::cos(3 * t)); };
  double prev = 0.0;
  for (double h : {0.1, 0.05, 0.025, 0.0125}) {
    SimOptions o{.h = h, .horizon = 2.0};
    const Trajectory tr = SimulateOde(f, out, 1, d, Scalar(0.0), o);
    const double err = std::abs(tr.x(tr.samples() - 1, 0) - exact(2.0));
    if (prev > 0.0) EXPECT_GE(prev / err, 12.0) << "h = " << h;
    prev = err;
  }
}

TEST(SimulateTest, StepResponse) {
  const DelayLoop loop = NominalDelayLoop(FirstOrderLag());
  const Trajectory tr = SimulateDelayLoop(loop, 0.0, [](double) { return Scalar(1.0); },
                                          Scalar(0.0), {.h = 1e-3, .horizon = 1.0});
  EXPECT_NEAR(tr.x(tr.samples() - 1, 0), 1.0 - std::exp(-1.0), 1e-6);
  EXPECT_NEAR(tr.x(tr.samples() - 1, 0), 0.632121, 1e-6);
}

TEST(SimulateTest, ZeroDelayMatchesUndelayedIntegrator) {
  const ControlPlant plant = Jet();
  const PolyMatrix k = PolyMatrix::FromNumeric((MatrixXd(1, 2) << -10.0, 32.6).finished());
  const DelayLoop loop = CcmDelayLoop(plant, k);
  const BandLimitedSignal d(1, 10.0, 0.05, 7);
  const SimOptions o{.h = 1e-3, .horizon = 10.0};
  const VectorXd x0 = Eigen::Vector2d(0.1, -0.2);
  const Trajectory a = SimulateDelayLoop(loop, 0.0, d, x0, o);
  const VectorXd w0 = VectorXd::Zero(1);
  const Trajectory b = SimulateOde(
      [&](const VectorXd& x, const VectorXd& dd, double t) { return loop.f(x, w0, dd, t); },
      [&](const VectorXd& x, const VectorXd& dd, double t) { return loop.out(x, w0, dd, t); }, 1, d,
      x0, o);
  ASSERT_EQ(a.samples(), b.samples());
  EXPECT_LE((a.x - b.x).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((a.e - b.e).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SimulateTest, RingBufferMatchesFullHistory) {
  const double h = 1e-3, theta = 37 * h, horizon = 2.0;
  const DelayLoop loop = ScalarDelay(-2.0, 1.0);
  const BandLimitedSignal d(1, horizon, 1.0, 3);
  const Trajectory tr = SimulateDelayLoop(loop, theta, d, Scalar(0.3), {.h = h, .horizon = horizon});

  // Reference: keep every grid value and interpolate the same way.
  std::vector<double> hist{0.3};
  auto past = [&](double t) {
    if (t <= 0.0) return hist[0];
    const double pos = t / h;
    const auto k = static_cast<size_t>(std::floor(pos));
    if (k + 1 >= hist.size()) return hist.back();
    const double fr = pos - k;
    return (1 - fr) * hist[k] + fr * hist[k + 1];
  };
  auto f = [&](double x, double t) { return -2.0 * x + past(t - theta) + d(t)(0); };
  double x = 0.3;
  double worst = 0.0;
  const int steps = static_cast<int>(std::llround(horizon / h));
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const double k1 = f(x, t), k2 = f(x + 0.5 * h * k1, t + 0.5 * h);
    const double k3 = f(x + 0.5 * h * k2, t + 0.5 * h), k4 = f(x + h * k3, t + h);
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    hist.push_back(x);
    worst = std::max(worst, std::abs(x - tr.x(k + 1, 0)));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(SimulateTest, DelayDifferentialEquationByMethodOfSteps) {
  // x' = -x(t - 1), x = 1 on [-1, 0]: x(2) = 1 - 2 + 1/2.
  const Trajectory tr = SimulateDelayLoop(ScalarDelay(0.0, -1.0), 1.0,
                                          [](double) { return Scalar(0.0); }, Scalar(1.0),
                                          {.h = 1e-3, .horizon = 2.0});
  EXPECT_NEAR(tr.x(1000, 0), 0.0, 1e-9);
  EXPECT_NEAR(tr.x(2000, 0), -0.5, 1e-6);
}

TEST(SimulateTest, DivergenceIsReportedNotThrown) {
  DelayLoop loop = ScalarDelay(1.0, 0.0);
  const Trajectory tr = SimulateDelayLoop(loop, 0.0, [](double) { return Scalar(0.0); },
                                          Scalar(1.0), {.h = 1e-2, .horizon = 50.0});
  EXPECT_TRUE(tr.diverged);
  EXPECT_LT(tr.samples(), 5001);
  EXPECT_FALSE(tr.message.empty());
}

TEST(SimulateTest, StepSizeRejections) {
  const Signal zero = [](double) { return Scalar(0.0); };
  EXPECT_THROW(SimulateDelayLoop(ScalarDelay(-1000.0, 0.0), 0.0, zero, Scalar(1.0),
                                 {.h = 1e-3, .horizon = 1.0}),
               StepSizeError);
  EXPECT_THROW(SimulateDelayLoop(ScalarDelay(-1.0, 0.5), 5e-4, zero, Scalar(1.0),
                                 {.h = 1e-3, .horizon = 1.0}),
               StepSizeError);
  EXPECT_NO_THROW(SimulateDelayLoop(ScalarDelay(-1.0, 0.5), 1e-3, zero, Scalar(1.0),
                                    {.h = 1e-3, .horizon = 1.0}));
}

TEST(GeodesicTest, ZeroLengthPath) {
  const VectorXd us = Scalar(0.7);
  const PolyMatrix k = PolyMatrix::FromNumeric(MatrixXd::Constant(1, 2, 3.0));
  const VectorXd x = Eigen::Vector2d(0.4, -1.0);
  EXPECT_EQ(GeodesicControl(x, x, us, k, {0, 1})(0), 0.7);
}

TEST(GeodesicTest, ConstantGainIsExact) {
  const MatrixXd k0 = (MatrixXd(1, 2) << -10.0, 32.6).finished();
  const VectorXd x = Eigen::Vector2d(0.4, -1.0), xs = Eigen::Vector2d(-0.2, 0.5);
  const VectorXd u = GeodesicControl(x, xs, Scalar(0.3), PolyMatrix::FromNumeric(k0), {0, 1});
  EXPECT_NEAR(u(0), 0.3 + (k0 * (x - xs))(0), 1e-12);
}

TEST(GeodesicTest, AffineGainMatchesFineTrapezoid) {
  VarRegistry reg({"a", "b"});
  PolyMatrix k(1, 2);
  k(0, 0) = ParsePolynomial("1 + 2*a - b", reg);
  k(0, 1) = ParsePolynomial("-3 + 0.5*a + 4*b", reg);
  const VectorXd x = Eigen::Vector2d(0.8, -0.3), xs = Eigen::Vector2d(-0.5, 0.9);
  const double simpson = GeodesicControl(x, xs, Scalar(0.0), k, {0, 1})(0);
  const int n = 1000;
  double trap = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    const VectorXd g = (1 - s) * xs + s * x;
    const double val = (k.Evaluate(g) * (x - xs))(0);
    trap += (i == 0 || i == n - 1 ? 0.5 : 1.0) * val / (n - 1);
  }
  EXPECT_NEAR(simpson, trap, 1e-10);
}

TEST(GeodesicTest, QuadraticGainMatchesClosedForm) {
  // K(x) = [x^2], path 0 -> x: int_0^1 (s x)^2 x ds = x^3 / 3.
  VarRegistry reg({"x"});
  PolyMatrix k(1, 1);
  k(0, 0) = ParsePolynomial("x^2", reg);
  EXPECT_NEAR(GeodesicControl(Scalar(1.5), Scalar(0.0), Scalar(0.0), k, {0})(0), 1.125, 1e-12);
  EXPECT_THROW(GeodesicControl(Scalar(1.5), Scalar(0.0), Scalar(0.0), k, {0}, 10),
               std::invalid_argument);
}

TEST(BandLimitedSignalTest, EnergyIsNormalized) {
  const BandLimitedSignal s(2, 50.0, 0.3, 11);
  EXPECT_NEAR(s.Energy(), 0.3, 1e-12);
  double num = 0.0;
  const int n = 200000;
  const double h = 50.0 / n;
  for (int i = 0; i < n; ++i) {
    num += 0.5 * h * (s(i * h).squaredNorm() + s((i + 1) * h).squaredNorm());
  }
  EXPECT_NEAR(num, 0.3, 1e-6);
  const BandLimitedSignal again(2, 50.0, 0.3, 11);
  EXPECT_EQ(s(1.234), again(1.234));
  const BandLimitedSignal other(2, 50.0, 0.3, 12);
  EXPECT_NE(s(1.234), other(1.234));
}

TEST(EmpiricalGainTest, IdenticalPairsAreExcluded) {
  const DelayLoop loop = NominalDelayLoop(FirstOrderLag());
  const SimOptions o{.h = 1e-2, .horizon = 20.0};
  const BandLimitedSignal d0(1, 20.0, 1.0, 1), d1(1, 20.0, 1.0, 2);
  const Trajectory a = SimulateDelayLoop(loop, 0.0, d0, Scalar(0.0), o);
  const Trajectory b = SimulateDelayLoop(loop, 0.0, d1, Scalar(0.0), o);
  const EmpiricalGain base = EmpiricalIncGain({{a, b, 0.0}});
  const EmpiricalGain with_dup = EmpiricalIncGain({{a, b, 0.0}, {a, a, 0.0}});
  EXPECT_EQ(with_dup.pairs_used, 1);
  EXPECT_EQ(with_dup.gain, base.gain);
  EXPECT_THROW(EmpiricalIncGain({{a, a, 0.0}}), std::invalid_argument);
  EXPECT_LE(base.gain, 1.0);
}

TEST(EmpiricalGainTest, LowFrequencySinusoidThroughFirstOrderLag) {
  const DelayLoop loop = NominalDelayLoop(FirstOrderLag());
  const SimOptions o{.h = 1e-2, .horizon = 200.0};
  const Trajectory a =
      SimulateDelayLoop(loop, 0.0, [](double) { return Scalar(0.0); }, Scalar(0.0), o);
  // Start on the steady-state orbit so no transient is charged.
  const double w = 0.02;
  const double gain = 1.0 / std::sqrt(1.0 + w * w);
  const double ph = -std::atan(w);
  const Trajectory b = SimulateDelayLoop(
      loop, 0.0, [w](double t) { return Scalar(std::sin(w * t)); },
      Scalar(gain * std::sin(ph)), o);
  const double bias = std::pow(gain * std::sin(ph), 2);  // storage x^2 at unit gain
  const EmpiricalGain g = EmpiricalIncGain({{a, b, bias}});
  EXPECT_NEAR(g.gain, 1.0, 2e-2);
}

TEST(FrictionTest, DifferentialGainBelowBound) {
  std::vector<Signal> inputs;
  for (int i = 0; i < 5; ++i) {
    const BandLimitedSignal s(1, 20.0, 5.0 * (i + 1), 100 + i);
    inputs.push_back(s);
  }
  const auto rows = FrictionGainExperiment(1.0, 1.0, 1.0, {1e-1, 1e-2, 1e-3}, inputs, 20.0, 1e-3);
  ASSERT_EQ(rows.size(), 15u);
  for (const FrictionRow& r : rows) {
    EXPECT_LE(r.gain, 0.5 + 1e-3) << "eps " << r.eps << " input " << r.input;
    EXPECT_GT(r.gain, 0.0);
  }
}

TEST(FrictionTest, WithoutFrictionTheLagGainIsReached) {
  const Signal v = [](double t) { return Scalar(std::sin(0.01 * t)); };
  const FrictionRun r = SimulateFriction({1.0, 1.0, 0.0, 1e-2}, v, v, 400.0, 1e-2);
  EXPECT_NEAR(r.gain, 0.5, 1e-2);
}

TEST(FrictionTest, ZeroPerturbationStaysZero) {
  const BandLimitedSignal v(1, 10.0, 4.0, 5);
  const FrictionRun r =
      SimulateFriction({1.0, 1.0, 1.0, 1e-2}, v, [](double) { return Scalar(0.0); }, 10.0, 1e-3);
  EXPECT_EQ(r.dy.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(r.y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FrictionTest, VariationalMatchesFiniteDifference) {
  const BandLimitedSignal v(1, 10.0, 20.0, 8);
  const BandLimitedSignal dv(1, 10.0, 1.0, 9);
  const double s = 1e-5;
  const FrictionParams p{1.0, 1.0, 1.0, 1e-1};
  const FrictionRun base = SimulateFriction(p, v, dv, 10.0, 1e-3);
  const Signal vs = [&](double t) { return VectorXd(v(t) + s * dv(t)); };
  const FrictionRun moved = SimulateFriction(p, vs, dv, 10.0, 1e-3);
  const VectorXd fd = (moved.y - base.y) / s;
  EXPECT_LE((fd - base.dy).norm(), 1e-3 * base.dy.norm());
}

TEST(FrictionTest, RefusesTinyRegularization) {
  const Signal v = [](double) { return Scalar(0.0); };
  EXPECT_THROW(SimulateFriction({1.0, 1.0, 1.0, 5e-5}, v, v, 1.0, 1e-3), StepSizeError);
  EXPECT_THROW(SimulateFriction({1.0, 1.0, 1.0, 2e-4}, v, v, 1.0, 1e-3), StepSizeError);
  EXPECT_NO_THROW(SimulateFriction({1.0, 1.0, 1.0, 1e-3}, v, v, 1.0, 1e-3));
}

TEST(ExportTest, CsvAndAtomicWrite) {
  Trajectory tr;
  tr.h = 0.5;
  tr.x = (MatrixXd(2, 2) << 1, 2, 3, 4).finished();
  tr.d = (MatrixXd(2, 1) << 0.25, -1).finished();
  tr.e = (MatrixXd(2, 1) << 7, 8).finished();
  const std::string csv = TrajectoryCsv(tr, {"psi", "phi"});
  EXPECT_EQ(csv, "t,psi,phi,d1,e1\n0,1,2,0.25,7\n0.5,3,4,-1,8\n");

  const auto dir = std::filesystem::temp_directory_path() / "diqc_sim_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "out.csv").string();
  WriteFileAtomic(path, csv);
  WriteFileAtomic(path, csv);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), csv);
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  std::filesystem::remove_all(dir);
}

TEST(SoundnessTest, FirstOrderCertificate) {
  const NominalSystem ns = FirstOrderLag();
  const GainResult r = MinGain(DifferentiateSystem(ns), MultiplierSet(0, 0), Region{},
                               GainOptions{.p_degree = 0});
  ASSERT_TRUE(r.certified) << r.message;
  const SoundnessReport rep = CheckSoundness(r.cert, NominalDelayLoop(ns), 0.0,
                                             {.pairs = 6, .horizon = 20.0, .h = 1e-2});
  EXPECT_TRUE(rep.ok()) << rep.empirical << " vs " << rep.bound;
  EXPECT_GT(rep.empirical, 0.5);
  EXPECT_EQ(rep.pairs_used, 6);
}

TEST(SoundnessTest, JetUnderDelay) {
  const ControlPlant plant = Jet();
  Region region{{ParsePolynomial("1 - phi^2", plant.registry)}, {}};
  const CcmResult c = CcmSynthesize(plant, region, 0, 1.0);
  ASSERT_EQ(c.status, SdpStatus::kOptimal);
  const double theta = 0.04;
  const GainResult r = MinGain(CcmClosedLoop(plant, c.k, {2}, {3}), DelayMultipliers(theta),
                               region, GainOptions{.p_degree = 0});
  ASSERT_TRUE(r.certified) << r.message;
  const SoundnessReport rep =
      CheckSoundness(r.cert, CcmDelayLoop(plant, c.k), theta, {.pairs = 4, .horizon = 20.0});
  EXPECT_TRUE(rep.ok()) << rep.empirical << " vs " << rep.bound << " region "
                        << rep.stayed_in_region;
  EXPECT_GT(rep.empirical, 0.05);
  std::cout << "jet empirical " << rep.empirical << " certified " << r.cert.alpha << "\n";
}

}  // namespace
}  // namespace diqc
