#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "diqc/analysis.h"
#include "diqc/diffsys.h"
#include "diqc/poly.h"

namespace diqc {

/// Time-indexed input d(t).
using Signal = std::function<Eigen::VectorXd(double)>;

/// Uniform-grid samples; row k of each matrix belongs to t = k h.
struct Trajectory {
  double h = 0.0;
  Eigen::MatrixXd x, d, e, v;
  bool diverged = false;
  std::string message;

  int samples() const { return static_cast<int>(x.rows()); }
  double time(int k) const { return k * h; }
};

class StepSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// x' = f(x, w, d), e = out(x, w, d), v = v(x, d) with the delay channel
/// w = v(t - theta) - v(t).
struct DelayLoop {
  int nx = 0, nv = 0, nd = 0, ne = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& d, double t)> v;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                                const Eigen::VectorXd& d, double t)>
      f, out;
};

struct SimOptions {
  double h = 1e-3;
  double horizon = 50.0;
  int lipschitz_every = 100;    // steps between step-size checks
  double divergence = 1e8;      // |x|_inf beyond this counts as divergence
};

/// RK4 with a ring buffer of v at grid points, linear interpolation in
/// between and constant history v(0) for t < 0. Requires h <= theta unless
/// theta = 0, and h <= 0.1 / L with L a finite-difference Lipschitz estimate
/// of the closed-loop field, checked every `lipschitz_every` steps.
/// Throws StepSizeError; a non-finite or runaway state ends the run with
/// `diverged` set.
Trajectory SimulateDelayLoop(const DelayLoop& loop, double theta, const Signal& d,
                             const Eigen::VectorXd& x0, const SimOptions& opt = {});

/// Plain RK4 for x' = f(x, d(t), t), e = out(x, d(t), t). `v` stays empty.
Trajectory SimulateOde(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>& f,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>& out,
    int ne, const Signal& d, const Eigen::VectorXd& x0, const SimOptions& opt = {});

/// Loop from a polynomial system; g must not depend on w.
DelayLoop NominalDelayLoop(const NominalSystem& ns);

/// u* + int_0^1 K(gamma(s)) gamma_s ds along the straight line from x_star to
/// x (composite Simpson on `nodes` points, odd). `xvars` are the registry
/// indices of the state inside K's variables.
Eigen::VectorXd GeodesicControl(const Eigen::VectorXd& x, const Eigen::VectorXd& x_star,
                                const Eigen::VectorXd& u_star, const PolyMatrix& k,
                                const std::vector<int>& xvars, int nodes = 33);

/// Plant under the delayed geodesic controller around the reference
/// (x*, u*) = (0, 0): u = kappa(x) + w, v = kappa(x), e = C x + D u.
DelayLoop CcmDelayLoop(const ControlPlant& plant, const PolyMatrix& k);

/// Sum of 8 sinusoids per channel, frequencies log-spaced in [0.01, 10],
/// random phases and amplitudes, scaled to the given energy on [0, horizon].
class BandLimitedSignal {
 public:
  BandLimitedSignal(int channels, double horizon, double energy, std::uint64_t seed);
  Eigen::VectorXd operator()(double t) const;
  /// Closed-form int_0^horizon |d|^2 dt.
  double Energy() const;
  std::uint64_t seed() const { return seed_; }

 private:
  struct Tone {
    double amp, omega, phase;
  };
  std::vector<std::vector<Tone>> tones_;
  double horizon_;
  std::uint64_t seed_;
};

struct TrajectoryPair {
  Trajectory a, b;
  double bias = 0.0;  // b(x_a(0), x_b(0))
};

struct EmpiricalGain {
  double gain = 0.0;
  int pairs_used = 0;
};

/// max over pairs and grid times T of
///   sqrt(max(0, |(e1 - e0)_T|^2 - bias) / |(d1 - d0)_T|^2),
/// energies by the trapezoid rule. Times with |(d1 - d0)_T|^2 < 1e-12 are
/// skipped and a pair without any usable time is excluded; throws
/// std::invalid_argument when every pair is excluded.
EmpiricalGain EmpiricalIncGain(const std::vector<TrajectoryPair>& pairs);

struct FrictionParams {
  double a = 1.0, b = 1.0, c = 1.0, eps = 1e-2;
};

struct FrictionRun {
  Eigen::VectorXd y, dy;  // state and variational state on the grid
  double gain = 0.0;      // |dy|_2 / |dv|_2
};

/// y' = -(a + b) y - c tanh(y / eps) + v with its variational equation
/// dy' = -(a + b) dy - (c / eps) sech^2(y / eps) dy + dv, y(0) = dy(0) = 0,
/// RK4. Refuses eps < 1e-4 and h (a + b + c / eps) > 2.5 (StepSizeError).
FrictionRun SimulateFriction(const FrictionParams& p, const Signal& v, const Signal& dv,
                             double horizon, double h);

struct FrictionRow {
  double eps = 0.0;
  int input = 0;
  double gain = 0.0;
};

/// Differential gains for every (eps, input); v = dv = inputs[i].
std::vector<FrictionRow> FrictionGainExperiment(double a, double b, double c,
                                                const std::vector<double>& eps_list,
                                                const std::vector<Signal>& inputs,
                                                double horizon, double h);

/// Header t, x.., d.., e.. (names default to x1, d1, ...).
std::string TrajectoryCsv(const Trajectory& tr, const std::vector<std::string>& x_names = {},
                          const std::vector<std::string>& d_names = {},
                          const std::vector<std::string>& e_names = {});

/// Writes to a sibling temporary file and renames it into place.
void WriteFileAtomic(const std::string& path, const std::string& content);

struct SoundnessOptions {
  int pairs = 20;
  double horizon = 50.0;
  double h = 1e-3;
  double energy = 0.05;  // disturbance energy of each signal
  std::uint64_t seed = 1;
  double slack = 1.01;
};

struct SoundnessReport {
  double empirical = 0.0;
  double bound = 0.0;
  int pairs_used = 0;
  bool diverged = false;
  bool stayed_in_region = true;
  std::uint64_t seed = 0;
  bool ok() const { return !diverged && stayed_in_region && empirical <= bound; }
};

/// Simulates `pairs` disturbance pairs (d0, d1) with the delay at `theta`
/// and compares the empirical incremental gain to slack * cert.alpha. Even
/// pairs start both at 0; odd pairs start 0.05 apart at most and are charged
/// the path energy of the straight segment in the storage metric.
SoundnessReport CheckSoundness(const Certificate& cert, const DelayLoop& loop, double theta,
                               const SoundnessOptions& opt = {});

nlohmann::json SoundnessToJson(const SoundnessReport& r, const SoundnessOptions& opt);

}  // namespace diqc
