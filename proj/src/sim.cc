#include "diqc/sim.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace diqc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Largest singular value of the finite-difference Jacobian of x -> field(x).
double LipschitzEstimate(const std::function<VectorXd(const VectorXd&)>& field,
                         const VectorXd& x) {
  const int n = static_cast<int>(x.size());
  const VectorXd f0 = field(x);
  MatrixXd j(f0.size(), n);
  for (int i = 0; i < n; ++i) {
    const double s = 1e-6 * std::max(1.0, std::abs(x(i)));
    VectorXd xp = x;
    xp(i) += s;
    j.col(i) = (field(xp) - f0) / s;
  }
  if (!j.allFinite()) return std::numeric_limits<double>::infinity();
  return Eigen::JacobiSVD<MatrixXd>(j).singularValues()(0);
}

bool Runaway(const VectorXd& x, double limit) {
  return !x.allFinite() || x.cwiseAbs().maxCoeff() > limit;
}

int StepCount(const SimOptions& opt) {
  if (!(opt.h > 0.0) || !(opt.horizon > 0.0)) {
    throw std::invalid_argument("simulation: h and horizon must be positive");
  }
  return static_cast<int>(std::llround(opt.horizon / opt.h));
}

// Ring buffer of v on the grid; v(t) = v(0) for t < 0.
class History {
 public:
  History(int capacity, double h, const VectorXd& v0) : buf_(capacity), h_(h), first_(v0) {
    Push(v0);
  }

  void Push(const VectorXd& v) {
    buf_[count_ % buf_.size()] = v;
    ++count_;
  }

  // Linear interpolation between grid samples; t must not exceed the newest.
  VectorXd At(double t) const {
    if (t <= 0.0) return first_;
    const double pos = t / h_;
    const auto k = static_cast<long>(std::floor(pos));
    if (k >= count_ - 1) return Get(count_ - 1);
    const double frac = pos - static_cast<double>(k);
    return (1.0 - frac) * Get(k) + frac * Get(k + 1);
  }

 private:
  const VectorXd& Get(long k) const {
    if (count_ - k > static_cast<long>(buf_.size())) throw std::logic_error("delay history overrun");
    return buf_[k % buf_.size()];
  }

  std::vector<VectorXd> buf_;
  double h_;
  VectorXd first_;
  long count_ = 0;
};

}  // namespace

Trajectory SimulateDelayLoop(const DelayLoop& loop, double theta, const Signal& d,
                             const VectorXd& x0, const SimOptions& opt) {
  const int steps = StepCount(opt);
  const double h = opt.h;
  if (theta < 0.0) throw std::invalid_argument("SimulateDelayLoop: theta must be >= 0");
  if (theta > 0.0 && h > theta + 1e-15) {
    throw StepSizeError("SimulateDelayLoop: need h <= theta for a positive delay");
  }
  if (x0.size() != loop.nx) throw std::invalid_argument("SimulateDelayLoop: x0 has wrong size");

  const bool delayed = theta > 0.0;
  const int capacity = delayed ? static_cast<int>(std::ceil(theta / h)) + 3 : 1;
  History hist(capacity, h, loop.v(x0, d(0.0), 0.0));
  const VectorXd zero_w = VectorXd::Zero(loop.nv);

  auto w_at = [&](const VectorXd& x, const VectorXd& dt, double t) -> VectorXd {
    if (!delayed) return zero_w;
    return hist.At(t - theta) - loop.v(x, dt, t);
  };
  auto field = [&](const VectorXd& x, double t) -> VectorXd {
    const VectorXd dt = d(t);
    return loop.f(x, w_at(x, dt, t), dt, t);
  };

  Trajectory tr;
  tr.h = h;
  tr.x.resize(steps + 1, loop.nx);
  tr.d.resize(steps + 1, loop.nd);
  tr.e.resize(steps + 1, loop.ne);
  tr.v.resize(steps + 1, loop.nv);

  VectorXd x = x0;
  int k = 0;
  for (;; ++k) {
    const double t = k * h;
    const VectorXd dk = d(t);
    const VectorXd wk = w_at(x, dk, t);
    tr.x.row(k) = x.transpose();
    tr.d.row(k) = dk.transpose();
    tr.e.row(k) = loop.out(x, wk, dk, t).transpose();
    tr.v.row(k) = loop.v(x, dk, t).transpose();
    if (k == steps) break;

    if (opt.lipschitz_every > 0 && k % opt.lipschitz_every == 0) {
      const double lip = LipschitzEstimate([&](const VectorXd& y) { return field(y, t); }, x);
      if (h > 0.1 / lip) {
        std::ostringstream msg;
        msg << "SimulateDelayLoop: h = " << h << " exceeds 0.1 / L = " << 0.1 / lip
            << " at t = " << t;
        throw StepSizeError(msg.str());
      }
    }

    const VectorXd k1 = field(x, t);
    const VectorXd k2 = field(x + 0.5 * h * k1, t + 0.5 * h);
    const VectorXd k3 = field(x + 0.5 * h * k2, t + 0.5 * h);
    const VectorXd k4 = field(x + h * k3, t + h);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (Runaway(x, opt.divergence)) {
      tr.diverged = true;
      tr.message = "state diverged at t = " + std::to_string(t + h);
      break;
    }
    if (delayed) hist.Push(loop.v(x, d(t + h), t + h));
  }
  if (tr.diverged) {
    tr.x.conservativeResize(k + 1, Eigen::NoChange);
    tr.d.conservativeResize(k + 1, Eigen::NoChange);
    tr.e.conservativeResize(k + 1, Eigen::NoChange);
    tr.v.conservativeResize(k + 1, Eigen::NoChange);
  }
  return tr;
}

Trajectory SimulateOde(
    const std::function<VectorXd(const VectorXd&, const VectorXd&, double)>& f,
    const std::function<VectorXd(const VectorXd&, const VectorXd&, double)>& out, int ne,
    const Signal& d, const VectorXd& x0, const SimOptions& opt) {
  const int steps = StepCount(opt);
  const double h = opt.h;
  const VectorXd d0 = d(0.0);
  Trajectory tr;
  tr.h = h;
  tr.x.resize(steps + 1, x0.size());
  tr.d.resize(steps + 1, d0.size());
  tr.e.resize(steps + 1, ne);
  VectorXd x = x0;
  auto field = [&](const VectorXd& y, double t) { return f(y, d(t), t); };
  int k = 0;
  for (;; ++k) {
    const double t = k * h;
    const VectorXd dk = d(t);
    tr.x.row(k) = x.transpose();
    tr.d.row(k) = dk.transpose();
    tr.e.row(k) = out(x, dk, t).transpose();
    if (k == steps) break;
    const VectorXd k1 = field(x, t);
    const VectorXd k2 = field(x + 0.5 * h * k1, t + 0.5 * h);
    const VectorXd k3 = field(x + 0.5 * h * k2, t + 0.5 * h);
    const VectorXd k4 = field(x + h * k3, t + h);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (Runaway(x, opt.divergence)) {
      tr.diverged = true;
      tr.message = "state diverged at t = " + std::to_string(t + h);
      tr.x.conservativeResize(k + 1, Eigen::NoChange);
      tr.d.conservativeResize(k + 1, Eigen::NoChange);
      tr.e.conservativeResize(k + 1, Eigen::NoChange);
      break;
    }
  }
  return tr;
}

DelayLoop NominalDelayLoop(const NominalSystem& ns) {
  ns.Validate();
  for (const Polynomial& g : ns.g) {
    for (int wi : ns.w) {
      if (!g.Differentiate(wi).is_zero()) {
        throw std::invalid_argument("NominalDelayLoop: v = g(x, w, d) must not depend on w");
      }
    }
  }
  const int nreg = ns.registry.size();
  auto point = [ns, nreg](const VectorXd& x, const VectorXd& w, const VectorXd& d) {
    VectorXd p = VectorXd::Zero(nreg);
    for (int i = 0; i < ns.nx(); ++i) p(ns.x[i]) = x(i);
    for (int i = 0; i < ns.nw(); ++i) p(ns.w[i]) = w(i);
    for (int i = 0; i < ns.nd(); ++i) p(ns.d[i]) = d(i);
    return p;
  };
  auto eval = [](const std::vector<Polynomial>& ps, const VectorXd& p) {
    VectorXd r(ps.size());
    for (size_t i = 0; i < ps.size(); ++i) r(i) = ps[i].Evaluate(p);
    return r;
  };
  DelayLoop loop;
  loop.nx = ns.nx();
  loop.nv = ns.nv();
  loop.nd = ns.nd();
  loop.ne = ns.ne();
  const VectorXd wz = VectorXd::Zero(ns.nw());
  loop.v = [=](const VectorXd& x, const VectorXd& d, double) {
    return eval(ns.g, point(x, wz, d));
  };
  loop.f = [=](const VectorXd& x, const VectorXd& w, const VectorXd& d, double) {
    return eval(ns.f, point(x, w, d));
  };
  loop.out = [=](const VectorXd& x, const VectorXd& w, const VectorXd& d, double) {
    return eval(ns.h, point(x, w, d));
  };
  return loop;
}

VectorXd GeodesicControl(const VectorXd& x, const VectorXd& x_star, const VectorXd& u_star,
                         const PolyMatrix& k, const std::vector<int>& xvars, int nodes) {
  if (nodes < 3 || nodes % 2 == 0) {
    throw std::invalid_argument("GeodesicControl: Simpson needs an odd node count >= 3");
  }
  const VectorXd dx = x - x_star;
  if (dx.isZero(0.0)) return u_star;
  int nreg = k.nvars();
  for (int v : xvars) nreg = std::max(nreg, v + 1);
  VectorXd point = VectorXd::Zero(nreg);
  VectorXd acc = VectorXd::Zero(k.rows());
  const int m = nodes - 1;
  for (int i = 0; i <= m; ++i) {
    const double s = static_cast<double>(i) / m;
    const VectorXd g = (1.0 - s) * x_star + s * x;
    for (size_t j = 0; j < xvars.size(); ++j) point(xvars[j]) = g(j);
    const double wgt = (i == 0 || i == m) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += wgt * (k.Evaluate(point) * dx);
  }
  return u_star + acc / (3.0 * m);
}

DelayLoop CcmDelayLoop(const ControlPlant& plant, const PolyMatrix& k) {
  const int nx = static_cast<int>(plant.x.size());
  const int nu = static_cast<int>(plant.b.cols());
  if (k.rows() != nu || k.cols() != nx) {
    throw std::invalid_argument("CcmDelayLoop: gain dimensions do not match the plant");
  }
  const int nreg = plant.registry.size();
  DelayLoop loop;
  loop.nx = nx;
  loop.nv = nu;
  loop.nd = static_cast<int>(plant.e.cols());
  loop.ne = static_cast<int>(plant.c.rows());
  const VectorXd zx = VectorXd::Zero(nx);
  const VectorXd zu = VectorXd::Zero(nu);
  // A constant K integrates exactly; skip the quadrature.
  const bool constant = k.degree() <= 0;
  const MatrixXd k0 = k.Evaluate(VectorXd::Zero(std::max(k.nvars(), nreg)));
  auto kappa = [=](const VectorXd& x) -> VectorXd {
    if (constant) return k0 * x;
    return GeodesicControl(x, zx, zu, k, plant.x);
  };
  loop.v = [=](const VectorXd& x, const VectorXd&, double) { return kappa(x); };
  loop.f = [=](const VectorXd& x, const VectorXd& w, const VectorXd& d, double) {
    VectorXd p = VectorXd::Zero(nreg);
    for (int i = 0; i < nx; ++i) p(plant.x[i]) = x(i);
    VectorXd fx(nx);
    for (int i = 0; i < nx; ++i) fx(i) = plant.f[i].Evaluate(p);
    return VectorXd(fx + plant.b * (kappa(x) + w) + plant.e * d);
  };
  loop.out = [=](const VectorXd& x, const VectorXd& w, const VectorXd&, double) {
    return VectorXd(plant.c * x + plant.d * (kappa(x) + w));
  };
  return loop;
}

BandLimitedSignal::BandLimitedSignal(int channels, double horizon, double energy,
                                     std::uint64_t seed)
    : tones_(channels), horizon_(horizon), seed_(seed) {
  if (channels < 1 || !(horizon > 0.0) || !(energy > 0.0)) {
    throw std::invalid_argument("BandLimitedSignal: bad channels, horizon or energy");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  constexpr int kTones = 8;
  for (auto& ch : tones_) {
    for (int i = 0; i < kTones; ++i) {
      const double omega = 0.01 * std::pow(1000.0, static_cast<double>(i) / (kTones - 1));
      ch.push_back({amp(rng), omega, phase(rng)});
    }
  }
  const double scale = std::sqrt(energy / Energy());
  for (auto& ch : tones_) {
    for (Tone& t : ch) t.amp *= scale;
  }
}

VectorXd BandLimitedSignal::operator()(double t) const {
  VectorXd d(tones_.size());
  for (size_t c = 0; c < tones_.size(); ++c) {
    double s = 0.0;
    for (const Tone& tone : tones_[c]) s += tone.amp * std::sin(tone.omega * t + tone.phase);
    d(c) = s;
  }
  return d;
}

double BandLimitedSignal::Energy() const {
  // int_0^T cos(a t + b) dt
  auto icos = [this](double a, double b) {
    if (std::abs(a) < 1e-14) return horizon_ * std::cos(b);
    return (std::sin(a * horizon_ + b) - std::sin(b)) / a;
  };
  double e = 0.0;
  for (const auto& ch : tones_) {
    for (const Tone& p : ch) {
      for (const Tone& q : ch) {
        e += 0.5 * p.amp * q.amp *
             (icos(p.omega - q.omega, p.phase - q.phase) -
              icos(p.omega + q.omega, p.phase + q.phase));
      }
    }
  }
  return e;
}

EmpiricalGain EmpiricalIncGain(const std::vector<TrajectoryPair>& pairs) {
  EmpiricalGain out;
  for (const TrajectoryPair& p : pairs) {
    if (p.a.samples() != p.b.samples() || p.a.h != p.b.h) {
      throw std::invalid_argument("EmpiricalIncGain: trajectories are not on matching grids");
    }
    const MatrixXd de = p.b.e - p.a.e;
    const MatrixXd dd = p.b.d - p.a.d;
    const int n = p.a.samples();
    const double h = p.a.h;
    double ee = 0.0, ed = 0.0;
    bool used = false;
    for (int k = 1; k < n; ++k) {
      ee += 0.5 * h * (de.row(k - 1).squaredNorm() + de.row(k).squaredNorm());
      ed += 0.5 * h * (dd.row(k - 1).squaredNorm() + dd.row(k).squaredNorm());
      if (ed < 1e-12) continue;
      used = true;
      out.gain = std::max(out.gain, std::sqrt(std::max(0.0, ee - p.bias) / ed));
    }
    if (used) ++out.pairs_used;
  }
  if (out.pairs_used == 0) {
    throw std::invalid_argument("EmpiricalIncGain: every pair has zero disturbance difference");
  }
  return out;
}

FrictionRun SimulateFriction(const FrictionParams& p, const Signal& v, const Signal& dv,
                             double horizon, double h) {
  if (!(p.eps > 0.0) || p.a <= 0.0 || p.b <= 0.0 || p.c < 0.0) {
    throw std::invalid_argument("SimulateFriction: need a, b > 0, c >= 0, eps > 0");
  }
  if (p.eps < 1e-4) throw StepSizeError("SimulateFriction: eps below 1e-4 is not supported");
  if (h * (p.a + p.b + p.c / p.eps) > 2.5) {
    throw StepSizeError("SimulateFriction: step too large for the regularized friction");
  }
  const int steps = static_cast<int>(std::llround(horizon / h));
  auto field = [&](const Eigen::Vector2d& s, double t) {
    const double vt = v(t)(0), dvt = dv(t)(0);
    const double sech = 1.0 / std::cosh(s(0) / p.eps);
    return Eigen::Vector2d(-(p.a + p.b) * s(0) - p.c * std::tanh(s(0) / p.eps) + vt,
                           -(p.a + p.b) * s(1) - p.c / p.eps * sech * sech * s(1) + dvt);
  };
  FrictionRun run;
  run.y.resize(steps + 1);
  run.dy.resize(steps + 1);
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  double num = 0.0, den = 0.0;
  double dv_prev = dv(0.0)(0);
  for (int k = 0;; ++k) {
    const double t = k * h;
    run.y(k) = s(0);
    run.dy(k) = s(1);
    if (k == steps) break;
    const Eigen::Vector2d k1 = field(s, t);
    const Eigen::Vector2d k2 = field(s + 0.5 * h * k1, t + 0.5 * h);
    const Eigen::Vector2d k3 = field(s + 0.5 * h * k2, t + 0.5 * h);
    const Eigen::Vector2d k4 = field(s + h * k3, t + h);
    s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double dv_next = dv(t + h)(0);
    num += 0.5 * h * (run.dy(k) * run.dy(k) + s(1) * s(1));
    den += 0.5 * h * (dv_prev * dv_prev + dv_next * dv_next);
    dv_prev = dv_next;
  }
  run.gain = den > 0.0 ? std::sqrt(num / den) : 0.0;
  return run;
}

std::vector<FrictionRow> FrictionGainExperiment(double a, double b, double c,
                                                const std::vector<double>& eps_list,
                                                const std::vector<Signal>& inputs,
                                                double horizon, double h) {
  std::vector<FrictionRow> rows;
  for (double eps : eps_list) {
    for (size_t i = 0; i < inputs.size(); ++i) {
      const FrictionRun r = SimulateFriction({a, b, c, eps}, inputs[i], inputs[i], horizon, h);
      rows.push_back({eps, static_cast<int>(i), r.gain});
    }
  }
  return rows;
}

std::string TrajectoryCsv(const Trajectory& tr, const std::vector<std::string>& x_names,
                          const std::vector<std::string>& d_names,
                          const std::vector<std::string>& e_names) {
  auto names = [](const std::vector<std::string>& given, const char* prefix, Eigen::Index n) {
    std::vector<std::string> r = given;
    for (auto i = static_cast<Eigen::Index>(r.size()); i < n; ++i) {
      r.push_back(prefix + std::to_string(i + 1));
    }
    return r;
  };
  std::ostringstream os;
  os << "t";
  for (const auto& n : names(x_names, "x", tr.x.cols())) os << ',' << n;
  for (const auto& n : names(d_names, "d", tr.d.cols())) os << ',' << n;
  for (const auto& n : names(e_names, "e", tr.e.cols())) os << ',' << n;
  os << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (int k = 0; k < tr.samples(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", tr.time(k));
    os << buf;
    for (Eigen::Index j = 0; j < tr.x.cols(); ++j) put(tr.x(k, j));
    for (Eigen::Index j = 0; j < tr.d.cols(); ++j) put(tr.d(k, j));
    for (Eigen::Index j = 0; j < tr.e.cols(); ++j) put(tr.e(k, j));
    os << '\n';
  }
  return os.str();
}

void WriteFileAtomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename into " + target.string() + ": " + ec.message());
  }
}

SoundnessReport CheckSoundness(const Certificate& cert, const DelayLoop& loop, double theta,
                               const SoundnessOptions& opt) {
  SoundnessReport rep;
  rep.seed = opt.seed;
  rep.bound = opt.slack * cert.alpha;
  SimOptions so;
  so.h = opt.h;
  so.horizon = opt.horizon;
  const int nreg = cert.registry.size();
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> offset(-0.05, 0.05);

  std::vector<TrajectoryPair> pairs;
  for (int i = 0; i < opt.pairs; ++i) {
    const BandLimitedSignal d0(loop.nd, opt.horizon, opt.energy, opt.seed + 2 * i + 1);
    const BandLimitedSignal d1(loop.nd, opt.horizon, opt.energy, opt.seed + 2 * i + 2);
    // Odd pairs start apart and pay the path-energy bias.
    VectorXd xa = VectorXd::Zero(loop.nx);
    VectorXd xb = VectorXd::Zero(loop.nx);
    if (i % 2 == 1) {
      for (int j = 0; j < loop.nx; ++j) xb(j) = offset(rng);
    }
    TrajectoryPair p;
    p.a = SimulateDelayLoop(loop, theta, d0, xa, so);
    p.b = SimulateDelayLoop(loop, theta, d1, xb, so);
    if (p.a.diverged || p.b.diverged) {
      rep.diverged = true;
      return rep;
    }
    for (const Trajectory* tr : {&p.a, &p.b}) {
      for (int k = 0; k < tr->samples(); ++k) {
        VectorXd pt = VectorXd::Zero(nreg);
        for (size_t j = 0; j < cert.x.size(); ++j) pt(cert.x[j]) = tr->x(k, static_cast<Eigen::Index>(j));
        if (!cert.region.Contains(pt, 1e-9)) rep.stayed_in_region = false;
      }
    }
    if (i % 2 == 1) {
      std::vector<VectorXd> path;
      for (int s = 0; s <= 32; ++s) path.push_back(xa + (xb - xa) * (s / 32.0));
      p.bias = PathEnergy(path, [&](const VectorXd& c) {
        VectorXd pt = VectorXd::Zero(nreg);
        for (size_t j = 0; j < cert.x.size(); ++j) pt(cert.x[j]) = c(static_cast<Eigen::Index>(j));
        return MatrixXd(cert.Storage(pt).topLeftCorner(cert.nx, cert.nx));
      });
    }
    pairs.push_back(std::move(p));
  }
  const EmpiricalGain g = EmpiricalIncGain(pairs);
  rep.empirical = g.gain;
  rep.pairs_used = g.pairs_used;
  return rep;
}

nlohmann::json SoundnessToJson(const SoundnessReport& r, const SoundnessOptions& opt) {
  return {{"empirical_gain", r.empirical},
          {"bound", r.bound},
          {"pairs_used", r.pairs_used},
          {"diverged", r.diverged},
          {"stayed_in_region", r.stayed_in_region},
          {"ok", r.ok()},
          {"manifest",
           {{"pairs", opt.pairs},
            {"horizon", opt.horizon},
            {"h", opt.h},
            {"energy", opt.energy},
            {"seed", opt.seed},
            {"slack", opt.slack},
            {"signal", "8 sinusoids per channel, log-spaced in [0.01, 10] rad/s"}}}};
}

}  // namespace diqc
