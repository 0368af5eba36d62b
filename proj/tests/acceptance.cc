// One PASS/FAIL line per acceptance criterion. Exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "diqc/analysis.h"
#include "diqc/cli.h"
#include "diqc/diffsys.h"
#include "diqc/iqc.h"
#include "diqc/linalg.h"
#include "diqc/lti.h"
#include "diqc/model.h"
#include "diqc/sim.h"
#include "diqc/sosp.h"

namespace {

using namespace diqc;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

const std::string kModels = DIQC_MODELS_DIR;

std::string F(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Issued {
  std::string label;
  Certificate cert;
  DelayLoop loop;
  double theta = 0.0;
  SoundnessOptions sim;
};

class Acceptance {
 public:
  explicit Acceptance(fs::path dir) : dir_(std::move(dir)) {}

  void Run(int id, const std::string& title, const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool pass = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      pass = body(detail);
    } catch (const std::exception& e) {
      detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << id << " " << (pass ? "PASS" : "FAIL") << "  " << title << ": "
              << detail << " [" << F("%.1f", secs) << " s]" << std::endl;
    failed_ += !pass;
  }

  int failed() const { return failed_; }
  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  std::vector<Issued> issued;

 private:
  fs::path dir_;
  int failed_ = 0;
};

double Elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Certificate and loop for a certify run driven through the library, as the
// command does it.
Issued Reissue(const std::string& label, const Model& m, const Controller& c,
               const nlohmann::json& doc) {
  Issued i;
  i.label = label;
  i.cert = CertificateFromJson(doc);
  i.theta = doc.at("config").at("theta").get<double>();
  i.loop = BuildSetup(m, c, i.theta).loop;
  i.sim = m.sim;
  i.sim.seed = doc.at("config").at("seed").get<std::uint64_t>();
  return i;
}

bool GainEquivalence(Acceptance& a, std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string model_path = kModels + "/lti_first_order.model";
  Overrides o;
  o.out = a.Path("lti_first_order.cert.json");
  std::ostringstream out, err;
  if (CmdCertify(model_path, o, out, err) != kExitOk) {
    detail = "first-order model not certified: " + err.str();
    return false;
  }
  const auto doc = nlohmann::json::parse(Slurp(o.out));
  const Model m = LoadModel(model_path);
  a.issued.push_back(Reissue("lti_first_order", m, Controller{}, doc));
  const double lag = HinfNorm(StateSpace(MatrixXd::Constant(1, 1, -1.0), MatrixXd::Ones(1, 1),
                                         MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 1)));
  double worst = std::abs(doc.at("alpha").get<double>() - lag) / lag;
  bool all = true;

  GainOptions go;
  go.p_degree = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const StateSpace g = RandomStableLti(seed);
    const NominalSystem ns = LinearNominal(g);
    const GainResult r = MinGain(DifferentiateSystem(ns), MultiplierSet(0, 0), Region{}, go);
    const double oracle = HinfNorm(g);
    all &= r.certified;
    worst = std::max(worst, std::abs(r.cert.alpha - oracle) / oracle);
    if (r.certified) {
      Issued i;
      i.label = "random_lti_" + std::to_string(seed);
      i.cert = r.cert;
      i.loop = NominalDelayLoop(ns);
      i.sim.horizon = 20.0;
      i.sim.seed = seed;
      a.issued.push_back(i);
    }
  }
  const double secs = Elapsed(t0);
  detail = "11 models, max rel error " + F("%.2e", worst) + " (<= 1e-3), " + F("%.2f", secs) +
           " s (<= 30 s)";
  return all && worst <= 1e-3 && secs <= 30.0;
}

bool JetAnchor(Acceptance& a, std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string path = kModels + "/jet.model";
  Overrides o;
  o.theta = 0.0;
  o.out = a.Path("jet.cert.json");
  std::ostringstream out, err;
  const int code = CmdCertify(path, o, out, err);
  const double secs = Elapsed(t0);
  if (code != kExitOk) {
    detail = "exit " + std::to_string(code) + " " + err.str() + out.str();
    return false;
  }
  const auto doc = nlohmann::json::parse(Slurp(o.out));
  const Model m = LoadModel(path);
  Controller c;
  c.type = m.controller;
  c.k = PolyMatrixFromJson(doc.at("controller").at("K"), m.registry().size());
  a.issued.push_back(Reissue("jet theta 0", m, c, doc));
  const double alpha = doc.at("alpha").get<double>();
  detail = "alpha " + F("%.4f", alpha) + " (<= 1.0), " + F("%.2f", secs) + " s (<= 120 s)";
  return alpha <= 1.0 && secs <= 120.0;
}

bool SweepTrend(Acceptance& a, std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string path = kModels + "/jet.model";
  Overrides o;
  o.thetas = {0.0, 0.04, 0.08, 0.12, 0.16};
  o.jobs = 5;
  o.out = a.Path("jet.sweep.csv");
  std::ostringstream out, err;
  const int code = CmdSweep(path, o, out, err);
  const double secs = Elapsed(t0);
  if (code == kExitError) {
    detail = "sweep error: " + err.str();
    return false;
  }
  std::istringstream csv(Slurp(o.out));
  std::string line;
  std::getline(csv, line);
  std::vector<std::pair<double, double>> rows;
  std::string table;
  while (std::getline(csv, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    const double alpha = cols[1] == "inf" ? INFINITY : std::stod(cols[1]);
    rows.emplace_back(std::stod(cols[0]), alpha);
    table += (table.empty() ? "" : " ") + cols[0] + ":" + (cols[1] == "inf" ? "inf" : F("%.4g", alpha));
  }
  bool monotone = true;
  for (size_t i = 1; i < rows.size(); ++i) monotone &= rows[i].second >= rows[i - 1].second;
  const double a0 = rows.front().second, alast = rows.back().second;
  const bool infeasible_last = std::isinf(alast);
  const bool ratio_ok = std::isfinite(alast) && alast / a0 >= 10.0;

  // Certificates issued by the sweep go into the soundness battery.
  const Model m = LoadModel(path);
  Controller c = BuildController(m, ResolveConfig(m, {}));
  for (const auto& [theta, alpha] : rows) {
    if (!std::isfinite(alpha) || theta == 0.0) continue;
    RunConfig cfg = ResolveConfig(m, {});
    cfg.theta = theta;
    const CertifyRun run = Certify(m, c, cfg);
    a.issued.push_back(Reissue("jet theta " + F("%g", theta), m, c, run.document));
  }

  detail = "alpha(theta) " + table + "; nondecreasing " + (monotone ? "yes" : "no") + "; " +
           (ratio_ok ? "ratio " + F("%.1f", alast / a0) + " >= 10"
                     : std::string(infeasible_last ? "infeasible at the largest theta"
                                                   : "ratio " + F("%.2f", alast / a0) + " < 10")) +
           ", " + F("%.2f", secs) + " s (<= 600 s)";
  return monotone && (ratio_ok || infeasible_last) && secs <= 600.0;
}

bool JFactorCheck(std::string& detail) {
  bool all = true;
  for (double theta : {0.04, 0.08}) {
    const CombinedMultiplier c = Combine(DelayMultipliers(theta), Eigen::Vector2d(1.0, 1.0));
    const JFactor f = JSpectralFactorize(c.psi, c.m_lambda, 1, 1);
    const double grid = JFactorGridResidual(c.psi, c.m_lambda, f, LogGrid(1e-3, 1e3, 200));
    const MatrixXd acl = c.psi.A - c.psi.B * f.r.inverse() * (f.x * c.psi.B + f.s).transpose();
    const bool hurwitz = IsHurwitz(acl);
    all &= grid <= 1e-6 && f.are_residual <= 1e-8 && hurwitz;
    detail += (detail.empty() ? "" : "; ") + std::string("theta ") + F("%g", theta) + ": grid " +
              F("%.1e", grid) + ", ARE " + F("%.1e", f.are_residual) + ", closed loop " +
              (hurwitz ? "Hurwitz" : "NOT Hurwitz");
  }
  return all;
}

bool HardIqc(std::string& detail) {
  const double theta = 0.04, dt = 2e-4, horizon = 20.0;
  const int lag = static_cast<int>(std::lround(theta / dt));
  const int n = static_cast<int>(std::lround(horizon / dt)) + 1;
  const CombinedMultiplier c = Combine(DelayMultipliers(theta), Eigen::Vector2d(1.0, 1.0));
  const JFactor f = JSpectralFactorize(c.psi, c.m_lambda, 1, 1);
  double worst = INFINITY;
  for (int s = 0; s < 20; ++s) {
    const BandLimitedSignal sig(1, horizon, 1.0 + s, 500 + s);
    MatrixXd v(n, 1), w(n, 1);
    for (int k = 0; k < n; ++k) v(k, 0) = sig(k * dt)(0);
    for (int k = 0; k < n; ++k) w(k, 0) = (k >= lag ? v(k - lag, 0) : 0.0) - v(k, 0);
    const auto q = HardIqcPartialIntegrals(f.psi_tilde, f.m_tilde, v, w, dt);
    worst = std::min(worst, *std::min_element(q.begin(), q.end()) / sig.Energy());
  }
  detail = "20 signals, min partial integral / energy " + F("%.2e", worst) + " (>= -1e-6)";
  return worst >= -1e-6;
}

bool Soundness(Acceptance& a, std::string& detail) {
  bool all = true;
  int ok = 0;
  double worst_ratio = 0.0;
  std::string bad;
  for (const Issued& i : a.issued) {
    SoundnessOptions so = i.sim;
    so.pairs = 20;
    const SoundnessReport r = CheckSoundness(i.cert, i.loop, i.theta, so);
    worst_ratio = std::max(worst_ratio, r.empirical / i.cert.alpha);
    if (r.ok() && r.pairs_used > 0) {
      ++ok;
    } else {
      all = false;
      bad += " " + i.label;
    }
  }
  detail = std::to_string(ok) + "/" + std::to_string(a.issued.size()) +
           " certificates sound over 20 pairs each, max empirical/alpha " + F("%.3f", worst_ratio) +
           " (<= 1.01)" + (bad.empty() ? "" : "; failing:" + bad);
  return all && !a.issued.empty();
}

bool Friction(std::string& detail) {
  std::vector<Signal> inputs;
  for (int i = 0; i < 5; ++i) inputs.push_back(BandLimitedSignal(1, 20.0, 5.0 * (i + 1), 100 + i));
  inputs.push_back([](double t) { return VectorXd::Constant(1, std::sin(t)); });
  inputs.push_back([](double t) { return VectorXd::Constant(1, t < 5.0 ? 1.0 : -1.0); });
  const auto rows =
      FrictionGainExperiment(1.0, 1.0, 1.0, {1e-1, 1e-2, 1e-3}, inputs, 20.0, 1e-4);
  double worst = 0.0;
  for (const FrictionRow& r : rows) worst = std::max(worst, r.gain);
  detail = std::to_string(rows.size()) + " runs (eps 1e-1, 1e-2, 1e-3), max gain " +
           F("%.6f", worst) + " (<= 0.501)";
  return worst <= 0.5 + 1e-3;
}

bool SosBattery(std::string& detail) {
  double kkt = 0.0;
  bool all = true;
  auto record = [&](const std::string& name, const SdpSolution& s, SdpStatus want) {
    const double r = s.status == SdpStatus::kOptimal
                         ? std::max({s.primal_residual, s.dual_residual, s.gap})
                         : s.ray_residual;
    kkt = std::max(kkt, r);
    all &= s.status == want;
    detail += (detail.empty() ? "" : ", ") + name + " " + StatusName(s.status);
  };
  {
    VarRegistry r({"x"});
    SosProgram p(r);
    p.AddSos(AffinePoly(ParsePolynomial("(x^2 + 1)^2", r)), MonomialBasis({0}, 2, 1));
    record("(x^2+1)^2", p.Solve(), SdpStatus::kOptimal);
  }
  {
    VarRegistry r({"x", "y"});
    SosProgram p(r);
    p.AddSos(AffinePoly(ParsePolynomial("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1", r)),
             MonomialBasis({0, 1}, 3, 2));
    record("Motzkin", p.Solve(), SdpStatus::kPrimalInfeasible);
  }
  for (const auto& [text, want] : {std::pair{"x - 0.5", SdpStatus::kPrimalInfeasible},
                                   std::pair{"x - 2", SdpStatus::kOptimal}}) {
    VarRegistry r({"x"});
    SosProgram p(r);
    AffinePolyMatrix m(1, 1);
    m(0, 0) = ParsePolynomial(text, r);
    p.AddPmi(m, Region{{ParsePolynomial("1 - x^2", r)}, {}});
    record(std::string(text) + " < 0 on |x| <= 1", p.Solve(), want);
  }
  detail += "; max KKT/ray residual " + F("%.1e", kkt) + " (<= 1e-7)";
  return all && kkt <= 1e-7;
}

bool Derivatives(std::string& detail) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto point = [&](int n) {
    VectorXd p(n);
    for (int i = 0; i < n; ++i) p(i) = u(rng);
    return p;
  };
  double worst = 0.0;
  int models = 0;
  auto check = [&](const NominalSystem& ns, const DiffSystem& ds) {
    for (int k = 0; k < 10; ++k) {
      worst = std::max(worst, JacobianFdMismatch(ns, ds, point(ns.registry.size())));
    }
    ++models;
  };

  const Model lag = LoadModel(kModels + "/lti_first_order.model");
  check(lag.nominal, DifferentiateSystem(lag.nominal));
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const NominalSystem ns = LinearNominal(RandomStableLti(seed));
    check(ns, DifferentiateSystem(ns));
  }

  // Jet under its synthesized controller: CcmClosedLoop against the
  // closed-loop field written out by hand.
  const Model jet = LoadModel(kModels + "/jet.model");
  const Controller c = BuildController(jet, ResolveConfig(jet, {}));
  const ControlPlant& p = jet.plant;
  const int nv = p.registry.size();
  NominalSystem ns;
  ns.registry = p.registry;
  ns.x = p.x;
  ns.w = jet.w_vars;
  ns.d = jet.d_vars;
  std::vector<Polynomial> u_cl;
  for (int i = 0; i < c.k.rows(); ++i) {
    Polynomial ki(nv);
    for (int j = 0; j < c.k.cols(); ++j) ki += c.k(i, j) * Polynomial::Variable(p.x[j], nv);
    ns.g.push_back(ki);
    u_cl.push_back(ki + Polynomial::Variable(ns.w[i], nv));
  }
  for (int i = 0; i < static_cast<int>(p.x.size()); ++i) {
    Polynomial fi = p.f[i].Extended(nv);
    for (int j = 0; j < static_cast<int>(u_cl.size()); ++j) fi += p.b(i, j) * u_cl[j];
    for (int j = 0; j < static_cast<int>(ns.d.size()); ++j) {
      fi += p.e(i, j) * Polynomial::Variable(ns.d[j], nv);
    }
    ns.f.push_back(fi);
  }
  for (int i = 0; i < p.c.rows(); ++i) {
    Polynomial hi(nv);
    for (int j = 0; j < p.c.cols(); ++j) hi += p.c(i, j) * Polynomial::Variable(p.x[j], nv);
    for (int j = 0; j < static_cast<int>(u_cl.size()); ++j) hi += p.d(i, j) * u_cl[j];
    ns.h.push_back(hi);
  }
  // A state-dependent gain enters K(x) dx, which is the linearization only
  // when K is constant; the bundled controller is.
  check(ns, CcmClosedLoop(p, c.k, jet.w_vars, jet.d_vars));

  auto rk4_error = [](double h) {
    SimOptions opt;
    opt.h = h;
    opt.horizon = 1.0;
    const Trajectory tr = SimulateOde(
        [](const VectorXd& x, const VectorXd&, double t) {
          return VectorXd::Constant(1, -x(0) + std::sin(t));
        },
        [](const VectorXd& x, const VectorXd&, double) { return x; }, 1,
        [](double) { return VectorXd::Zero(1); }, VectorXd::Ones(1), opt);
    const double exact = 1.5 * std::exp(-1.0) + (std::sin(1.0) - std::cos(1.0)) / 2;
    return std::abs(tr.x(tr.samples() - 1, 0) - exact);
  };
  const double order = std::log2(rk4_error(0.05) / rk4_error(0.025));
  detail = std::to_string(models) + " models x 10 points, max rel mismatch " + F("%.1e", worst) +
           " (<= 1e-5); RK4 observed order " + F("%.3f", order);
  return worst <= 1e-5 && order >= 3.8 && order <= 4.3;
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / "diqc_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Acceptance a(dir);
  a.Run(1, "LTI gain equivalence", [&](std::string& d) { return GainEquivalence(a, d); });
  a.Run(2, "jet-engine anchor", [&](std::string& d) { return JetAnchor(a, d); });
  a.Run(3, "delay sweep trend", [&](std::string& d) { return SweepTrend(a, d); });
  a.Run(4, "J-factorization", JFactorCheck);
  a.Run(5, "hard IQC partial integrals", HardIqc);
  a.Run(6, "certificate soundness vs simulation", [&](std::string& d) { return Soundness(a, d); });
  a.Run(7, "friction differential gain", Friction);
  a.Run(8, "SOS core battery", SosBattery);
  a.Run(9, "numerical derivatives", Derivatives);
  fs::remove_all(dir);
  std::cout << (9 - a.failed()) << "/9 criteria passed" << std::endl;
  return a.failed() == 0 ? 0 : 1;
}
