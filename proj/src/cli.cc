#include "diqc/cli.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "diqc/diffsys.h"
#include "diqc/iqc.h"
#include "diqc/linalg.h"
#include "diqc/lti.h"
#include "diqc/sosp.h"

namespace diqc {
namespace {

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string Stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

nlohmann::json MatrixJson(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

void CheckTheta(const Model& m, double theta) {
  if (!(theta >= 0.0) || !std::isfinite(theta)) {
    throw std::invalid_argument("theta must be a finite nonnegative number");
  }
  if (m.uncertainty == "none" && theta != 0.0) {
    throw std::invalid_argument("model has no delay uncertainty; theta must be 0");
  }
}

int ReportError(const std::string& path, const std::exception& e, std::ostream& err) {
  if (dynamic_cast<const ModelError*>(&e) != nullptr) {
    err << path << ": " << e.what() << "\n";
  } else {
    err << "error: " << e.what() << "\n";
  }
  return kExitError;
}

std::string RowStatus(const GainResult& r) {
  if (r.certified) return "certified";
  if (r.status != SdpStatus::kOptimal) return StatusName(r.status);
  return "not_certified";
}

}  // namespace

nlohmann::json RunConfig::ToJson() const {
  return {{"theta", theta},
          {"p_degree", p_degree},
          {"mult_degree", mult_degree},
          {"seed", seed},
          {"tol", tol}};
}

RunConfig RunConfig::FromJson(const nlohmann::json& j) {
  RunConfig c;
  c.theta = j.at("theta").get<double>();
  c.p_degree = j.at("p_degree").get<int>();
  c.mult_degree = j.at("mult_degree").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.tol = j.at("tol").get<double>();
  return c;
}

std::optional<double> EnvSolverTol() {
  const char* s = std::getenv("DIQC_SOLVER_TOL");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || !(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("DIQC_SOLVER_TOL is not a positive number: ") + s);
  }
  return v;
}

RunConfig ResolveConfig(const Model& model, const Overrides& o) {
  RunConfig c;
  c.theta = o.theta.value_or(model.theta);
  c.p_degree = o.p_degree.value_or(model.p_degree);
  c.mult_degree = o.mult_degree.value_or(model.mult_degree);
  c.seed = o.seed.value_or(model.seed);
  if (o.tol) {
    c.tol = *o.tol;
  } else if (auto env = EnvSolverTol()) {
    c.tol = *env;
  } else {
    c.tol = model.tol;
  }
  if (c.p_degree < 0 || c.p_degree % 2 != 0) throw std::invalid_argument("p-degree must be even and >= 0");
  if (c.mult_degree < 0) throw std::invalid_argument("mult-degree must be >= 0");
  if (!(c.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  return c;
}

std::string ConfigHash(const Model& model, const RunConfig& cfg) {
  return Sha256Hex(model.canonical + "\n" + cfg.ToJson().dump());
}

Controller BuildController(const Model& model, const RunConfig& cfg) {
  Controller c;
  if (model.kind != "plant") return c;
  c.type = model.controller;
  if (model.controller == "static") {
    c.k = model.gain;
    return c;
  }
  SdpOptions sdp;
  sdp.tol = cfg.tol;
  const CcmResult r = CcmSynthesize(model.plant, model.region, model.y_degree, model.target_alpha,
                                    0.0, PmiOptions{}, sdp);
  if (r.status != SdpStatus::kOptimal) {
    throw std::runtime_error("controller synthesis failed (" + StatusName(r.status) + "): " +
                             r.message);
  }
  c.k = r.k;
  c.w = r.w;
  c.synth_alpha = r.alpha;
  return c;
}

Setup BuildSetup(const Model& model, const Controller& ctrl, double theta) {
  Setup s;
  const bool delay = model.uncertainty == "delay";
  if (delay) s.ms = DelayMultipliers(theta);
  if (model.kind == "plant") {
    s.ds = CcmClosedLoop(model.plant, ctrl.k, delay ? model.w_vars : std::vector<int>{},
                         model.d_vars);
    s.loop = CcmDelayLoop(model.plant, ctrl.k);
  } else {
    s.ds = DifferentiateSystem(model.nominal);
    s.loop = NominalDelayLoop(model.nominal);
  }
  return s;
}

CertifyRun Certify(const Model& model, const Controller& ctrl, const RunConfig& cfg) {
  CheckTheta(model, cfg.theta);
  CertifyRun run;
  run.cfg = cfg;
  const Setup s = BuildSetup(model, ctrl, cfg.theta);
  GainOptions go;
  go.p_degree = cfg.p_degree;
  go.pmi.mult_deg = cfg.mult_degree;
  go.sdp.tol = cfg.tol;
  go.seed = static_cast<unsigned>(cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  run.result = MinGain(s.ds, s.ms, model.region, go);
  run.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.result.cert.config_hash = ConfigHash(model, cfg);

  nlohmann::json& doc = run.document;
  doc = CertificateToJson(run.result.cert);
  doc["model"] = model.name;
  doc["certified"] = run.result.certified;
  doc["config"] = cfg.ToJson();
  nlohmann::json c = {{"type", ctrl.type.empty() ? "none" : ctrl.type}};
  if (model.kind == "plant") {
    c["K"] = PolyMatrixToJson(ctrl.k, model.registry());
    if (ctrl.type == "ccm") {
      c["W"] = MatrixJson(ctrl.w);
      c["synthesis_alpha"] = ctrl.synth_alpha;
    }
  }
  doc["controller"] = c;
  doc["solver"] = {{"status", StatusName(run.result.status)},
                   {"iterations", run.result.cert.sdp_iterations},
                   {"tol", cfg.tol}};
  return run;
}

int CmdCertify(const std::string& model_path, const Overrides& o, std::ostream& out,
               std::ostream& err) {
  try {
    const Model m = LoadModel(model_path);
    const RunConfig cfg = ResolveConfig(m, o);
    CheckTheta(m, cfg.theta);
    const Controller ctrl = BuildController(m, cfg);
    const CertifyRun run = Certify(m, ctrl, cfg);
    const GainResult& r = run.result;
    out << "model " << m.name << ", theta " << cfg.theta << "\n";
    if (ctrl.type == "ccm") {
      out << "controller: ccm, synthesis bound " << Fmt("%.6g", ctrl.synth_alpha) << "\n";
    }
    out << "solver: " << StatusName(r.status) << ", " << r.cert.sdp_iterations << " iterations, "
        << Fmt("%.3f", run.solve_time) << " s\n";
    if (!r.certified) {
      out << "not certified";
      if (!r.message.empty()) out << ": " << r.message;
      out << "\n";
      return kExitNotCertified;
    }
    out << "alpha = " << Fmt("%.10g", r.cert.alpha) << "\n";
    out << "lambda =";
    for (int i = 0; i < r.cert.lambda.size(); ++i) out << " " << Fmt("%.6g", r.cert.lambda(i));
    out << "\n";
    const ResidualReport& rep = r.cert.report;
    out << "residuals: lmi " << Fmt("%.3g", rep.lmi_max_eig) << ", storage "
        << Fmt("%.3g", rep.storage_min_eig) << ", are " << Fmt("%.3g", rep.are_residual)
        << ", jfactor " << Fmt("%.3g", rep.jfactor_residual) << "\n";
    const std::string path = o.out.empty() ? Stem(model_path) + ".cert.json" : o.out;
    WriteFileAtomic(path, run.document.dump(2) + "\n");
    out << "certificate: " << path << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return ReportError(model_path, e, err);
  }
}

int CmdSweep(const std::string& model_path, const Overrides& o, std::ostream& out,
             std::ostream& err) {
  try {
    const Model m = LoadModel(model_path);
    const std::vector<double> thetas = o.thetas.empty() ? m.sweep : o.thetas;
    if (thetas.empty()) {
      err << "usage: no theta values (pass --thetas or set sweep in [analysis])\n";
      return kExitError;
    }
    const RunConfig base = ResolveConfig(m, o);
    for (double t : thetas) CheckTheta(m, t);
    const Controller ctrl = BuildController(m, base);

    struct Row {
      double theta = 0.0, alpha = 0.0, time = 0.0;
      std::string status;
    };
    std::vector<Row> rows(thetas.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i = next++; i < rows.size(); i = next++) {
        RunConfig cfg = base;
        cfg.theta = thetas[i];
        rows[i].theta = thetas[i];
        try {
          const CertifyRun run = Certify(m, ctrl, cfg);
          rows[i].status = RowStatus(run.result);
          rows[i].alpha = run.result.certified ? run.result.cert.alpha
                                               : std::numeric_limits<double>::infinity();
          rows[i].time = run.solve_time;
        } catch (const std::exception& e) {
          rows[i].status = "error";
          rows[i].alpha = std::numeric_limits<double>::infinity();
          err << "theta " << thetas[i] << ": " << e.what() << "\n";
        }
      }
    };
    const int jobs = std::clamp(o.jobs, 1, static_cast<int>(rows.size()));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::string csv = "theta,alpha,solve_time,status\n";
    for (const Row& r : rows) {
      csv += Fmt("%.12g", r.theta) + "," +
             (std::isfinite(r.alpha) ? Fmt("%.17g", r.alpha) : std::string("inf")) + "," +
             Fmt("%.3f", r.time) + "," + r.status + "\n";
    }
    const std::string path = o.out.empty() ? Stem(model_path) + ".sweep.csv" : o.out;
    WriteFileAtomic(path, csv);
    out << csv;

    std::vector<Row> sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Row& a, const Row& b) { return a.theta < b.theta; });
    bool monotone = true;
    for (size_t i = 1; i < sorted.size(); ++i) monotone &= sorted[i].alpha >= sorted[i - 1].alpha;
    out << "alpha nondecreasing in theta: " << (monotone ? "yes" : "no") << "\n";
    const bool all = std::all_of(rows.begin(), rows.end(),
                                 [](const Row& r) { return r.status == "certified"; });
    if (!all) {
      out << "not certified at theta =";
      for (const Row& r : sorted) {
        if (r.status != "certified") out << " " << r.theta;
      }
      out << "\n";
    }
    out << "table: " << path << "\n";
    return all ? kExitOk : kExitNotCertified;
  } catch (const std::exception& e) {
    return ReportError(model_path, e, err);
  }
}

int CmdValidate(const std::string& model_path, const std::string& cert_path, const Overrides& o,
                std::ostream& out, std::ostream& err) {
  try {
    const Model m = LoadModel(model_path);
    std::ifstream in(cert_path, std::ios::binary);
    if (!in) {
      err << "error: cannot read certificate " << cert_path << "\n";
      return kExitError;
    }
    const nlohmann::json doc = nlohmann::json::parse(in);
    const RunConfig cfg = RunConfig::FromJson(doc.at("config"));
    if (ConfigHash(m, cfg) != doc.at("config_hash").get<std::string>()) {
      err << "error: config hash mismatch; the certificate was issued for a different model "
             "or configuration\n";
      return kExitError;
    }
    const Certificate cert = CertificateFromJson(doc);
    Controller ctrl;
    if (m.kind == "plant") {
      ctrl.type = m.controller;
      ctrl.k = PolyMatrixFromJson(doc.at("controller").at("K"), m.registry().size());
    }
    const Setup s = BuildSetup(m, ctrl, cfg.theta);

    bool all = true;
    auto line = [&](bool pass, const std::string& name, const std::string& detail) {
      out << (pass ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
      all &= pass;
    };
    line(doc.value("certified", false), "issued", "certificate marked certified");
    line(std::abs(cert.alpha * cert.alpha - cert.gamma) <= 1e-9 * std::max(1.0, cert.gamma),
         "alpha_gamma", "alpha^2 = gamma");
    const ResidualReport rep =
        VerifyCertificate(cert, s.ds, s.ms, 500, static_cast<unsigned>(cfg.seed));
    line(rep.lmi_ok, "lmi_samples",
         "max eig " + Fmt("%.3g", rep.lmi_max_eig) + " over " + std::to_string(rep.samples) +
             " points");
    line(rep.ptilde_ok, "ptilde_psd", "min eig " + Fmt("%.3g", rep.ptilde_min_eig));
    line(rep.storage_ok, "storage_pd", "min eig " + Fmt("%.3g", rep.storage_min_eig));
    line(rep.are_ok, "are_residual", Fmt("%.3g", rep.are_residual));
    line(rep.jfactor_ok, "jfactor_residual", Fmt("%.3g", rep.jfactor_residual));

    SoundnessOptions so = m.sim;
    so.seed = cfg.seed;
    const SoundnessReport snd = CheckSoundness(cert, s.loop, cfg.theta, so);
    line(!snd.diverged, "sim_bounded", snd.diverged ? "a trajectory diverged" : "no divergence");
    line(snd.stayed_in_region, "sim_region",
         snd.stayed_in_region ? "states stayed in the region" : "a state left the region");
    line(snd.empirical <= snd.bound, "soundness",
         "empirical " + Fmt("%.6g", snd.empirical) + " <= " + Fmt("%.6g", snd.bound) + " over " +
             std::to_string(snd.pairs_used) + " pairs");
    if (!o.out.empty()) {
      Certificate checked = cert;
      checked.report = rep;
      nlohmann::json report = {{"model", m.name},
                               {"certificate", cert_path},
                               {"config_hash", cert.config_hash},
                               {"residuals", CertificateToJson(checked).at("residuals")},
                               {"soundness", SoundnessToJson(snd, so)},
                               {"pass", all}};
      WriteFileAtomic(o.out, report.dump(2) + "\n");
    }
    out << (all ? "all checks passed" : "some checks failed") << "\n";
    return all ? kExitOk : kExitNotCertified;
  } catch (const std::exception& e) {
    return ReportError(model_path, e, err);
  }
}

namespace {

DiffSystem LinearDiff(const StateSpace& g) { return DifferentiateSystem(LinearNominal(g)); }

NominalSystem JetFeedback() {
  NominalSystem ns;
  ns.registry = VarRegistry({"psi", "phi", "w", "d"});
  ns.x = {0, 1};
  ns.w = {2};
  ns.d = {3};
  const auto& r = ns.registry;
  const std::string u = "(-0.5*psi - 2*phi + w)";
  ns.f = {ParsePolynomial("phi + " + u, r), ParsePolynomial("-psi - 1.5*phi^2 - 0.5*phi^3 + d", r)};
  ns.g = {ParsePolynomial("-0.5*psi - 2*phi", r)};
  ns.h = {ParsePolynomial("phi + 0.1*" + u, r)};
  return ns;
}

SdpStatus ScalarPmi(const std::string& text, double tol) {
  VarRegistry r({"x"});
  SosProgram prog(r);
  AffinePolyMatrix a(1, 1);
  a(0, 0) = ParsePolynomial(text, r);
  prog.AddPmi(a, Region{{ParsePolynomial("1 - x^2", r)}, {}});
  return prog.Solve({.tol = tol}).status;
}

}  // namespace

std::vector<SelftestCheck> RunSelftest(double tol) {
  std::vector<SelftestCheck> out;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    out.push_back({name, pass, detail});
  };
  auto guarded = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add(name, false, std::string("threw: ") + e.what());
    }
  };

  guarded("jacobian_fd", [&] {
    const NominalSystem ns = JetFeedback();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd p(4);
      for (int i = 0; i < 4; ++i) p(i) = u(rng);
      worst = std::max(worst, JacobianFdMismatch(ns, p));
    }
    add("jacobian_fd", worst <= 1e-5, "max rel mismatch " + Fmt("%.2e", worst));
  });

  guarded("hinf_first_order", [&] {
    const double n = HinfNorm(StateSpace(Eigen::MatrixXd::Constant(1, 1, -1.0),
                                         Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                                         Eigen::MatrixXd::Zero(1, 1)));
    add("hinf_first_order", std::abs(n - 1.0) <= 1e-6, "norm " + Fmt("%.10f", n));
  });

  guarded("sos_square", [&] {
    VarRegistry r({"x"});
    SosProgram prog(r);
    prog.AddSos(AffinePoly(ParsePolynomial("(x^2 + 1)^2", r)), MonomialBasis({0}, 2, 1));
    const SdpSolution s = prog.Solve({.tol = tol});
    const double kkt = std::max({s.primal_residual, s.dual_residual, s.gap});
    add("sos_square", s.status == SdpStatus::kOptimal && kkt <= 1e-7,
        StatusName(s.status) + ", kkt " + Fmt("%.2e", kkt));
  });

  guarded("sos_motzkin", [&] {
    VarRegistry r({"x", "y"});
    SosProgram prog(r);
    prog.AddSos(AffinePoly(ParsePolynomial("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1", r)),
                MonomialBasis({0, 1}, 3, 2));
    const SdpStatus st = prog.Solve({.tol = tol}).status;
    add("sos_motzkin", st == SdpStatus::kPrimalInfeasible, StatusName(st));
  });

  guarded("region_pmi", [&] {
    const SdpStatus a = ScalarPmi("x - 0.5", tol), b = ScalarPmi("x - 2", tol);
    add("region_pmi", a == SdpStatus::kPrimalInfeasible && b == SdpStatus::kOptimal,
        "x - 0.5: " + StatusName(a) + ", x - 2: " + StatusName(b));
  });

  GainOptions go;
  go.p_degree = 0;
  go.sdp.tol = tol;
  auto gain_check = [&](const std::string& name, const StateSpace& g) {
    guarded(name, [&] {
      const double oracle = HinfNorm(g);
      const GainResult r = MinGain(LinearDiff(g), MultiplierSet(0, 0), Region{}, go);
      const double rel = std::abs(r.cert.alpha - oracle) / oracle;
      add(name, r.certified && rel <= 1e-3,
          "alpha " + Fmt("%.8f", r.cert.alpha) + " vs hinf " + Fmt("%.8f", oracle) + ", rel " +
              Fmt("%.2e", rel));
    });
  };
  gain_check("gain_first_order",
             StateSpace(Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::MatrixXd::Ones(1, 1),
                        Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1)));
  for (int seed = 1; seed <= 5; ++seed) {
    gain_check("gain_random_lti_" + std::to_string(seed), RandomStableLti(seed));
  }

  guarded("rk4_order", [&] {
    auto err_at = [](double h) {
      SimOptions opt;
      opt.h = h;
      opt.horizon = 1.0;
      const Trajectory tr = SimulateOde(
          [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double t) {
            return Eigen::VectorXd::Constant(1, -x(0) + std::sin(t));
          },
          [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) { return x; }, 1,
          [](double) { return Eigen::VectorXd::Zero(1); }, Eigen::VectorXd::Ones(1), opt);
      // x(t) = 1.5 e^-t + (sin t - cos t) / 2
      const double exact = 1.5 * std::exp(-1.0) + (std::sin(1.0) - std::cos(1.0)) / 2;
      return std::abs(tr.x(tr.samples() - 1, 0) - exact);
    };
    const double order = std::log2(err_at(0.05) / err_at(0.025));
    add("rk4_order", order >= 3.8 && order <= 4.3, "observed order " + Fmt("%.3f", order));
  });

  guarded("step_response", [&] {
    const DelayLoop loop = NominalDelayLoop(LinearNominal(
        StateSpace(Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::MatrixXd::Ones(1, 1),
                   Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1))));
    SimOptions opt;
    opt.horizon = 1.0;
    const Trajectory tr = SimulateDelayLoop(
        loop, 0.0, [](double) { return Eigen::VectorXd::Ones(1); }, Eigen::VectorXd::Zero(1), opt);
    const double x1 = tr.x(tr.samples() - 1, 0);
    add("step_response", std::abs(x1 - (1.0 - std::exp(-1.0))) <= 1e-9,
        "x(1) = " + Fmt("%.12f", x1));
  });

  guarded("friction_gain", [&] {
    const std::vector<Signal> inputs = {
        [](double t) { return Eigen::VectorXd::Constant(1, std::sin(t)); },
        [](double t) { return Eigen::VectorXd::Constant(1, std::sin(0.1 * t) + 0.5 * std::sin(3 * t)); }};
    const auto rows = FrictionGainExperiment(1.0, 1.0, 1.0, {1e-1, 1e-2}, inputs, 20.0, 1e-3);
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.gain);
    add("friction_gain", worst <= 0.5 + 1e-3, "max gain " + Fmt("%.6f", worst));
  });
  return out;
}

int CmdSelftest(std::ostream& out, std::ostream& err) {
  try {
    const double tol = EnvSolverTol().value_or(1e-8);
    const auto checks = RunSelftest(tol);
    int failed = 0;
    for (const auto& c : checks) {
      out << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
      failed += !c.pass;
    }
    out << checks.size() - failed << "/" << checks.size() << " passed (solver tol "
        << Fmt("%.1e", tol) << ")\n";
    return failed == 0 ? kExitOk : kExitNotCertified;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace diqc
