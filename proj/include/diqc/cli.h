#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diqc/analysis.h"
#include "diqc/model.h"
#include "diqc/sim.h"

namespace diqc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotCertified = 2;

/// Command-line overrides; unset fields fall back to the model file.
struct Overrides {
  std::optional<double> theta;
  std::optional<int> p_degree;
  std::optional<int> mult_degree;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::string out;
  int jobs = 1;
  std::vector<double> thetas;
};

/// Everything that changes the numbers of a run.
struct RunConfig {
  double theta = 0.0;
  int p_degree = 2;
  int mult_degree = 2;
  std::uint64_t seed = 1;
  double tol = 1e-8;

  nlohmann::json ToJson() const;
  static RunConfig FromJson(const nlohmann::json& j);
};

/// Solver tolerance from DIQC_SOLVER_TOL, if set and valid.
std::optional<double> EnvSolverTol();

/// Precedence: flag, then DIQC_SOLVER_TOL (tol only), then the model.
RunConfig ResolveConfig(const Model& model, const Overrides& o);

/// SHA-256 of the canonical model text and the run configuration.
std::string ConfigHash(const Model& model, const RunConfig& cfg);

struct Controller {
  std::string type;  // "ccm", "static" or "" for nominal models
  PolyMatrix k;
  Eigen::MatrixXd w;
  double synth_alpha = 0.0;
};

/// CCM synthesis or the static gain of a plant model. Throws
/// std::runtime_error when synthesis fails.
Controller BuildController(const Model& model, const RunConfig& cfg);

struct Setup {
  DiffSystem ds;
  MultiplierSet ms{0, 0};
  DelayLoop loop;
};

Setup BuildSetup(const Model& model, const Controller& ctrl, double theta);

struct CertifyRun {
  RunConfig cfg;
  GainResult result;
  double solve_time = 0.0;  // seconds, wall clock
  nlohmann::json document;  // certificate file contents
};

CertifyRun Certify(const Model& model, const Controller& ctrl, const RunConfig& cfg);

/// Exit codes: 0 certified / all checks pass, 2 not certified / a check
/// failed, 1 usage, parse, I/O or solver error.
int CmdCertify(const std::string& model_path, const Overrides& o, std::ostream& out,
               std::ostream& err);
int CmdSweep(const std::string& model_path, const Overrides& o, std::ostream& out,
             std::ostream& err);
int CmdValidate(const std::string& model_path, const std::string& cert_path, const Overrides& o,
                std::ostream& out, std::ostream& err);
int CmdSelftest(std::ostream& out, std::ostream& err);

struct SelftestCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// The deterministic example battery behind `selftest`.
std::vector<SelftestCheck> RunSelftest(double solver_tol);

}  // namespace diqc
