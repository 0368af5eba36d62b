#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "diqc/conic.h"
#include "diqc/diffsys.h"
#include "diqc/iqc.h"
#include "diqc/poly.h"
#include "diqc/sosp.h"

namespace diqc {

/// Max eigenvalue of the evaluated LMI must stay below -kLmiMargin / 2.
inline constexpr double kLmiMargin = 1e-6;

/// Symmetric LMI of size nchi + nw + nd, affine in (P, lambda, gamma):
///   [[P A + A'P + dP, P Bw, P Bd], [Bw'P, 0, 0], [Bd'P, 0, -gamma I]]
///   + [Ce Dew Ded]'[Ce Dew Ded] + sum_k lambda_k [Czk Dzkw Dzkd]' M_k [...].
/// dP = sum_i dP/dx_i f_i requires `f` whenever P is not constant; `xvars`
/// lists the registry indices of the physical state.
AffinePolyMatrix AssembleLmi(const ExtendedSystem& ext, const MultiplierSet& ms,
                             const std::vector<Polynomial>& f, const std::vector<int>& xvars,
                             const AffinePolyMatrix& p, const std::vector<LinExpr>& lambda,
                             const LinExpr& gamma);

struct ResidualReport {
  int samples = 0;
  double lmi_max_eig = 0.0;      // must be <= -kLmiMargin / 2
  double ptilde_min_eig = 0.0;   // P - blockdiag(0, X), must be >= -1e-9
  double storage_min_eig = 0.0;  // P~ + eps I, must be >= eps / 2
  double are_residual = 0.0;     // must be <= 1e-8
  double jfactor_residual = 0.0; // must be <= 1e-6
  bool lmi_ok = false;
  bool ptilde_ok = false;
  bool storage_ok = false;
  bool are_ok = false;
  bool jfactor_ok = false;
  bool ok() const { return lmi_ok && ptilde_ok && storage_ok && are_ok && jfactor_ok; }
};

struct Certificate {
  VarRegistry registry;
  std::vector<int> x;  // registry indices P may depend on
  int nx = 0;
  int npsi = 0;
  PolyMatrix p;               // nchi x nchi
  Eigen::VectorXd lambda;
  double gamma = 0.0;         // alpha^2
  double alpha = 0.0;
  double epsilon = 0.0;       // storage margin in V = d'(P~ + eps I)d
  Region region;
  Eigen::MatrixXd filter_x;   // ARE solution at lambda (npsi x npsi)
  ResidualReport report;
  std::string multiplier_id;
  std::string config_hash;
  unsigned seed = 0;
  int sdp_iterations = 0;
  bool resolved = false;      // P~ >= 0 needed the constrained second pass

  /// P~ + eps I at a registry point.
  Eigen::MatrixXd Storage(const Eigen::VectorXd& point) const;
};

struct GainOptions {
  int p_degree = 2;
  PmiOptions pmi{.mult_deg = 2, .basis_deg = -1, .margin = 1e-5};
  SdpOptions sdp;
  int verify_samples = 200;
  unsigned seed = 1;
  /// Upper bound on every lambda_k; keeps the SDP bounded when a
  /// multiplier weight would otherwise run off to infinity (Theta = 0).
  double lambda_max = 1e3;
};

struct GainResult {
  bool certified = false;
  SdpStatus status = SdpStatus::kMaxIter;
  std::string message;
  Certificate cert;
};

/// Minimizes gamma = alpha^2 over (P(x), lambda, gamma) subject to the LMI
/// being negative definite on `region`, then checks P~ = P - blockdiag(0, X)
/// >= 0 at the optimal lambda, re-solving once with that constraint added
/// when it fails.
GainResult MinGain(const DiffSystem& ds, const MultiplierSet& ms, const Region& region,
                   const GainOptions& opt = {});

/// Re-evaluates a certificate at `n_samples` region points.
ResidualReport VerifyCertificate(const Certificate& cert, const DiffSystem& ds,
                                 const MultiplierSet& ms, int n_samples = 500,
                                 unsigned seed = 1);

/// (int_0^1 sqrt(c_s' M(c) c_s) ds)^2 for a path sampled at an odd number of
/// uniform nodes in s. Derivatives are second-order finite differences,
/// the outer integral composite Simpson. Throws if M is not positive
/// definite at a node.
double PathEnergy(const std::vector<Eigen::VectorXd>& path,
                  const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& metric);
double PathEnergy(const std::vector<Eigen::VectorXd>& path, const Eigen::MatrixXd& metric);

/// Plant x' = f(x) + B u + E d, e = C x + D u for CCM synthesis.
struct ControlPlant {
  VarRegistry registry;
  std::vector<int> x;
  std::vector<Polynomial> f;
  Eigen::MatrixXd b, e, c, d;
};

struct CcmResult {
  SdpStatus status = SdpStatus::kMaxIter;
  std::string message;
  Eigen::MatrixXd w;  // constant dual metric, M = W^-1
  PolyMatrix y;       // K = Y W^-1
  PolyMatrix k;
  double alpha = 0.0; // synthesis bound
};

/// Constant W > 0 and polynomial Y(x) of degree `y_degree` with
///   [[A W + B Y + (.)', E, (C W + D Y)'], [E', -gamma I, 0], [C W + D Y, 0, -I]] < 0
/// on the region, A = df/dx. With target_alpha > 0 the bound is fixed at
/// gamma <= target_alpha^2 and the l1 norm of the Y coefficients is
/// minimized (least-effort controller); otherwise gamma is minimized, which
/// tends to drive the gain up without bound.
/// robust_delta > 0 additionally demands the bound for u = K x + w with any
/// |w| <= robust_delta |K x| (scaled small gain), which buys delay margin.
CcmResult CcmSynthesize(const ControlPlant& plant, const Region& region, int y_degree,
                        double target_alpha = 0.0, double robust_delta = 0.0,
                        const PmiOptions& pmi = {}, const SdpOptions& sdp = {});

/// Closed-loop differential system of the plant under u = k(x) + w with
/// v = k(x): Ax = df/dx + B K, Bxw = B, Bxd = E, Cv = K, Ce = C + D K,
/// Dew = D. `d` and `w` name the disturbance and delay-channel variables;
/// an empty `w` drops the (v, w) channel altogether.
DiffSystem CcmClosedLoop(const ControlPlant& plant, const PolyMatrix& k, const std::vector<int>& w,
                         const std::vector<int>& d);

/// {"rows", "cols", "entries": [{"i", "j", "text", "terms"}]}, zeros omitted.
nlohmann::json PolyMatrixToJson(const PolyMatrix& m, const VarRegistry& reg);
PolyMatrix PolyMatrixFromJson(const nlohmann::json& j, int nvars);

nlohmann::json CertificateToJson(const Certificate& cert);
Certificate CertificateFromJson(const nlohmann::json& j);

}  // namespace diqc
