#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "diqc/state_space.h"

namespace diqc {

/// C (jwI - A)^-1 B + D. Throws std::domain_error when jw is (numerically)
/// an eigenvalue of A.
Eigen::MatrixXcd FreqResponse(const StateSpace& g, double omega);

/// Aggregates systems that share one input vector: block-diagonal A,
/// stacked B, C, D.
StateSpace StackOutputs(const std::vector<StateSpace>& systems);

/// Psi(jw)^* M Psi(jw), Hermitian-symmetrized.
Eigen::MatrixXcd MultiplierFreq(const StateSpace& psi, const Eigen::MatrixXd& m,
                                double omega);

/// The default check grid: 200 log-spaced points in [1e-3, 1e3] plus the
/// endpoints 0 and 1e6 (a proxy for infinity).
std::vector<double> CheckGrid();

/// Log-spaced grid of `n` points in [lo, hi].
std::vector<double> LogGrid(double lo, double hi, int n);

/// Hard factorization (Psi~, diag(I, -I)) of Psi^~ M Psi.
struct JFactor {
  StateSpace psi_tilde;       // same (A, B) as the input filter
  Eigen::MatrixXd m_tilde;    // diag(I_nv, -I_nw)
  Eigen::MatrixXd x;          // stabilizing ARE solution
  Eigen::MatrixXd q, s, r;    // C'MC, C'MD, D'MD
  double are_residual = 0.0;
  /// Pi_vv >= eps I and Pi_ww <= -eps I held on the check grid.
  bool strict_sign_conditions = true;
};

/// J-spectral factorization of the multiplier (psi, m) with channel split
/// (nv, nw). Throws NoStabilizingSolution (see linalg.h) or
/// std::invalid_argument when R = D'MD is singular or has the wrong inertia.
JFactor JSpectralFactorize(const StateSpace& psi, const Eigen::MatrixXd& m, int nv,
                           int nw);

/// max over `grid` of |Psi~^* M~ Psi~ - Psi^* M Psi| / |Psi^* M Psi| (Frobenius).
double JFactorGridResidual(const StateSpace& psi, const Eigen::MatrixXd& m,
                           const JFactor& factor, const std::vector<double>& grid);

/// Seeded random stable model: order 1..max_order, 1..2 inputs and
/// outputs, Gaussian entries, A shifted to spectral abscissa <= -0.2.
StateSpace RandomStableLti(std::uint64_t seed, int max_order = 4);

}  // namespace diqc
