#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "diqc/state_space.h"

namespace diqc {

/// Eigenvalues with real part below -kHurwitzMargin count as stable.
inline constexpr double kHurwitzMargin = 1e-9;

struct SchurForm {
  Eigen::MatrixXd Q;  // orthogonal
  Eigen::MatrixXd T;  // quasi-upper-triangular, A = Q T Q'
  std::vector<std::complex<double>> eigenvalues;  // in diagonal-block order
};

/// Real Schur decomposition A = Q T Q'. Throws std::runtime_error when the
/// QR iteration does not converge.
SchurForm RealSchur(const Eigen::MatrixXd& a);

/// Reorders `schur` in place so that the diagonal blocks whose eigenvalues
/// satisfy `select` lead. Returns the dimension of the leading invariant
/// subspace. Complex pairs are moved as 2x2 blocks.
int ReorderSchur(SchurForm& schur,
                 const std::function<bool(std::complex<double>)>& select);

/// Largest eigenvalue real part.
double SpectralAbscissa(const Eigen::MatrixXd& a);
bool IsHurwitz(const Eigen::MatrixXd& a);

/// Roots of sum_k c[k] s^k (ascending coefficients, leading nonzero).
std::vector<std::complex<double>> PolynomialRoots(const Eigen::VectorXd& c);

class NoStabilizingSolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stabilizing solution of A'X + XA - (XB + S) R^-1 (XB + S)' + Q = 0, i.e.
/// A - B R^-1 (XB + S)' is Hurwitz. R may be indefinite but must be
/// nonsingular. Computed from the ordered Schur form of the Hamiltonian and
/// polished by one Newton step.
Eigen::MatrixXd SolveAre(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                         const Eigen::MatrixXd& s);

/// Frobenius norm of the ARE left-hand side.
double AreResidual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                   const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                   const Eigen::MatrixXd& s, const Eigen::MatrixXd& x);

/// Solves A'X + XA = -F for X (A Hurwitz) by vectorization.
Eigen::MatrixXd SolveLyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& f);

/// Univariate rational function num(s)/den(s), coefficients ascending.
struct RationalFunction {
  Eigen::VectorXd num;
  Eigen::VectorXd den;

  std::complex<double> operator()(std::complex<double> s) const;
};

/// Given even polynomials num(w), den(w) (ascending coefficients in w, odd
/// entries zero) with num >= 0 and den > 0 on the real line, returns a
/// stable, minimum-phase psi with |psi(jw)|^2 = num(w)/den(w).
RationalFunction SpectralFactor(const Eigen::VectorXd& num_even,
                                const Eigen::VectorXd& den_even);

/// Controllable-canonical realization of a proper rational function.
StateSpace Realize(const RationalFunction& g);

/// Largest singular value of a complex matrix.
double MaxSingularValue(const Eigen::MatrixXcd& m);

/// sup_w sigma_max(C (jwI - A)^-1 B + D) to relative accuracy `tol`. Uses
/// the Boyd-Balakrishnan Hamiltonian iteration, seeded and backed up by a
/// refined frequency sweep. Throws std::invalid_argument if A is not Hurwitz.
double HinfNorm(const StateSpace& g, double tol = 1e-8);

}  // namespace diqc
