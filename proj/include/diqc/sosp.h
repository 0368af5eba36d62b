#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "diqc/conic.h"
#include "diqc/poly.h"

namespace diqc {

/// Reference to one scalar decision of an SdpProblem: a free variable
/// {kFree, var, 0} or the symmetric entry {block, i, j} with i <= j.
using DecisionRef = std::array<int, 3>;

/// constant + sum_k coeff_k * decision_k
class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double constant) : constant_(constant) {}  // NOLINT
  static LinExpr Decision(const DecisionRef& ref, double coeff = 1.0);

  double constant() const { return constant_; }
  const std::map<DecisionRef, double>& terms() const { return terms_; }
  bool is_zero() const { return constant_ == 0.0 && terms_.empty(); }
  bool is_constant() const { return terms_.empty(); }

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double s);
  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
  friend LinExpr operator*(double s, LinExpr a) { return a *= s; }
  LinExpr operator-() const { return *this * -1.0; }

 private:
  double constant_ = 0.0;
  std::map<DecisionRef, double> terms_;
};

/// Polynomial in the indeterminates whose coefficients are affine in the
/// decisions.
class AffinePoly {
 public:
  using TermMap = std::map<Exponents, LinExpr, GradedLexLess>;

  AffinePoly() = default;
  AffinePoly(const Polynomial& p);  // NOLINT
  AffinePoly(const LinExpr& c);     // NOLINT

  int nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  std::vector<int> Variables() const;

  void AddTerm(const Exponents& e, const LinExpr& c);

  AffinePoly& operator+=(const AffinePoly& o);
  AffinePoly& operator-=(const AffinePoly& o);
  AffinePoly& operator*=(double s);
  friend AffinePoly operator+(AffinePoly a, const AffinePoly& b) { return a += b; }
  friend AffinePoly operator-(AffinePoly a, const AffinePoly& b) { return a -= b; }
  friend AffinePoly operator*(AffinePoly a, double s) { return a *= s; }
  friend AffinePoly operator*(const AffinePoly& a, const Polynomial& p);
  friend AffinePoly operator*(const Polynomial& p, const AffinePoly& a) { return a * p; }
  friend AffinePoly operator*(const LinExpr& c, const Polynomial& p);

  /// Substitutes decision values.
  template <class Lookup>
  Polynomial Substitute(const Lookup& value) const;

 private:
  int nvars_ = 0;
  TermMap terms_;
};

/// Row-major matrix of AffinePoly.
class AffinePolyMatrix {
 public:
  AffinePolyMatrix() = default;
  AffinePolyMatrix(int rows, int cols) : rows_(rows), cols_(cols), e_(rows * cols) {}
  AffinePolyMatrix(const PolyMatrix& m);  // NOLINT

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  AffinePoly& operator()(int i, int j) { return e_[i * cols_ + j]; }
  const AffinePoly& operator()(int i, int j) const { return e_[i * cols_ + j]; }

  AffinePolyMatrix Transpose() const;
  void SetBlock(int r, int c, const AffinePolyMatrix& b);
  int degree() const;
  std::vector<int> Variables() const;

  AffinePolyMatrix& operator+=(const AffinePolyMatrix& o);
  friend AffinePolyMatrix operator+(AffinePolyMatrix a, const AffinePolyMatrix& b) {
    return a += b;
  }
  friend AffinePolyMatrix operator*(const AffinePolyMatrix& a, const PolyMatrix& b);
  friend AffinePolyMatrix operator*(const PolyMatrix& a, const AffinePolyMatrix& b);
  friend AffinePolyMatrix operator*(const LinExpr& c, const PolyMatrix& m);
  friend AffinePolyMatrix operator*(double s, AffinePolyMatrix a);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<AffinePoly> e_;
};

AffinePoly operator*(const LinExpr& c, const Polynomial& p);
AffinePolyMatrix operator*(const LinExpr& c, const PolyMatrix& m);

/// All monomials of total degree <= max_deg in `vars` (registry indices),
/// in graded-lex order. Exponent vectors have length `nvars`.
std::vector<Exponents> MonomialBasis(const std::vector<int>& vars, int max_deg, int nvars);

/// {rho : g_i(rho) >= 0 for all i}. `bounds` holds explicit per-variable
/// boxes used for sampling; univariate generators c - a x^2 also imply one.
struct Region {
  std::vector<Polynomial> generators;
  std::map<int, std::pair<double, double>> bounds;

  bool Contains(const Eigen::VectorXd& point, double tol = 0.0) const;
  /// Sampling box of variable `var`; [-1, 1] when nothing bounds it.
  std::pair<double, double> Box(int var) const;
  /// `n` points uniform in the box hull over `vars`, rejection-filtered by
  /// the generators; other coordinates are 0. Throws if acceptance is too
  /// rare.
  std::vector<Eigen::VectorXd> Sample(const std::vector<int>& vars, int nvars, int n,
                                      unsigned seed) const;
};

struct PmiOptions {
  int mult_deg = 2;     // rho-degree of the S-procedure multipliers
  int basis_deg = -1;   // rho-degree of the main Gram basis; -1 picks the minimum
  double margin = 1e-6; // imposes M <= -margin I
};

/// Builds an SdpProblem from polynomial constraints. Indeterminates live in
/// `registry()`, which grows when PMIs add their auxiliary y variables.
class SosProgram {
 public:
  explicit SosProgram(VarRegistry registry) : registry_(std::move(registry)) {}

  const VarRegistry& registry() const { return registry_; }
  const SdpProblem& problem() const { return problem_; }

  LinExpr NewFree();
  LinExpr NewNonneg();
  /// Fresh n x n PSD block; entries as a symmetric matrix of LinExpr.
  std::vector<std::vector<LinExpr>> NewPsd(int n);
  /// Symmetric n x n matrix with free polynomial entries of degree <= deg in
  /// `vars`.
  AffinePolyMatrix NewSymmetricPolyMatrix(int n, const std::vector<int>& vars, int deg);
  /// rows x cols matrix with free polynomial entries.
  AffinePolyMatrix NewPolyMatrix(int rows, int cols, const std::vector<int>& vars, int deg);
  /// m' G m with a fresh PSD block G over `basis`.
  AffinePoly NewSosPoly(const std::vector<Exponents>& basis);

  /// e == 0.
  void AddEquality(const LinExpr& e);
  /// p = m' G m, G PSD. Throws std::invalid_argument if some monomial of p
  /// is not a product of two basis elements.
  void AddSos(const AffinePoly& p, const std::vector<Exponents>& basis);
  /// M(rho) <= -margin I on the region, through
  ///   -y'My - margin |y|^2 - sum_i sigma_i(rho, y) g_i(rho)  SOS,
  /// sigma_i SOS and quadratic in y.
  void AddPmi(const AffinePolyMatrix& m, const Region& region, const PmiOptions& opt = {});
  void Minimize(const LinExpr& objective);

  SdpSolution Solve(const SdpOptions& options = {}) const;

  static double Value(const LinExpr& e, const SdpSolution& sol);
  static Polynomial Value(const AffinePoly& p, const SdpSolution& sol);
  static PolyMatrix Value(const AffinePolyMatrix& m, const SdpSolution& sol);

 private:
  void AddDecisionCoeffs(int row, const LinExpr& e, double sign);
  std::vector<int> YVars(int n);

  VarRegistry registry_;
  SdpProblem problem_;
  std::vector<int> yvars_;
};

template <class Lookup>
Polynomial AffinePoly::Substitute(const Lookup& value) const {
  Polynomial p(nvars_);
  for (const auto& [e, c] : terms_) {
    double v = c.constant();
    for (const auto& [ref, k] : c.terms()) v += k * value(ref);
    p.AddTerm(e, v);
  }
  return p;
}

}  // namespace diqc
