#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace diqc {

/// Ordered, append-only list of indeterminate names. Indices are stable for
/// the lifetime of the registry.
class VarRegistry {
 public:
  VarRegistry() = default;
  explicit VarRegistry(const std::vector<std::string>& names);

  /// Appends a new name and returns its index. Throws on duplicates.
  int Add(const std::string& name);
  /// Returns the index of `name`, or -1 if it is not registered.
  int Find(std::string_view name) const;
  /// Like Find() but throws std::out_of_range for unknown names.
  int IndexOf(std::string_view name) const;

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

using Exponents = std::vector<int>;

int TotalDegree(const Exponents& e);

// Graded order: total degree first, then the monomial with the larger
// exponent in the earliest differing variable comes first. Gives
// 1, x, y, x^2, xy, y^2, ...
struct GradedLexLess {
  bool operator()(const Exponents& a, const Exponents& b) const;
};

/// Sparse multivariate polynomial with real coefficients over the first
/// nvars() indeterminates of some registry. Binary operations zero-extend the
/// operand with fewer variables, so polynomials built before a registry grew
/// remain compatible with later ones.
class Polynomial {
 public:
  using TermMap = std::map<Exponents, double, GradedLexLess>;

  Polynomial() = default;
  explicit Polynomial(int nvars) : nvars_(nvars) {}

  static Polynomial Constant(double c, int nvars = 0);
  static Polynomial Variable(int index, int nvars);
  static Polynomial Monomial(const Exponents& exponents, double coeff = 1.0);

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  /// Maximum total degree over terms; 0 for the zero polynomial.
  int degree() const;
  /// Maximum total degree counting only the listed variables.
  int DegreeIn(std::span<const int> vars) const;
  /// Indices of variables that appear with positive exponent.
  std::vector<int> Variables() const;
  const TermMap& terms() const { return terms_; }
  double coeff(const Exponents& e) const;

  /// Adds c * monomial(e). Terms that cancel to exactly zero are removed.
  void AddTerm(const Exponents& e, double c);

  /// Same polynomial over a registry of `nvars` >= nvars() variables.
  Polynomial Extended(int nvars) const;

  /// Evaluates with Neumaier-compensated summation. `point` must cover at
  /// least nvars() variables.
  double Evaluate(std::span<const double> point) const;
  double Evaluate(const Eigen::VectorXd& point) const {
    return Evaluate(std::span<const double>(point.data(), point.size()));
  }

  /// Exact partial derivative with respect to variable `var`.
  Polynomial Differentiate(int var) const;

  /// Drops terms with |coeff| <= tol.
  Polynomial Pruned(double tol) const;

  std::string ToString(const VarRegistry& registry) const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);
  Polynomial operator-() const;

  friend Polynomial operator+(Polynomial a, const Polynomial& b) {
    a += b;
    return a;
  }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) {
    a -= b;
    return a;
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(Polynomial a, double s) {
    a *= s;
    return a;
  }
  friend Polynomial operator*(double s, Polynomial a) {
    a *= s;
    return a;
  }
  friend bool operator==(const Polynomial& a, const Polynomial& b);

 private:
  void Grow(int nvars);

  int nvars_ = 0;
  TermMap terms_;
};

/// Dense matrix of polynomials, row-major.
class PolyMatrix {
 public:
  PolyMatrix() = default;
  PolyMatrix(int rows, int cols);

  static PolyMatrix Zero(int rows, int cols) { return PolyMatrix(rows, cols); }
  static PolyMatrix Identity(int n);
  static PolyMatrix FromNumeric(const Eigen::MatrixXd& m);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Polynomial& operator()(int i, int j) { return entries_[i * cols_ + j]; }
  const Polynomial& operator()(int i, int j) const {
    return entries_[i * cols_ + j];
  }

  bool IsSymmetric() const;
  int degree() const;
  int nvars() const;
  std::vector<int> Variables() const;

  Eigen::MatrixXd Evaluate(std::span<const double> point) const;
  Eigen::MatrixXd Evaluate(const Eigen::VectorXd& point) const {
    return Evaluate(std::span<const double>(point.data(), point.size()));
  }

  PolyMatrix Transpose() const;
  PolyMatrix Block(int r, int c, int nr, int nc) const;
  void SetBlock(int r, int c, const PolyMatrix& block);
  PolyMatrix Differentiate(int var) const;

  PolyMatrix& operator+=(const PolyMatrix& other);
  PolyMatrix& operator-=(const PolyMatrix& other);
  friend PolyMatrix operator+(PolyMatrix a, const PolyMatrix& b) {
    a += b;
    return a;
  }
  friend PolyMatrix operator-(PolyMatrix a, const PolyMatrix& b) {
    a -= b;
    return a;
  }
  friend PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b);
  friend PolyMatrix operator*(const Eigen::MatrixXd& a, const PolyMatrix& b);
  friend PolyMatrix operator*(const PolyMatrix& a, const Eigen::MatrixXd& b);
  friend PolyMatrix operator*(double s, PolyMatrix a);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Polynomial> entries_;
};

/// Jacobian of `field` with respect to `vars`: entry (i, j) is
/// d field_i / d x_{vars_j}. Throws on empty inputs.
PolyMatrix Jacobian(const std::vector<Polynomial>& field,
                    const std::vector<int>& vars);

/// y' M y as a polynomial in (rho, y). M must be symmetric and its
/// indeterminates disjoint from `yvars`.
Polynomial ScalarizeQuadratic(const PolyMatrix& m, const std::vector<int>& yvars);

/// Thrown for malformed polynomial text; `column` is 1-based.
class PolyParseError : public std::runtime_error {
 public:
  PolyParseError(const std::string& what, int column)
      : std::runtime_error(what), column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

/// Parses the model-file expression language:
///   expr   := ['+'|'-'] term (('+'|'-') term)*
///   term   := factor (['*'] factor)*
///   factor := number | name ['^' int] | '(' expr ')' ['^' int]
/// Whitespace is insignificant. Names must exist in `registry`.
Polynomial ParsePolynomial(std::string_view text, const VarRegistry& registry);

}  // namespace diqc
