#include "diqc/poly.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace diqc {

VarRegistry::VarRegistry(const std::vector<std::string>& names) {
  for (const auto& n : names) Add(n);
}

int VarRegistry::Add(const std::string& name) {
  if (Find(name) >= 0) {
    throw std::invalid_argument("duplicate variable name '" + name + "'");
  }
  names_.push_back(name);
  return size() - 1;
}

int VarRegistry::Find(std::string_view name) const {
  for (int i = 0; i < size(); ++i) {
    if (names_[i] == name) return i;
  }
  return -1;
}

int VarRegistry::IndexOf(std::string_view name) const {
  const int i = Find(name);
  if (i < 0) throw std::out_of_range("unknown variable '" + std::string(name) + "'");
  return i;
}

int TotalDegree(const Exponents& e) {
  int d = 0;
  for (int v : e) d += v;
  return d;
}

bool GradedLexLess::operator()(const Exponents& a, const Exponents& b) const {
  const int da = TotalDegree(a);
  const int db = TotalDegree(b);
  if (da != db) return da < db;
  const size_t n = std::max(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    const int ea = i < a.size() ? a[i] : 0;
    const int eb = i < b.size() ? b[i] : 0;
    if (ea != eb) return ea > eb;
  }
  return false;
}

Polynomial Polynomial::Constant(double c, int nvars) {
  Polynomial p(nvars);
  p.AddTerm(Exponents(nvars, 0), c);
  return p;
}

Polynomial Polynomial::Variable(int index, int nvars) {
  if (index < 0 || index >= nvars) {
    throw std::out_of_range("variable index out of range");
  }
  Exponents e(nvars, 0);
  e[index] = 1;
  return Monomial(e, 1.0);
}

Polynomial Polynomial::Monomial(const Exponents& exponents, double coeff) {
  Polynomial p(static_cast<int>(exponents.size()));
  p.AddTerm(exponents, coeff);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, TotalDegree(e));
  return d;
}

int Polynomial::DegreeIn(std::span<const int> vars) const {
  int d = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int v : vars) {
      if (v < nvars_) s += e[v];
    }
    d = std::max(d, s);
  }
  return d;
}

std::vector<int> Polynomial::Variables() const {
  std::vector<int> used;
  for (int v = 0; v < nvars_; ++v) {
    for (const auto& [e, c] : terms_) {
      if (e[v] > 0) {
        used.push_back(v);
        break;
      }
    }
  }
  return used;
}

double Polynomial::coeff(const Exponents& e) const {
  Exponents key = e;
  key.resize(nvars_, 0);
  for (size_t i = nvars_; i < e.size(); ++i) {
    if (e[i] != 0) return 0.0;
  }
  auto it = terms_.find(key);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::Grow(int nvars) {
  if (nvars <= nvars_) return;
  TermMap grown;
  for (const auto& [e, c] : terms_) {
    Exponents k = e;
    k.resize(nvars, 0);
    grown.emplace(std::move(k), c);
  }
  terms_ = std::move(grown);
  nvars_ = nvars;
}

void Polynomial::AddTerm(const Exponents& e, double c) {
  if (c == 0.0) return;
  for (int v : e) {
    if (v < 0) throw std::invalid_argument("negative exponent");
  }
  int n = static_cast<int>(e.size());
  // Trailing zeros beyond nvars_ do not force growth.
  while (n > nvars_ && e[n - 1] == 0) --n;
  Grow(n);
  Exponents key(e.begin(), e.begin() + std::min<size_t>(e.size(), nvars_));
  key.resize(nvars_, 0);
  auto [it, inserted] = terms_.emplace(std::move(key), c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial Polynomial::Extended(int nvars) const {
  Polynomial p = *this;
  p.Grow(nvars);
  return p;
}

double Polynomial::Evaluate(std::span<const double> point) const {
  if (static_cast<int>(point.size()) < nvars_) {
    throw std::invalid_argument("polynomial evaluation: point has " +
                                std::to_string(point.size()) +
                                " entries, polynomial needs " +
                                std::to_string(nvars_));
  }
  double sum = 0.0;
  double comp = 0.0;
  for (const auto& [e, c] : terms_) {
    double t = c;
    for (int v = 0; v < nvars_; ++v) {
      for (int k = 0; k < e[v]; ++k) t *= point[v];
    }
    const double s = sum + t;
    if (std::abs(sum) >= std::abs(t)) {
      comp += (sum - s) + t;
    } else {
      comp += (t - s) + sum;
    }
    sum = s;
  }
  return sum + comp;
}

Polynomial Polynomial::Differentiate(int var) const {
  Polynomial d(nvars_);
  if (var < 0) throw std::out_of_range("negative variable index");
  if (var >= nvars_) return d;
  for (const auto& [e, c] : terms_) {
    if (e[var] == 0) continue;
    Exponents k = e;
    k[var] -= 1;
    d.AddTerm(k, c * e[var]);
  }
  return d;
}

Polynomial Polynomial::Pruned(double tol) const {
  Polynomial p(nvars_);
  for (const auto& [e, c] : terms_) {
    if (std::abs(c) > tol) p.AddTerm(e, c);
  }
  return p;
}

std::string Polynomial::ToString(const VarRegistry& registry) const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [e, c] : terms_) {
    double mag = c;
    if (first) {
      if (c < 0) {
        os << "-";
        mag = -c;
      }
    } else {
      os << (c < 0 ? " - " : " + ");
      mag = std::abs(c);
    }
    first = false;
    const bool constant = TotalDegree(e) == 0;
    bool wrote = false;
    if (constant || mag != 1.0) {
      os << mag;
      wrote = true;
    }
    for (int v = 0; v < nvars_; ++v) {
      if (e[v] == 0) continue;
      if (wrote) os << "*";
      os << (v < registry.size() ? registry.name(v) : "_v" + std::to_string(v));
      if (e[v] > 1) os << "^" << e[v];
      wrote = true;
    }
  }
  return os.str();
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  Grow(other.nvars_);
  for (const auto& [e, c] : other.terms_) AddTerm(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  Grow(other.nvars_);
  for (const auto& [e, c] : other.terms_) AddTerm(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

Polynomial Polynomial::operator-() const {
  Polynomial p = *this;
  p *= -1.0;
  return p;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  const int n = std::max(a.nvars_, b.nvars_);
  Polynomial p(n);
  Exponents k(n, 0);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      for (int v = 0; v < n; ++v) {
        k[v] = (v < a.nvars_ ? ea[v] : 0) + (v < b.nvars_ ? eb[v] : 0);
      }
      p.AddTerm(k, ca * cb);
    }
  }
  return p;
}

bool operator==(const Polynomial& a, const Polynomial& b) {
  const int n = std::max(a.nvars_, b.nvars_);
  const Polynomial ea = a.Extended(n);
  const Polynomial eb = b.Extended(n);
  return ea.terms_ == eb.terms_;
}

PolyMatrix::PolyMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), entries_(static_cast<size_t>(rows) * cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("negative dimension");
}

PolyMatrix PolyMatrix::Identity(int n) {
  PolyMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = Polynomial::Constant(1.0);
  return m;
}

PolyMatrix PolyMatrix::FromNumeric(const Eigen::MatrixXd& a) {
  PolyMatrix m(static_cast<int>(a.rows()), static_cast<int>(a.cols()));
  for (int i = 0; i < m.rows_; ++i) {
    for (int j = 0; j < m.cols_; ++j) m(i, j) = Polynomial::Constant(a(i, j));
  }
  return m;
}

bool PolyMatrix::IsSymmetric() const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i) {
    for (int j = i + 1; j < cols_; ++j) {
      if (!((*this)(i, j) - (*this)(j, i)).is_zero()) return false;
    }
  }
  return true;
}

int PolyMatrix::degree() const {
  int d = 0;
  for (const auto& p : entries_) d = std::max(d, p.degree());
  return d;
}

int PolyMatrix::nvars() const {
  int n = 0;
  for (const auto& p : entries_) n = std::max(n, p.nvars());
  return n;
}

std::vector<int> PolyMatrix::Variables() const {
  std::set<int> used;
  for (const auto& p : entries_) {
    for (int v : p.Variables()) used.insert(v);
  }
  return {used.begin(), used.end()};
}

Eigen::MatrixXd PolyMatrix::Evaluate(std::span<const double> point) const {
  Eigen::MatrixXd m(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).Evaluate(point);
  }
  return m;
}

PolyMatrix PolyMatrix::Transpose() const {
  PolyMatrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

PolyMatrix PolyMatrix::Block(int r, int c, int nr, int nc) const {
  if (r < 0 || c < 0 || r + nr > rows_ || c + nc > cols_) {
    throw std::out_of_range("PolyMatrix::Block out of range");
  }
  PolyMatrix b(nr, nc);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nc; ++j) b(i, j) = (*this)(r + i, c + j);
  }
  return b;
}

void PolyMatrix::SetBlock(int r, int c, const PolyMatrix& block) {
  if (r < 0 || c < 0 || r + block.rows_ > rows_ || c + block.cols_ > cols_) {
    throw std::out_of_range("PolyMatrix::SetBlock out of range");
  }
  for (int i = 0; i < block.rows_; ++i) {
    for (int j = 0; j < block.cols_; ++j) (*this)(r + i, c + j) = block(i, j);
  }
}

PolyMatrix PolyMatrix::Differentiate(int var) const {
  PolyMatrix d(rows_, cols_);
  for (size_t k = 0; k < entries_.size(); ++k) {
    d.entries_[k] = entries_[k].Differentiate(var);
  }
  return d;
}

PolyMatrix& PolyMatrix::operator+=(const PolyMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw std::invalid_argument("PolyMatrix dimension mismatch in +");
  }
  for (size_t k = 0; k < entries_.size(); ++k) entries_[k] += other.entries_[k];
  return *this;
}

PolyMatrix& PolyMatrix::operator-=(const PolyMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw std::invalid_argument("PolyMatrix dimension mismatch in -");
  }
  for (size_t k = 0; k < entries_.size(); ++k) entries_[k] -= other.entries_[k];
  return *this;
}

PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b) {
  if (a.cols_ != b.rows_) {
    throw std::invalid_argument("PolyMatrix dimension mismatch in *");
  }
  PolyMatrix m(a.rows_, b.cols_);
  for (int i = 0; i < a.rows_; ++i) {
    for (int j = 0; j < b.cols_; ++j) {
      Polynomial s;
      for (int k = 0; k < a.cols_; ++k) {
        if (a(i, k).is_zero() || b(k, j).is_zero()) continue;
        s += a(i, k) * b(k, j);
      }
      m(i, j) = std::move(s);
    }
  }
  return m;
}

PolyMatrix operator*(const Eigen::MatrixXd& a, const PolyMatrix& b) {
  if (a.cols() != b.rows_) {
    throw std::invalid_argument("PolyMatrix dimension mismatch in *");
  }
  PolyMatrix m(static_cast<int>(a.rows()), b.cols_);
  for (int i = 0; i < m.rows_; ++i) {
    for (int j = 0; j < b.cols_; ++j) {
      Polynomial s;
      for (int k = 0; k < b.rows_; ++k) {
        if (a(i, k) != 0.0) s += a(i, k) * b(k, j);
      }
      m(i, j) = std::move(s);
    }
  }
  return m;
}

PolyMatrix operator*(const PolyMatrix& a, const Eigen::MatrixXd& b) {
  return (b.transpose() * a.Transpose()).Transpose();
}

PolyMatrix operator*(double s, PolyMatrix a) {
  for (auto& p : a.entries_) p *= s;
  return a;
}

PolyMatrix Jacobian(const std::vector<Polynomial>& field,
                    const std::vector<int>& vars) {
  if (field.empty() || vars.empty()) {
    throw std::invalid_argument("Jacobian of an empty field or variable list");
  }
  PolyMatrix j(static_cast<int>(field.size()), static_cast<int>(vars.size()));
  for (size_t r = 0; r < field.size(); ++r) {
    for (size_t c = 0; c < vars.size(); ++c) {
      j(static_cast<int>(r), static_cast<int>(c)) = field[r].Differentiate(vars[c]);
    }
  }
  return j;
}

Polynomial ScalarizeQuadratic(const PolyMatrix& m, const std::vector<int>& yvars) {
  if (!m.IsSymmetric()) {
    throw std::invalid_argument("ScalarizeQuadratic: matrix is not symmetric");
  }
  if (static_cast<int>(yvars.size()) != m.rows()) {
    throw std::invalid_argument("ScalarizeQuadratic: |yvars| != rows");
  }
  const std::vector<int> used = m.Variables();
  for (int y : yvars) {
    if (std::find(used.begin(), used.end(), y) != used.end()) {
      throw std::invalid_argument(
          "ScalarizeQuadratic: y variable collides with a matrix indeterminate");
    }
  }
  int n = m.nvars();
  for (int y : yvars) n = std::max(n, y + 1);
  Polynomial out(n);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = i; j < m.cols(); ++j) {
      if (m(i, j).is_zero()) continue;
      Exponents e(n, 0);
      e[yvars[i]] += 1;
      e[yvars[j]] += 1;
      const double w = i == j ? 1.0 : 2.0;
      out += w * (m(i, j) * Polynomial::Monomial(e));
    }
  }
  return out;
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, const VarRegistry& reg)
      : text_(text), reg_(reg), n_(reg.size()) {}

  Polynomial Parse() {
    SkipSpace();
    if (pos_ >= text_.size()) Fail("empty expression");
    Polynomial p = Expr();
    SkipSpace();
    if (pos_ < text_.size()) Fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void Fail(const std::string& msg) const {
    const int col = static_cast<int>(pos_) + 1;
    throw PolyParseError("column " + std::to_string(col) + ": " + msg, col);
  }

  void SkipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char Peek() {
    SkipSpace();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Polynomial Expr() {
    double sign = 1.0;
    char c = Peek();
    if (c == '+' || c == '-') {
      sign = c == '-' ? -1.0 : 1.0;
      ++pos_;
    }
    Polynomial acc = sign * Term();
    for (;;) {
      c = Peek();
      if (c != '+' && c != '-') break;
      ++pos_;
      Polynomial t = Term();
      if (c == '+') {
        acc += t;
      } else {
        acc -= t;
      }
    }
    return acc;
  }

  static bool StartsFactor(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '(' ||
           std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }

  Polynomial Term() {
    Polynomial acc = Factor();
    for (;;) {
      const char c = Peek();
      if (c == '*') {
        ++pos_;
        acc = acc * Factor();
      } else if (StartsFactor(c)) {
        acc = acc * Factor();
      } else {
        break;
      }
    }
    return acc;
  }

  int Power() {
    if (Peek() != '^') return 1;
    ++pos_;
    SkipSpace();
    const size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) Fail("expected non-negative integer exponent after '^'");
    return std::stoi(std::string(text_.substr(start, pos_ - start)));
  }

  Polynomial Factor() {
    const char c = Peek();
    if (c == '(') {
      ++pos_;
      Polynomial inner = Expr();
      if (Peek() != ')') Fail("expected ')'");
      ++pos_;
      return Pow(inner, Power());
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
        ++pos_;
      }
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        size_t look = pos_ + 1;
        if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
        if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
          pos_ = look;
          while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
      }
      const std::string num(text_.substr(start, pos_ - start));
      size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(num, &used);
      } catch (const std::exception&) {
        pos_ = start;
        Fail("malformed number '" + num + "'");
      }
      if (used != num.size()) {
        pos_ = start;
        Fail("malformed number '" + num + "'");
      }
      return Pow(Polynomial::Constant(v, n_), Power());
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view name = text_.substr(start, pos_ - start);
      const int idx = reg_.Find(name);
      if (idx < 0) {
        pos_ = start;
        Fail("undeclared variable '" + std::string(name) + "'");
      }
      return Pow(Polynomial::Variable(idx, n_), Power());
    }
    if (c == '\0') Fail("unexpected end of expression");
    Fail("unexpected character '" + std::string(1, c) + "'");
  }

  static Polynomial Pow(const Polynomial& base, int k) {
    Polynomial r = Polynomial::Constant(1.0, base.nvars());
    for (int i = 0; i < k; ++i) r = r * base;
    return r;
  }

  std::string_view text_;
  const VarRegistry& reg_;
  int n_;
  size_t pos_ = 0;
};

}  // namespace

Polynomial ParsePolynomial(std::string_view text, const VarRegistry& registry) {
  return Parser(text, registry).Parse();
}

}  // namespace diqc
