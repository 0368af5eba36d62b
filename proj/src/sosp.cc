#include "diqc/sosp.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace diqc {

LinExpr LinExpr::Decision(const DecisionRef& ref, double coeff) {
  LinExpr e;
  if (coeff != 0.0) e.terms_[ref] = coeff;
  return e;
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  constant_ += o.constant_;
  for (const auto& [ref, c] : o.terms_) {
    auto [it, inserted] = terms_.emplace(ref, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) { return *this += -1.0 * o; }

LinExpr& LinExpr::operator*=(double s) {
  if (s == 0.0) {
    constant_ = 0.0;
    terms_.clear();
    return *this;
  }
  constant_ *= s;
  for (auto& [ref, c] : terms_) c *= s;
  return *this;
}

namespace {

Exponents Resized(const Exponents& e, int n) {
  Exponents k = e;
  k.resize(n, 0);
  return k;
}

Exponents Trimmed(Exponents e) {
  while (!e.empty() && e.back() == 0) e.pop_back();
  return e;
}

Exponents Sum(const Exponents& a, const Exponents& b) {
  Exponents s(std::max(a.size(), b.size()), 0);
  for (size_t i = 0; i < a.size(); ++i) s[i] += a[i];
  for (size_t i = 0; i < b.size(); ++i) s[i] += b[i];
  return s;
}

}  // namespace

AffinePoly::AffinePoly(const Polynomial& p) : nvars_(p.nvars()) {
  for (const auto& [e, c] : p.terms()) terms_.emplace(e, LinExpr(c));
}

AffinePoly::AffinePoly(const LinExpr& c) {
  if (!c.is_zero()) terms_.emplace(Exponents{}, c);
}

int AffinePoly::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, TotalDegree(e));
  return d;
}

std::vector<int> AffinePoly::Variables() const {
  std::vector<int> v;
  for (int i = 0; i < nvars_; ++i) {
    for (const auto& [e, c] : terms_) {
      if (e[i] > 0) {
        v.push_back(i);
        break;
      }
    }
  }
  return v;
}

void AffinePoly::AddTerm(const Exponents& e, const LinExpr& c) {
  if (c.is_zero()) return;
  const Exponents t = Trimmed(e);
  const int n = static_cast<int>(t.size());
  if (n > nvars_) {
    TermMap grown;
    for (auto& [k, v] : terms_) grown.emplace(Resized(k, n), v);
    terms_ = std::move(grown);
    nvars_ = n;
  }
  auto [it, inserted] = terms_.emplace(Resized(t, nvars_), c);
  if (!inserted) {
    it->second += c;
    if (it->second.is_zero()) terms_.erase(it);
  }
}

AffinePoly& AffinePoly::operator+=(const AffinePoly& o) {
  for (const auto& [e, c] : o.terms_) AddTerm(e, c);
  return *this;
}

AffinePoly& AffinePoly::operator-=(const AffinePoly& o) {
  for (const auto& [e, c] : o.terms_) AddTerm(e, -c);
  return *this;
}

AffinePoly& AffinePoly::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

AffinePoly operator*(const AffinePoly& a, const Polynomial& p) {
  AffinePoly out;
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [ep, cp] : p.terms()) out.AddTerm(Sum(ea, ep), ca * cp);
  }
  return out;
}

AffinePoly operator*(const LinExpr& c, const Polynomial& p) {
  AffinePoly out;
  for (const auto& [e, v] : p.terms()) out.AddTerm(e, c * v);
  return out;
}

AffinePolyMatrix::AffinePolyMatrix(const PolyMatrix& m)
    : rows_(m.rows()), cols_(m.cols()), e_(m.rows() * m.cols()) {
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) (*this)(i, j) = AffinePoly(m(i, j));
  }
}

AffinePolyMatrix AffinePolyMatrix::Transpose() const {
  AffinePolyMatrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

void AffinePolyMatrix::SetBlock(int r, int c, const AffinePolyMatrix& b) {
  if (r < 0 || c < 0 || r + b.rows() > rows_ || c + b.cols() > cols_) {
    throw std::invalid_argument("AffinePolyMatrix::SetBlock: out of range");
  }
  for (int i = 0; i < b.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) (*this)(r + i, c + j) = b(i, j);
  }
}

int AffinePolyMatrix::degree() const {
  int d = 0;
  for (const auto& p : e_) d = std::max(d, p.degree());
  return d;
}

std::vector<int> AffinePolyMatrix::Variables() const {
  std::set<int> s;
  for (const auto& p : e_) {
    for (int v : p.Variables()) s.insert(v);
  }
  return {s.begin(), s.end()};
}

AffinePolyMatrix& AffinePolyMatrix::operator+=(const AffinePolyMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) {
    throw std::invalid_argument("AffinePolyMatrix: dimension mismatch in +");
  }
  for (size_t k = 0; k < e_.size(); ++k) e_[k] += o.e_[k];
  return *this;
}

AffinePolyMatrix operator*(const AffinePolyMatrix& a, const PolyMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("AffinePolyMatrix: dimension mismatch in *");
  AffinePolyMatrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      for (int k = 0; k < a.cols(); ++k) {
        if (!a(i, k).is_zero() && !b(k, j).is_zero()) out(i, j) += a(i, k) * b(k, j);
      }
    }
  }
  return out;
}

AffinePolyMatrix operator*(const PolyMatrix& a, const AffinePolyMatrix& b) {
  return (b.Transpose() * a.Transpose()).Transpose();
}

AffinePolyMatrix operator*(const LinExpr& c, const PolyMatrix& m) {
  AffinePolyMatrix out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out(i, j) = c * m(i, j);
  }
  return out;
}

AffinePolyMatrix operator*(double s, AffinePolyMatrix a) {
  for (auto& p : a.e_) p *= s;
  return a;
}

std::vector<Exponents> MonomialBasis(const std::vector<int>& vars, int max_deg, int nvars) {
  if (max_deg < 0) throw std::invalid_argument("MonomialBasis: negative degree");
  for (int v : vars) {
    if (v < 0 || v >= nvars) throw std::invalid_argument("MonomialBasis: variable out of range");
  }
  std::vector<Exponents> out;
  Exponents cur(nvars, 0);
  // Enumerate per total degree; within a degree, the recursion assigns the
  // largest exponent to the earliest variable first, which is graded-lex.
  auto rec = [&](auto&& self, size_t k, int left) -> void {
    if (k + 1 == vars.size()) {
      cur[vars[k]] = left;
      out.push_back(cur);
      cur[vars[k]] = 0;
      return;
    }
    for (int e = left; e >= 0; --e) {
      cur[vars[k]] = e;
      self(self, k + 1, left - e);
    }
    cur[vars[k]] = 0;
  };
  out.push_back(cur);
  if (vars.empty()) return out;
  for (int d = 1; d <= max_deg; ++d) rec(rec, 0, d);
  return out;
}

bool Region::Contains(const Eigen::VectorXd& point, double tol) const {
  for (const auto& g : generators) {
    if (g.Evaluate(point) < -tol) return false;
  }
  for (const auto& [v, b] : bounds) {
    if (point(v) < b.first - tol || point(v) > b.second + tol) return false;
  }
  return true;
}

std::pair<double, double> Region::Box(int var) const {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  if (auto it = bounds.find(var); it != bounds.end()) {
    lo = it->second.first;
    hi = it->second.second;
  }
  for (const auto& g : generators) {
    const auto vars = g.Variables();
    if (vars.size() != 1 || vars[0] != var || g.degree() != 2) continue;
    Exponents e1(g.nvars(), 0), e2(g.nvars(), 0);
    e1[var] = 1;
    e2[var] = 2;
    const double c0 = g.coeff(Exponents(g.nvars(), 0));
    const double a = g.coeff(e2);
    if (g.coeff(e1) != 0.0 || a >= 0.0 || c0 <= 0.0) continue;
    const double r = std::sqrt(c0 / -a);
    lo = std::max(lo, -r);
    hi = std::min(hi, r);
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {-1.0, 1.0};
  return {lo, hi};
}

std::vector<Eigen::VectorXd> Region::Sample(const std::vector<int>& vars, int nvars, int n,
                                            unsigned seed) const {
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> dist;
  for (int v : vars) {
    const auto [lo, hi] = Box(v);
    dist.emplace_back(lo, hi);
  }
  std::vector<Eigen::VectorXd> out;
  const long max_tries = 1000L * std::max(n, 1);
  for (long t = 0; t < max_tries && static_cast<int>(out.size()) < n; ++t) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(nvars);
    for (size_t k = 0; k < vars.size(); ++k) p(vars[k]) = dist[k](rng);
    if (Contains(p)) out.push_back(std::move(p));
  }
  if (static_cast<int>(out.size()) < n) {
    throw std::runtime_error("Region::Sample: rejection sampling accepted too few points");
  }
  return out;
}

LinExpr SosProgram::NewFree() { return LinExpr::Decision({SdpProblem::kFree, problem_.AddFree(), 0}); }

LinExpr SosProgram::NewNonneg() { return LinExpr::Decision({problem_.AddBlock(1), 0, 0}); }

std::vector<std::vector<LinExpr>> SosProgram::NewPsd(int n) {
  const int b = problem_.AddBlock(n);
  std::vector<std::vector<LinExpr>> m(n, std::vector<LinExpr>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m[i][j] = LinExpr::Decision({b, std::min(i, j), std::max(i, j)});
  }
  return m;
}

AffinePolyMatrix SosProgram::NewPolyMatrix(int rows, int cols, const std::vector<int>& vars,
                                           int deg) {
  const auto basis = MonomialBasis(vars, deg, registry_.size());
  AffinePolyMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      for (const auto& e : basis) m(i, j).AddTerm(e, NewFree());
    }
  }
  return m;
}

AffinePolyMatrix SosProgram::NewSymmetricPolyMatrix(int n, const std::vector<int>& vars, int deg) {
  const auto basis = MonomialBasis(vars, deg, registry_.size());
  AffinePolyMatrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (const auto& e : basis) m(i, j).AddTerm(e, NewFree());
      m(j, i) = m(i, j);
    }
  }
  return m;
}

AffinePoly SosProgram::NewSosPoly(const std::vector<Exponents>& basis) {
  const int n = static_cast<int>(basis.size());
  const int b = problem_.AddBlock(n);
  AffinePoly p;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      p.AddTerm(Sum(basis[i], basis[j]), LinExpr::Decision({b, i, j}, i == j ? 1.0 : 2.0));
    }
  }
  return p;
}

void SosProgram::AddDecisionCoeffs(int row, const LinExpr& e, double sign) {
  for (const auto& [ref, k] : e.terms()) {
    if (ref[0] == SdpProblem::kFree) {
      problem_.AddFreeCoeff(row, ref[1], sign * k);
    } else {
      // An off-diagonal pair entry v contributes 2 v X_ij.
      problem_.AddBlockCoeff(row, ref[0], ref[1], ref[2], sign * k * (ref[1] == ref[2] ? 1.0 : 0.5));
    }
  }
}

void SosProgram::AddEquality(const LinExpr& e) {
  if (e.is_constant()) {
    if (e.constant() != 0.0) {
      // Keep the inconsistency visible to the solver rather than dropping it.
      problem_.AddRow(-e.constant());
    }
    return;
  }
  const int row = problem_.AddRow(-e.constant());
  AddDecisionCoeffs(row, e, 1.0);
}

void SosProgram::AddSos(const AffinePoly& p, const std::vector<Exponents>& basis) {
  const int n = static_cast<int>(basis.size());
  if (n == 0) throw std::invalid_argument("AddSos: empty basis");
  std::map<Exponents, std::vector<std::pair<int, int>>> products;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) products[Trimmed(Sum(basis[i], basis[j]))].emplace_back(i, j);
  }
  std::map<Exponents, const LinExpr*> coeffs;
  for (const auto& [e, c] : p.terms()) {
    Exponents key = Trimmed(e);
    if (!products.count(key)) {
      throw std::invalid_argument("AddSos: basis too small for the polynomial's support");
    }
    coeffs[key] = &c;
  }
  const int blk = problem_.AddBlock(n);
  for (const auto& [key, pairs] : products) {
    auto it = coeffs.find(key);
    const int row = problem_.AddRow(it == coeffs.end() ? 0.0 : it->second->constant());
    for (const auto& [i, j] : pairs) problem_.AddBlockCoeff(row, blk, i, j, 1.0);
    if (it != coeffs.end()) AddDecisionCoeffs(row, *it->second, -1.0);
  }
}

std::vector<int> SosProgram::YVars(int n) {
  while (static_cast<int>(yvars_.size()) < n) {
    yvars_.push_back(registry_.Add("_y" + std::to_string(yvars_.size())));
  }
  return {yvars_.begin(), yvars_.begin() + n};
}

void SosProgram::AddPmi(const AffinePolyMatrix& m, const Region& region, const PmiOptions& opt) {
  const int n = m.rows();
  if (n == 0) return;
  if (m.cols() != n) throw std::invalid_argument("AddPmi: matrix is not square");
  if (opt.mult_deg < 0) throw std::invalid_argument("AddPmi: negative multiplier degree");

  // Symmetry up to round-off in the assembled coefficients.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const AffinePoly d = m(i, j) - m(j, i);
      for (const auto& [e, c] : d.terms()) {
        double worst = std::abs(c.constant());
        for (const auto& [ref, k] : c.terms()) worst = std::max(worst, std::abs(k));
        if (worst > 1e-9) throw std::invalid_argument("AddPmi: matrix is not symmetric");
      }
    }
  }

  std::set<int> rho_set;
  for (int v : m.Variables()) rho_set.insert(v);
  std::vector<const Polynomial*> gens;
  for (const auto& g : region.generators) {
    const auto gv = g.Variables();
    if (std::any_of(gv.begin(), gv.end(), [&](int v) { return rho_set.count(v) > 0; })) {
      gens.push_back(&g);
    }
  }
  for (const auto* g : gens) {
    for (int v : g->Variables()) rho_set.insert(v);
  }
  const std::vector<int> rho(rho_set.begin(), rho_set.end());

  const std::vector<int> y = YVars(n);
  const int nv = registry_.size();
  for (int v : rho) {
    if (std::find(yvars_.begin(), yvars_.end(), v) != yvars_.end()) {
      throw std::invalid_argument("AddPmi: matrix depends on auxiliary variables");
    }
  }

  int half = (m.degree() + 1) / 2;
  for (const auto* g : gens) half = std::max(half, (g->degree() + opt.mult_deg + 1) / 2);
  if (opt.basis_deg >= 0) half = opt.basis_deg;

  auto ybasis = [&](int deg) {
    std::vector<Exponents> b;
    const auto mono = MonomialBasis(rho, deg, nv);
    for (int yk : y) {
      for (Exponents e : mono) {
        e[yk] += 1;
        b.push_back(std::move(e));
      }
    }
    return b;
  };
  auto yy = [&](int r, int c) {
    Exponents e(nv, 0);
    e[y[r]] += 1;
    e[y[c]] += 1;
    return Polynomial::Monomial(e);
  };

  AffinePoly p;
  for (int r = 0; r < n; ++r) {
    p.AddTerm(yy(r, r).terms().begin()->first, LinExpr(-opt.margin));
    for (int c = 0; c < n; ++c) {
      const AffinePoly& mrc = r <= c ? m(r, c) : m(c, r);
      if (!mrc.is_zero()) p -= mrc * yy(r, c);
    }
  }
  for (const auto* g : gens) {
    const int sdeg = std::min(opt.mult_deg / 2, (2 * half - g->degree()) / 2);
    if (sdeg < 0) continue;
    p -= NewSosPoly(ybasis(sdeg)) * g->Extended(nv);
  }
  for (const auto& [e, c] : p.terms()) {
    int ydeg = 0;
    for (int yk : y) ydeg += yk < static_cast<int>(e.size()) ? e[yk] : 0;
    if (ydeg != 2) throw std::logic_error("AddPmi: scalarized form is not quadratic in y");
  }
  AddSos(p, ybasis(half));
}

void SosProgram::Minimize(const LinExpr& objective) {
  problem_.objective.clear();
  for (const auto& [ref, k] : objective.terms()) {
    if (ref[0] == SdpProblem::kFree) {
      problem_.AddFreeCost(ref[1], k);
    } else {
      problem_.AddBlockCost(ref[0], ref[1], ref[2], ref[1] == ref[2] ? k : 0.5 * k);
    }
  }
}

SdpSolution SosProgram::Solve(const SdpOptions& options) const { return SolveSdp(problem_, options); }

double SosProgram::Value(const LinExpr& e, const SdpSolution& sol) {
  double v = e.constant();
  for (const auto& [ref, k] : e.terms()) {
    v += k * (ref[0] == SdpProblem::kFree ? sol.free(ref[1]) : sol.x.at(ref[0])(ref[1], ref[2]));
  }
  return v;
}

Polynomial SosProgram::Value(const AffinePoly& p, const SdpSolution& sol) {
  return p.Substitute([&](const DecisionRef& ref) {
    return ref[0] == SdpProblem::kFree ? sol.free(ref[1]) : sol.x.at(ref[0])(ref[1], ref[2]);
  });
}

PolyMatrix SosProgram::Value(const AffinePolyMatrix& m, const SdpSolution& sol) {
  PolyMatrix out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out(i, j) = Value(m(i, j), sol);
  }
  return out;
}

}  // namespace diqc
