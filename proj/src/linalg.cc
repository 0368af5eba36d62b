#include "diqc/linalg.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "diqc/lti.h"

namespace diqc {
namespace {

// Sizes (1 or 2) of the diagonal blocks of a quasi-triangular matrix.
std::vector<int> BlockSizes(const Eigen::MatrixXd& t) {
  std::vector<int> sizes;
  const int n = static_cast<int>(t.rows());
  for (int i = 0; i < n;) {
    if (i + 1 < n && t(i + 1, i) != 0.0) {
      sizes.push_back(2);
      i += 2;
    } else {
      sizes.push_back(1);
      i += 1;
    }
  }
  return sizes;
}

std::vector<std::complex<double>> BlockEigenvalues(const Eigen::MatrixXd& t,
                                                   int k, int size) {
  if (size == 1) return {std::complex<double>(t(k, k), 0.0)};
  const double a = t(k, k), b = t(k, k + 1), c = t(k + 1, k), d = t(k + 1, k + 1);
  const double half_tr = 0.5 * (a + d);
  const double disc = 0.25 * (a - d) * (a - d) + b * c;
  if (disc >= 0) {
    const double r = std::sqrt(disc);
    return {{half_tr + r, 0.0}, {half_tr - r, 0.0}};
  }
  const double im = std::sqrt(-disc);
  return {{half_tr, im}, {half_tr, -im}};
}

std::vector<std::complex<double>> AllEigenvalues(const Eigen::MatrixXd& t) {
  std::vector<std::complex<double>> eigs;
  int k = 0;
  for (int size : BlockSizes(t)) {
    for (const auto& e : BlockEigenvalues(t, k, size)) eigs.push_back(e);
    k += size;
  }
  return eigs;
}

// Swaps the adjacent diagonal blocks starting at k (sizes p then q).
void SwapBlocks(SchurForm& sf, int k, int p, int q) {
  const int m = p + q;
  const Eigen::MatrixXd t11 = sf.T.block(k, k, p, p);
  const Eigen::MatrixXd t12 = sf.T.block(k, k + p, p, q);
  const Eigen::MatrixXd t22 = sf.T.block(k + p, k + p, q, q);
  // Solve T11 X - X T22 = -T12 via Kronecker form (at most 4 unknowns).
  const Eigen::MatrixXd kron =
      Eigen::kroneckerProduct(Eigen::MatrixXd::Identity(q, q), t11).eval() -
      Eigen::kroneckerProduct(t22.transpose(), Eigen::MatrixXd::Identity(p, p)).eval();
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(t12.data(), p * q);
  const Eigen::VectorXd xv = kron.fullPivLu().solve(rhs);
  Eigen::MatrixXd v(m, q);
  v.topRows(p) = Eigen::Map<const Eigen::MatrixXd>(xv.data(), p, q);
  v.bottomRows(q) = Eigen::MatrixXd::Identity(q, q);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
  const Eigen::MatrixXd qv = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
  sf.T.middleRows(k, m) = qv.transpose() * sf.T.middleRows(k, m);
  sf.T.middleCols(k, m) = sf.T.middleCols(k, m) * qv;
  sf.Q.middleCols(k, m) = sf.Q.middleCols(k, m) * qv;
  // The swapped structure has zeros below the new leading q x q block.
  sf.T.block(k + q, k, p, q).setZero();
}

}  // namespace

SchurForm RealSchur(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("RealSchur: matrix not square");
  SchurForm sf;
  const int n = static_cast<int>(a.rows());
  if (n == 0) {
    sf.Q.resize(0, 0);
    sf.T.resize(0, 0);
    return sf;
  }
  Eigen::RealSchur<Eigen::MatrixXd> rs;
  rs.setMaxIterations(40 * n);
  rs.compute(a);
  if (rs.info() != Eigen::Success) {
    throw std::runtime_error("RealSchur: QR iteration did not converge");
  }
  sf.Q = rs.matrixU();
  sf.T = rs.matrixT();
  // Clean negligible subdiagonal entries so block detection is exact.
  for (int i = 0; i + 1 < n; ++i) {
    const double scale = std::abs(sf.T(i, i)) + std::abs(sf.T(i + 1, i + 1));
    if (std::abs(sf.T(i + 1, i)) <= 1e-15 * std::max(scale, 1e-300)) sf.T(i + 1, i) = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    for (int i = j + 2; i < n; ++i) sf.T(i, j) = 0.0;
  }
  sf.eigenvalues = AllEigenvalues(sf.T);
  return sf;
}

int ReorderSchur(SchurForm& sf,
                 const std::function<bool(std::complex<double>)>& select) {
  // Block sizes are tracked explicitly; T's subdiagonal is not re-read after
  // swaps, whose rounding could otherwise split or merge blocks.
  std::vector<int> sizes = BlockSizes(sf.T);
  std::vector<int> starts(sizes.size());
  auto refresh_starts = [&] {
    int pos = 0;
    for (size_t i = 0; i < sizes.size(); ++i) {
      starts[i] = pos;
      pos += sizes[i];
    }
  };
  refresh_starts();
  int leading_blocks = 0;
  int leading = 0;
  for (size_t idx = 0; idx < sizes.size(); ++idx) {
    const int size = sizes[idx];
    if (!select(BlockEigenvalues(sf.T, starts[idx], size).front())) continue;
    for (size_t cur = idx; cur > static_cast<size_t>(leading_blocks); --cur) {
      SwapBlocks(sf, starts[cur - 1], sizes[cur - 1], sizes[cur]);
      std::swap(sizes[cur - 1], sizes[cur]);
      refresh_starts();
    }
    ++leading_blocks;
    leading += size;
  }
  for (size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 1 && starts[i] > 0) sf.T(starts[i], starts[i] - 1) = 0.0;
  }
  sf.eigenvalues.clear();
  for (size_t i = 0; i < sizes.size(); ++i) {
    for (const auto& e : BlockEigenvalues(sf.T, starts[i], sizes[i])) sf.eigenvalues.push_back(e);
  }
  return leading;
}

double SpectralAbscissa(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("SpectralAbscissa: eigenvalue computation failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

bool IsHurwitz(const Eigen::MatrixXd& a) { return SpectralAbscissa(a) < -kHurwitzMargin; }

std::vector<std::complex<double>> PolynomialRoots(const Eigen::VectorXd& c) {
  int deg = static_cast<int>(c.size()) - 1;
  while (deg >= 0 && c(deg) == 0.0) --deg;
  if (deg < 0) throw std::invalid_argument("PolynomialRoots: zero polynomial");
  std::vector<std::complex<double>> roots;
  int lead_zeros = 0;
  while (lead_zeros < deg && c(lead_zeros) == 0.0) ++lead_zeros;
  for (int i = 0; i < lead_zeros; ++i) roots.emplace_back(0.0, 0.0);
  const int m = deg - lead_zeros;
  if (m == 0) return roots;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < m; ++i) comp(i, m - 1) = -c(lead_zeros + i) / c(deg);
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  for (int i = 0; i < m; ++i) roots.push_back(es.eigenvalues()(i));
  return roots;
}

double AreResidual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                   const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                   const Eigen::MatrixXd& s, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd l = x * b + s;
  const Eigen::MatrixXd res =
      a.transpose() * x + x * a - l * r.fullPivLu().solve(l.transpose()) + q;
  return res.norm();
}

Eigen::MatrixXd SolveLyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& f) {
  const int n = static_cast<int>(a.rows());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd op = Eigen::kroneckerProduct(eye, a.transpose()).eval() +
                             Eigen::kroneckerProduct(a.transpose(), eye).eval();
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(f.data(), n * n);
  const Eigen::VectorXd xv = op.partialPivLu().solve(rhs);
  Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(xv.data(), n, n);
  return 0.5 * (x + x.transpose());
}

Eigen::MatrixXd SolveAre(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                         const Eigen::MatrixXd& s) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != m || r.cols() != m || s.rows() != n || s.cols() != m) {
    throw std::invalid_argument("SolveAre: inconsistent dimensions");
  }
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::FullPivLU<Eigen::MatrixXd> rlu(r);
  if (m > 0 && (!rlu.isInvertible() ||
                rlu.rcond() < 1e3 * std::numeric_limits<double>::epsilon())) {
    throw std::invalid_argument("SolveAre: R is singular");
  }
  const Eigen::MatrixXd rinv = m > 0 ? rlu.inverse() : Eigen::MatrixXd(0, 0);
  const Eigen::MatrixXd abar = a - b * rinv * s.transpose();
  Eigen::MatrixXd g = b * rinv * b.transpose();
  g = 0.5 * (g + g.transpose());
  Eigen::MatrixXd qbar = q - s * rinv * s.transpose();
  qbar = 0.5 * (qbar + qbar.transpose());

  Eigen::MatrixXd h(2 * n, 2 * n);
  h << abar, -g, -qbar, -abar.transpose();
  SchurForm sf = RealSchur(h);
  const double hnorm = std::max(1.0, h.norm());
  for (const auto& e : sf.eigenvalues) {
    if (std::abs(e.real()) <= 1e-10 * hnorm) {
      throw NoStabilizingSolution(
          "SolveAre: Hamiltonian has eigenvalues on the imaginary axis");
    }
  }
  const int k = ReorderSchur(sf, [](std::complex<double> e) { return e.real() < 0; });
  if (k != n) {
    throw NoStabilizingSolution("SolveAre: stable subspace has wrong dimension");
  }
  const Eigen::MatrixXd u1 = sf.Q.topLeftCorner(n, n);
  const Eigen::MatrixXd u2 = sf.Q.bottomLeftCorner(n, n);
  Eigen::FullPivLU<Eigen::MatrixXd> ulu(u1);
  if (!ulu.isInvertible() || ulu.rcond() < 1e-13) {
    throw NoStabilizingSolution("SolveAre: stable subspace is not a graph");
  }
  Eigen::MatrixXd x = (u1.transpose().fullPivLu().solve(u2.transpose())).transpose();
  x = 0.5 * (x + x.transpose());

  auto residual = [&](const Eigen::MatrixXd& xx) {
    Eigen::MatrixXd res = abar.transpose() * xx + xx * abar - xx * g * xx + qbar;
    return Eigen::MatrixXd(0.5 * (res + res.transpose()));
  };
  // One Newton (Kleinman) step on the residual.
  {
    const Eigen::MatrixXd f = residual(x);
    const Eigen::MatrixXd acl = abar - g * x;
    if (IsHurwitz(acl)) {
      const Eigen::MatrixXd dx = SolveLyapunov(acl, f);
      const Eigen::MatrixXd xn = x + dx;
      if (residual(xn).norm() < f.norm()) x = xn;
    }
  }
  const Eigen::MatrixXd closed = a - b * rinv * (x * b + s).transpose();
  if (!IsHurwitz(closed)) {
    throw NoStabilizingSolution("SolveAre: closed loop is not Hurwitz");
  }
  const double res = AreResidual(a, b, q, r, s, x);
  if (res > 1e-8 * std::max(1.0, x.norm())) {
    throw NoStabilizingSolution("SolveAre: residual " + std::to_string(res) +
                                " exceeds tolerance");
  }
  return x;
}

std::complex<double> RationalFunction::operator()(std::complex<double> s) const {
  auto horner = [s](const Eigen::VectorXd& c) {
    std::complex<double> v = 0.0;
    for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i) v = v * s + c(i);
    return v;
  };
  return horner(num) / horner(den);
}

namespace {

// Coefficients (ascending in s) of c * prod (s - r_i); real up to roundoff.
Eigen::VectorXd ExpandRoots(const std::vector<std::complex<double>>& roots, double lead) {
  std::vector<std::complex<double>> c{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (size_t i = 0; i < c.size(); ++i) {
      next[i + 1] += c[i];
      next[i] -= r * c[i];
    }
    c = std::move(next);
  }
  Eigen::VectorXd out(c.size());
  for (size_t i = 0; i < c.size(); ++i) out(i) = lead * c[i].real();
  return out;
}

// Left-half-plane half of the roots of p(-s^2)-type polynomial given by its
// coefficients in w^2, plus the leading scale sqrt(|lead|).
Eigen::VectorXd FactorEven(const Eigen::VectorXd& even, const char* which) {
  const int deg = static_cast<int>(even.size()) - 1;
  if (deg % 2 != 0 && even(deg) != 0.0) {
    throw std::invalid_argument(std::string("SpectralFactor: ") + which + " is not even");
  }
  for (int i = 1; i < even.size(); i += 2) {
    if (even(i) != 0.0) {
      throw std::invalid_argument(std::string("SpectralFactor: ") + which +
                                  " has odd-power terms");
    }
  }
  int top = deg;
  while (top >= 0 && even(top) == 0.0) --top;
  if (top < 0) throw std::invalid_argument(std::string("SpectralFactor: ") + which + " is zero");
  const int k = top / 2;
  // p(w) = sum a_i w^(2i); with w^2 = -s^2 = -z this is sum a_i (-z)^i.
  Eigen::VectorXd zc(k + 1);
  for (int i = 0; i <= k; ++i) zc(i) = even(2 * i) * ((i % 2) ? -1.0 : 1.0);
  const double lead = even(2 * k);
  if (lead <= 0) {
    throw std::invalid_argument(std::string("SpectralFactor: ") + which +
                                " has non-positive leading coefficient");
  }
  std::vector<std::complex<double>> s_roots;
  if (k > 0) {
    for (const auto& z : PolynomialRoots(zc)) {
      const std::complex<double> r = std::sqrt(z);
      s_roots.push_back(r);
      s_roots.push_back(-r);
    }
  }
  // Keep the open-LHP roots; roots on the axis come in pairs, keep one of each.
  const double axis_tol = 1e-7;
  std::vector<std::complex<double>> keep, axis;
  for (const auto& r : s_roots) {
    if (r.real() < -axis_tol * std::max(1.0, std::abs(r))) {
      keep.push_back(r);
    } else if (std::abs(r.real()) <= axis_tol * std::max(1.0, std::abs(r))) {
      axis.emplace_back(0.0, r.imag());
    }
  }
  std::sort(axis.begin(), axis.end(), [](auto a, auto b) { return a.imag() < b.imag(); });
  if (axis.size() % 4 != 0 && axis.size() % 2 != 0) {
    throw std::invalid_argument(std::string("SpectralFactor: ") + which +
                                " changes sign on the imaginary axis");
  }
  for (size_t i = 0; i < axis.size(); i += 2) keep.push_back(axis[i]);
  if (static_cast<int>(keep.size()) != k) {
    throw std::invalid_argument(std::string("SpectralFactor: ") + which +
                                " is indefinite on the real line");
  }
  return ExpandRoots(keep, std::sqrt(lead));
}

}  // namespace

RationalFunction SpectralFactor(const Eigen::VectorXd& num_even,
                                const Eigen::VectorXd& den_even) {
  RationalFunction g;
  g.num = FactorEven(num_even, "numerator");
  g.den = FactorEven(den_even, "denominator");
  // Denominator must be strictly Hurwitz.
  if (g.den.size() > 1) {
    for (const auto& r : PolynomialRoots(g.den)) {
      if (r.real() >= -kHurwitzMargin) {
        throw std::invalid_argument("SpectralFactor: denominator vanishes on the axis");
      }
    }
  }
  // Sign check on a log grid.
  for (int i = 0; i < 200; ++i) {
    const double w = std::pow(10.0, -3.0 + 6.0 * i / 199.0);
    double nv = 0, dv = 0, wp = 1;
    for (int j = 0; j < num_even.size(); ++j, wp *= w) nv += num_even(j) * wp;
    wp = 1;
    for (int j = 0; j < den_even.size(); ++j, wp *= w) dv += den_even(j) * wp;
    if (nv < -1e-12 * std::abs(dv) || dv <= 0) {
      throw std::invalid_argument("SpectralFactor: indefinite numerator or denominator");
    }
  }
  return g;
}

StateSpace Realize(const RationalFunction& g) {
  int dn = static_cast<int>(g.den.size()) - 1;
  while (dn > 0 && g.den(dn) == 0.0) --dn;
  int nn = static_cast<int>(g.num.size()) - 1;
  while (nn > 0 && g.num(nn) == 0.0) --nn;
  if (nn > dn) throw std::invalid_argument("Realize: improper rational function");
  const double lead = g.den(dn);
  Eigen::VectorXd den = g.den.head(dn + 1) / lead;
  Eigen::VectorXd num = Eigen::VectorXd::Zero(dn + 1);
  num.head(nn + 1) = g.num.head(nn + 1) / lead;
  const double d = num(dn);
  Eigen::VectorXd rem = num - d * den;  // degree < dn
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dn, dn);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dn, 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, dn);
  for (int i = 0; i + 1 < dn; ++i) a(i, i + 1) = 1.0;
  for (int i = 0; i < dn; ++i) {
    a(dn - 1, i) = -den(i);
    c(0, i) = rem(i);
  }
  if (dn > 0) b(dn - 1, 0) = 1.0;
  Eigen::MatrixXd dm(1, 1);
  dm(0, 0) = d;
  return StateSpace(a, b, c, dm);
}

double MaxSingularValue(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

namespace {

double GainAt(const StateSpace& g, double w) {
  return MaxSingularValue(FreqResponse(g, w));
}

// Golden-section refinement of the peak of sigma_max on [lo, hi].
double RefinePeak(const StateSpace& g, double lo, double hi, double* best_w) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(std::max(lo, 1e-12)), b = std::log(hi);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = GainAt(g, std::exp(c)), fd = GainAt(g, std::exp(d));
  for (int it = 0; it < 80; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = GainAt(g, std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = GainAt(g, std::exp(d));
    }
  }
  *best_w = std::exp(fc > fd ? c : d);
  return std::max(fc, fd);
}

}  // namespace

double HinfNorm(const StateSpace& g, double tol) {
  g.Validate();
  const int n = g.states();
  const Eigen::JacobiSVD<Eigen::MatrixXd> dsvd(g.D);
  const double sigma_d = g.D.size() ? dsvd.singularValues()(0) : 0.0;
  if (n == 0) return sigma_d;
  if (!IsHurwitz(g.A)) throw std::invalid_argument("HinfNorm: A is not Hurwitz");

  // Sweep seed: DC, pole magnitudes, and a log grid, then refine the best.
  double lb = std::max(sigma_d, GainAt(g, 0.0));
  double best_w = 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(g.A, false);
  std::vector<double> candidates;
  for (int i = 0; i < n; ++i) candidates.push_back(std::abs(es.eigenvalues()(i)));
  for (int i = 0; i < 400; ++i) candidates.push_back(std::pow(10.0, -4.0 + 9.0 * i / 399.0));
  std::sort(candidates.begin(), candidates.end());
  for (double w : candidates) {
    const double v = GainAt(g, w);
    if (v > lb) {
      lb = v;
      best_w = w;
    }
  }
  if (best_w > 0) {
    double wr = best_w;
    lb = std::max(lb, RefinePeak(g, best_w / 1.2, best_w * 1.2, &wr));
  }

  // Boyd-Balakrishnan-Bruinsma iteration.
  const int m = g.inputs();
  const int p = g.outputs();
  for (int iter = 0; iter < 60; ++iter) {
    const double gamma = (1.0 + 2.0 * tol) * lb;
    const Eigen::MatrixXd r =
        gamma * gamma * Eigen::MatrixXd::Identity(m, m) - g.D.transpose() * g.D;
    const Eigen::MatrixXd rinv = r.inverse();
    const Eigen::MatrixXd a1 = g.A + g.B * rinv * g.D.transpose() * g.C;
    Eigen::MatrixXd h(2 * n, 2 * n);
    h << a1, g.B * rinv * g.B.transpose(),
        -g.C.transpose() *
            (Eigen::MatrixXd::Identity(p, p) + g.D * rinv * g.D.transpose()) * g.C,
        -a1.transpose();
    Eigen::EigenSolver<Eigen::MatrixXd> hs(h, false);
    std::vector<double> omegas;
    const double hn = std::max(1.0, h.norm());
    for (int i = 0; i < 2 * n; ++i) {
      const auto e = hs.eigenvalues()(i);
      if (std::abs(e.real()) <= 1e-7 * hn && e.imag() >= 0) omegas.push_back(e.imag());
    }
    if (omegas.empty()) return lb;  // norm lies in [lb, gamma)
    std::sort(omegas.begin(), omegas.end());
    double next = lb;
    if (omegas.size() == 1) {
      next = std::max(next, GainAt(g, omegas[0]));
    }
    for (size_t i = 0; i + 1 < omegas.size(); ++i) {
      next = std::max(next, GainAt(g, 0.5 * (omegas[i] + omegas[i + 1])));
    }
    if (next <= lb * (1.0 + 0.1 * tol)) {
      // Spurious axis eigenvalues: fall back to local grid refinement.
      for (double w : omegas) {
        double wr = w;
        if (w > 0) next = std::max(next, RefinePeak(g, w / 1.05, w * 1.05, &wr));
      }
      if (next <= lb * (1.0 + 0.1 * tol)) return lb;
    }
    lb = next;
  }
  return lb;
}

}  // namespace diqc
