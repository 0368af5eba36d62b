#include "diqc/lti.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "diqc/linalg.h"

namespace diqc {

Eigen::MatrixXcd FreqResponse(const StateSpace& g, double omega) {
  const int n = g.states();
  Eigen::MatrixXcd d = g.D.cast<std::complex<double>>();
  if (n == 0) return d;
  const std::complex<double> jw(0.0, omega);
  Eigen::MatrixXcd resolvent =
      jw * Eigen::MatrixXcd::Identity(n, n) - g.A.cast<std::complex<double>>();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(resolvent);
  // rcond estimate via the smallest pivot relative to the matrix scale.
  const double scale = std::max(1.0, resolvent.cwiseAbs().maxCoeff());
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (min_pivot <= 1e-13 * scale) {
    throw std::domain_error("FreqResponse: jw is a pole of the system");
  }
  return g.C.cast<std::complex<double>>() * lu.solve(g.B.cast<std::complex<double>>()) + d;
}

StateSpace StackOutputs(const std::vector<StateSpace>& systems) {
  if (systems.empty()) throw std::invalid_argument("StackOutputs: empty list");
  const int m = systems.front().inputs();
  int n = 0, p = 0;
  for (const auto& s : systems) {
    if (s.inputs() != m) {
      throw std::invalid_argument("StackOutputs: input dimension mismatch");
    }
    n += s.states();
    p += s.outputs();
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd b(n, m);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, n);
  Eigen::MatrixXd d(p, m);
  int ns = 0, ps = 0;
  for (const auto& s : systems) {
    const int k = s.states(), q = s.outputs();
    a.block(ns, ns, k, k) = s.A;
    b.middleRows(ns, k) = s.B;
    c.block(ps, ns, q, k) = s.C;
    d.middleRows(ps, q) = s.D;
    ns += k;
    ps += q;
  }
  return StateSpace(a, b, c, d);
}

Eigen::MatrixXcd MultiplierFreq(const StateSpace& psi, const Eigen::MatrixXd& m,
                                double omega) {
  if (m.rows() != psi.outputs() || m.cols() != psi.outputs()) {
    throw std::invalid_argument("MultiplierFreq: M does not match filter outputs");
  }
  const Eigen::MatrixXcd g = FreqResponse(psi, omega);
  Eigen::MatrixXcd pi = g.adjoint() * m.cast<std::complex<double>>() * g;
  return 0.5 * (pi + pi.adjoint());
}

std::vector<double> LogGrid(double lo, double hi, int n) {
  std::vector<double> grid;
  grid.reserve(n);
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) {
    grid.push_back(std::pow(10.0, n == 1 ? a : a + (b - a) * i / (n - 1)));
  }
  return grid;
}

std::vector<double> CheckGrid() {
  std::vector<double> grid{0.0};
  for (double w : LogGrid(1e-3, 1e3, 200)) grid.push_back(w);
  grid.push_back(1e6);
  return grid;
}

JFactor JSpectralFactorize(const StateSpace& psi, const Eigen::MatrixXd& m, int nv,
                           int nw) {
  psi.Validate();
  const int nin = nv + nw;
  if (psi.inputs() != nin) {
    throw std::invalid_argument("JSpectralFactorize: filter input dimension != nv + nw");
  }
  if (m.rows() != psi.outputs() || m.cols() != psi.outputs()) {
    throw std::invalid_argument("JSpectralFactorize: M does not match filter outputs");
  }
  JFactor f;
  const Eigen::MatrixXd msym = 0.5 * (m + m.transpose());
  f.q = psi.C.transpose() * msym * psi.C;
  f.s = psi.C.transpose() * msym * psi.D;
  f.r = psi.D.transpose() * msym * psi.D;
  f.q = 0.5 * (f.q + f.q.transpose());
  f.r = 0.5 * (f.r + f.r.transpose());

  // Indefinite square root R = D' J D with positive directions first.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.r);
  const Eigen::VectorXd lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  int npos = 0, nneg = 0;
  for (int i = 0; i < nin; ++i) {
    if (lam(i) > 1e-12 * scale) ++npos;
    if (lam(i) < -1e-12 * scale) ++nneg;
  }
  if (npos + nneg != nin) {
    throw std::invalid_argument("JSpectralFactorize: R = D'MD is singular");
  }
  if (npos != nv || nneg != nw) {
    throw std::invalid_argument("JSpectralFactorize: R = D'MD has inertia (" +
                                std::to_string(npos) + "," + std::to_string(nneg) +
                                "), expected (" + std::to_string(nv) + "," +
                                std::to_string(nw) + ")");
  }
  Eigen::MatrixXd dz(nin, nin);
  int row = 0;
  for (int i = nin - 1; i >= 0; --i) {  // descending: positive block first
    dz.row(row++) = std::sqrt(std::abs(lam(i))) * es.eigenvectors().col(i).transpose();
  }
  f.m_tilde = Eigen::MatrixXd::Identity(nin, nin);
  f.m_tilde.bottomRightCorner(nw, nw) *= -1.0;

  const double eps = 1e-9;
  for (double w : CheckGrid()) {
    const Eigen::MatrixXcd pi = MultiplierFreq(psi, msym, w);
    if (nv > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> vv(pi.topLeftCorner(nv, nv), false);
      if (vv.eigenvalues().minCoeff() < eps) f.strict_sign_conditions = false;
    }
    if (nw > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ww(pi.bottomRightCorner(nw, nw), false);
      if (ww.eigenvalues().maxCoeff() > -eps) f.strict_sign_conditions = false;
    }
  }

  f.x = SolveAre(psi.A, psi.B, f.q, f.r, f.s);
  f.are_residual = AreResidual(psi.A, psi.B, f.q, f.r, f.s, f.x);
  const Eigen::MatrixXd l = psi.B.transpose() * f.x + f.s.transpose();  // nin x n
  const Eigen::MatrixXd c_tilde = f.m_tilde * dz.transpose().fullPivLu().solve(l);
  f.psi_tilde = StateSpace(psi.A, psi.B, c_tilde, dz);
  return f;
}

double JFactorGridResidual(const StateSpace& psi, const Eigen::MatrixXd& m,
                           const JFactor& factor, const std::vector<double>& grid) {
  double worst = 0.0;
  for (double w : grid) {
    const Eigen::MatrixXcd pi = MultiplierFreq(psi, m, w);
    const Eigen::MatrixXcd pt = MultiplierFreq(factor.psi_tilde, factor.m_tilde, w);
    const double denom = std::max(pi.norm(), 1e-12);
    worst = std::max(worst, (pt - pi).norm() / denom);
  }
  return worst;
}

StateSpace RandomStableLti(std::uint64_t seed, int max_order) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> order(1, max_order), io(1, 2);
  const int n = order(rng), m = io(rng), p = io(rng);
  Eigen::MatrixXd a(n, n), b(n, m), c(p, n), d(p, m);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  for (int i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
  for (int i = 0; i < c.size(); ++i) c.data()[i] = g(rng);
  for (int i = 0; i < d.size(); ++i) d.data()[i] = 0.3 * g(rng);
  a -= (SpectralAbscissa(a) + 0.2 + std::abs(g(rng))) * Eigen::MatrixXd::Identity(n, n);
  return StateSpace(a, b, c, d);
}

}  // namespace diqc
