#include "diqc/iqc.h"

#include <cmath>
#include <stdexcept>

#include "diqc/lti.h"

namespace diqc {

void MultiplierSet::Add(MultiplierEntry entry) {
  entry.psi.Validate();
  if (entry.psi.inputs() != nv_ + nw_) {
    throw std::invalid_argument("MultiplierSet: filter input dimension != nv + nw");
  }
  if (entry.m.rows() != entry.psi.outputs() || entry.m.cols() != entry.psi.outputs()) {
    throw std::invalid_argument("MultiplierSet: M does not match filter outputs");
  }
  if ((entry.m - entry.m.transpose()).norm() > 1e-12 * std::max(1.0, entry.m.norm())) {
    throw std::invalid_argument("MultiplierSet: M is not symmetric");
  }
  if (entry.psi.states() > 0 && !IsHurwitz(entry.psi.A)) {
    throw std::invalid_argument("MultiplierSet: filter '" + entry.name + "' is not stable");
  }
  entries_.push_back(std::move(entry));
}

StateSpace MultiplierSet::Filter() const {
  if (entries_.empty()) return StateSpace::Static(Eigen::MatrixXd(0, nv_ + nw_));
  std::vector<StateSpace> psis;
  for (const auto& e : entries_) psis.push_back(e.psi);
  return StackOutputs(psis);
}

std::pair<int, int> MultiplierSet::OutputRows(int k) const {
  int row = 0;
  for (int i = 0; i < k; ++i) row += entries_.at(i).psi.outputs();
  return {row, entries_.at(k).psi.outputs()};
}

bool MultiplierSet::FirstIsNormBound() const {
  if (entries_.empty()) return false;
  const auto& e = entries_.front();
  const int n = nv_ + nw_;
  if (e.psi.states() != 0 || e.psi.outputs() != n) return false;
  if (!e.psi.D.isApprox(Eigen::MatrixXd::Identity(n, n))) return false;
  Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n);
  j.bottomRightCorner(nw_, nw_) *= -1.0;
  return e.m.isApprox(j);
}

double DelayEta(double omega) {
  const double w2 = omega * omega;
  return (w2 + 0.08 * w2 * w2) / (1.0 + 0.13 * w2 + 0.02 * w2 * w2);
}

RationalFunction DelayEtaFactor() {
  Eigen::VectorXd num(5), den(5);
  num << 0.0, 0.0, 1.0, 0.0, 0.08;
  den << 1.0, 0.0, 0.13, 0.0, 0.02;
  return SpectralFactor(num, den);
}

MultiplierEntry NormBoundMultiplier(int nv, int nw) {
  if (nv <= 0 || nw <= 0) throw std::invalid_argument("NormBoundMultiplier: dims must be positive");
  const int n = nv + nw;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  m.bottomRightCorner(nw, nw) *= -1.0;
  return {"normbound", StateSpace::Static(Eigen::MatrixXd::Identity(n, n)), m};
}

MultiplierSet DelayMultipliers(double theta_max) {
  if (!(theta_max >= 0.0)) throw std::invalid_argument("DelayMultipliers: theta_max < 0");
  MultiplierSet ms(1, 1);
  Eigen::MatrixXd m1(2, 2);
  m1 << 0.0, -1.0, -1.0, -1.0;
  ms.Add({"delay_gain", StateSpace::Static(Eigen::MatrixXd::Identity(2, 2)), m1});

  const Eigen::MatrixXd m2 = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  if (theta_max == 0.0) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(1, 1) = 1.0;
    ms.Add({"delay_eta", StateSpace::Static(d), m2});
    return ms;
  }
  const StateSpace base = Realize(DelayEtaFactor());
  const int n = base.states();
  Eigen::MatrixXd a = base.A / theta_max;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, 2);
  b.col(0) = base.B.col(0) / theta_max;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, n);
  c.row(0) = base.C.row(0);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = base.D(0, 0);
  d(1, 1) = 1.0;
  ms.Add({"delay_eta", StateSpace(a, b, c, d), m2});
  return ms;
}

bool Assumption1Report::all_pass() const {
  for (const auto& e : entries) {
    if (!e.pass()) return false;
  }
  return true;
}

Assumption1Report CheckAssumption1(const MultiplierSet& ms,
                                   const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("CheckAssumption1: empty grid");
  Assumption1Report report;
  const int nv = ms.nv(), nw = ms.nw();
  for (const auto& e : ms.entries()) {
    Assumption1Entry r;
    r.min_vv = std::numeric_limits<double>::infinity();
    r.max_ww = -std::numeric_limits<double>::infinity();
    for (double w : grid) {
      const Eigen::MatrixXcd pi = MultiplierFreq(e.psi, e.m, w);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> vv(pi.topLeftCorner(nv, nv), false);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ww(pi.bottomRightCorner(nw, nw), false);
      r.min_vv = std::min(r.min_vv, vv.eigenvalues().minCoeff());
      r.max_ww = std::max(r.max_ww, ww.eigenvalues().maxCoeff());
    }
    r.vv_ok = r.min_vv >= -1e-9;
    r.ww_ok = r.max_ww <= 1e-9;
    report.entries.push_back(r);
  }
  return report;
}

CombinedMultiplier Combine(const MultiplierSet& ms, const Eigen::VectorXd& lambda) {
  if (lambda.size() != ms.size()) {
    throw std::invalid_argument("Combine: lambda size does not match multiplier count");
  }
  if (ms.empty()) throw std::invalid_argument("Combine: empty multiplier set");
  if (!(lambda(0) >= MultiplierSet::kLambdaMin)) {
    throw std::invalid_argument("Combine: lambda_1 below lambda_min");
  }
  for (int k = 1; k < lambda.size(); ++k) {
    if (!(lambda(k) >= 0.0)) throw std::invalid_argument("Combine: negative lambda");
  }
  CombinedMultiplier c;
  c.psi = ms.Filter();
  const int p = c.psi.outputs();
  c.m_lambda = Eigen::MatrixXd::Zero(p, p);
  for (int k = 0; k < ms.size(); ++k) {
    const auto [row, cnt] = ms.OutputRows(k);
    c.m_lambda.block(row, row, cnt, cnt) = lambda(k) * ms.entry(k).m;
  }
  c.q = c.psi.C.transpose() * c.m_lambda * c.psi.C;
  c.s = c.psi.C.transpose() * c.m_lambda * c.psi.D;
  c.r = c.psi.D.transpose() * c.m_lambda * c.psi.D;
  return c;
}

std::vector<double> HardIqcPartialIntegrals(const StateSpace& psi,
                                            const Eigen::MatrixXd& m,
                                            const Eigen::MatrixXd& v,
                                            const Eigen::MatrixXd& w, double dt) {
  psi.Validate();
  if (v.rows() != w.rows()) throw std::invalid_argument("HardIqcPartialIntegrals: length mismatch");
  if (v.cols() + w.cols() != psi.inputs()) {
    throw std::invalid_argument("HardIqcPartialIntegrals: channel dimension mismatch");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("HardIqcPartialIntegrals: dt must be positive");
  const int n = psi.states();
  if (n > 0) {
    const double anorm = Eigen::JacobiSVD<Eigen::MatrixXd>(psi.A).singularValues()(0);
    if (dt > 0.1 / anorm) {
      throw std::invalid_argument("HardIqcPartialIntegrals: dt too large for the filter");
    }
  }
  const int steps = static_cast<int>(v.rows());
  Eigen::MatrixXd u(steps, psi.inputs());
  u << v, w;

  // Augmented state (x, q) with q' = z'Mz.
  auto rhs = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& in, Eigen::VectorXd* dx) {
    const Eigen::VectorXd z = psi.C * x + psi.D * in;
    *dx = psi.A * x + psi.B * in;
    return z.dot(m * z);
  };
  std::vector<double> out(steps, 0.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  double q = 0.0;
  Eigen::VectorXd k1, k2, k3, k4;
  for (int k = 0; k + 1 < steps; ++k) {
    const Eigen::VectorXd u0 = u.row(k).transpose();
    const Eigen::VectorXd u1 = u.row(k + 1).transpose();
    const Eigen::VectorXd um = 0.5 * (u0 + u1);
    const double q1 = rhs(x, u0, &k1);
    const double q2 = rhs(x + 0.5 * dt * k1, um, &k2);
    const double q3 = rhs(x + 0.5 * dt * k2, um, &k3);
    const double q4 = rhs(x + dt * k3, u1, &k4);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    q += dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
    out[k + 1] = q;
  }
  return out;
}

}  // namespace diqc
