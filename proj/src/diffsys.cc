#include "diqc/diffsys.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace diqc {
namespace {

void RequireShape(const PolyMatrix& m, int rows, int cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string("DiffSystem: block ") + name + " has shape " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                ", expected " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

PolyMatrix JacobianOrEmpty(const std::vector<Polynomial>& field, const std::vector<int>& vars,
                           int nvars) {
  if (field.empty() || vars.empty()) {
    return PolyMatrix::Zero(static_cast<int>(field.size()), static_cast<int>(vars.size()));
  }
  PolyMatrix j = Jacobian(field, vars);
  // Keep every entry over the full registry so evaluation is uniform.
  for (int r = 0; r < j.rows(); ++r) {
    for (int c = 0; c < j.cols(); ++c) j(r, c) = j(r, c).Extended(std::max(nvars, j(r, c).nvars()));
  }
  return j;
}

Eigen::MatrixXd Eval(const PolyMatrix& m, const Eigen::VectorXd& point) {
  if (m.rows() == 0 || m.cols() == 0) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
  return m.Evaluate(point);
}

PolyMatrix Stack2x1(const PolyMatrix& top, const PolyMatrix& bottom) {
  PolyMatrix out(top.rows() + bottom.rows(), top.cols());
  out.SetBlock(0, 0, top);
  out.SetBlock(top.rows(), 0, bottom);
  return out;
}

PolyMatrix Num(const Eigen::MatrixXd& m) { return PolyMatrix::FromNumeric(m); }

}  // namespace

void NominalSystem::Validate() const {
  const int n = registry.size();
  std::vector<bool> allowed(n, false);
  for (const auto* group : {&x, &w, &d}) {
    for (int i : *group) {
      if (i < 0 || i >= n) throw std::invalid_argument("NominalSystem: variable index out of range");
      if (allowed[i]) throw std::invalid_argument("NominalSystem: variable listed twice");
      allowed[i] = true;
    }
  }
  if (static_cast<int>(f.size()) != nx()) {
    throw std::invalid_argument("NominalSystem: |f| must equal the number of states");
  }
  for (const auto* group : {&f, &g, &h}) {
    for (const auto& p : *group) {
      for (int v : p.Variables()) {
        if (v >= n || !allowed[v]) {
          throw std::invalid_argument("NominalSystem: polynomial uses a variable outside (x, w, d)");
        }
      }
    }
  }
}

void DiffSystem::Validate() const {
  const int n = nx(), m = nw(), k = nd(), p = nv(), q = ne();
  RequireShape(ax, n, n, "Ax");
  RequireShape(bxw, n, m, "Bxw");
  RequireShape(bxd, n, k, "Bxd");
  RequireShape(cv, p, n, "Cv");
  RequireShape(dvw, p, m, "Dvw");
  RequireShape(dvd, p, k, "Dvd");
  RequireShape(ce, q, n, "Ce");
  RequireShape(dew, q, m, "Dew");
  RequireShape(ded, q, k, "Ded");
  if (static_cast<int>(x.size()) != n) throw std::invalid_argument("DiffSystem: |x| != nx");
  if (!f.empty() && static_cast<int>(f.size()) != n) {
    throw std::invalid_argument("DiffSystem: |f| != nx");
  }
}

StateSpace DiffSystem::Frozen(const Eigen::VectorXd& point) const {
  Validate();
  const int m = nw() + nd();
  Eigen::MatrixXd b(nx(), m), c(nv() + ne(), nx()), dd(nv() + ne(), m);
  b << Eval(bxw, point), Eval(bxd, point);
  c << Eval(cv, point), Eval(ce, point);
  dd << Eval(dvw, point), Eval(dvd, point), Eval(dew, point), Eval(ded, point);
  return StateSpace(Eval(ax, point), b, c, dd);
}

DiffSystem operator+(const DiffSystem& a, const DiffSystem& b) {
  a.Validate();
  b.Validate();
  DiffSystem s = a;
  s.ax += b.ax;
  s.bxw += b.bxw;
  s.bxd += b.bxd;
  s.cv += b.cv;
  s.dvw += b.dvw;
  s.dvd += b.dvd;
  s.ce += b.ce;
  s.dew += b.dew;
  s.ded += b.ded;
  s.f.clear();
  return s;
}

DiffSystem DifferentiateSystem(const NominalSystem& ns) {
  ns.Validate();
  const int n = ns.registry.size();
  DiffSystem ds;
  ds.registry = ns.registry;
  ds.x = ns.x;
  ds.w = ns.w;
  ds.d = ns.d;
  ds.ax = JacobianOrEmpty(ns.f, ns.x, n);
  ds.bxw = JacobianOrEmpty(ns.f, ns.w, n);
  ds.bxd = JacobianOrEmpty(ns.f, ns.d, n);
  ds.cv = JacobianOrEmpty(ns.g, ns.x, n);
  ds.dvw = JacobianOrEmpty(ns.g, ns.w, n);
  ds.dvd = JacobianOrEmpty(ns.g, ns.d, n);
  ds.ce = JacobianOrEmpty(ns.h, ns.x, n);
  ds.dew = JacobianOrEmpty(ns.h, ns.w, n);
  ds.ded = JacobianOrEmpty(ns.h, ns.d, n);
  ds.f = ns.f;
  return ds;
}

ExtendedSystem Extend(const DiffSystem& ds, const StateSpace& filter) {
  ds.Validate();
  filter.Validate();
  const int nx = ds.nx(), nw = ds.nw(), nd = ds.nd(), nv = ds.nv();
  if (filter.inputs() != nv + nw) {
    throw std::invalid_argument("Extend: filter input dimension != nv + nw");
  }
  const int np = filter.states(), nz = filter.outputs();
  const Eigen::MatrixXd bpv = filter.B.leftCols(nv), bpw = filter.B.rightCols(nw);
  const Eigen::MatrixXd dzv = filter.D.leftCols(nv), dzw = filter.D.rightCols(nw);

  ExtendedSystem ext;
  ext.nx = nx;
  ext.npsi = np;
  ext.a = PolyMatrix::Zero(nx + np, nx + np);
  ext.a.SetBlock(0, 0, ds.ax);
  ext.a.SetBlock(nx, 0, bpv * ds.cv);
  ext.a.SetBlock(nx, nx, Num(filter.A));
  ext.bw = Stack2x1(ds.bxw, bpv * ds.dvw + Num(bpw));
  ext.bd = Stack2x1(ds.bxd, bpv * ds.dvd);

  ext.cz = PolyMatrix::Zero(nz, nx + np);
  ext.cz.SetBlock(0, 0, dzv * ds.cv);
  ext.cz.SetBlock(0, nx, Num(filter.C));
  ext.dzw = dzv * ds.dvw + Num(dzw);
  ext.dzd = dzv * ds.dvd;

  ext.ce = PolyMatrix::Zero(ds.ne(), nx + np);
  ext.ce.SetBlock(0, 0, ds.ce);
  ext.dew = ds.dew;
  ext.ded = ds.ded;
  (void)nd;
  return ext;
}

StateSpace ExtendedSystem::Frozen(const Eigen::VectorXd& point) const {
  const int m = nw() + nd();
  Eigen::MatrixXd b(nchi(), m), c(nz() + ne(), nchi()), dd(nz() + ne(), m);
  b << Eval(bw, point), Eval(bd, point);
  c << Eval(cz, point), Eval(ce, point);
  dd << Eval(dzw, point), Eval(dzd, point), Eval(dew, point), Eval(ded, point);
  return StateSpace(Eval(a, point), b, c, dd);
}

double JacobianFdMismatch(const NominalSystem& ns, const Eigen::VectorXd& point, double step) {
  return JacobianFdMismatch(ns, DifferentiateSystem(ns), point, step);
}

double JacobianFdMismatch(const NominalSystem& ns, const DiffSystem& ds,
                          const Eigen::VectorXd& point, double step) {
  const StateSpace fr = ds.Frozen(point);
  Eigen::MatrixXd full(fr.states() + fr.outputs(), fr.states() + fr.inputs());
  full << fr.A, fr.B, fr.C, fr.D;
  std::vector<int> cols = ns.x;
  cols.insert(cols.end(), ns.w.begin(), ns.w.end());
  cols.insert(cols.end(), ns.d.begin(), ns.d.end());
  if (full.rows() != ns.nx() + ns.nv() + ns.ne() || full.cols() != static_cast<int>(cols.size())) {
    throw std::invalid_argument("JacobianFdMismatch: blocks do not match the system");
  }
  auto eval = [&](const Eigen::VectorXd& p) {
    std::vector<double> out;
    for (const auto* group : {&ns.f, &ns.g, &ns.h}) {
      for (const auto& q : *group) out.push_back(q.Evaluate(p));
    }
    return out;
  };
  double worst = 0.0;
  for (int c = 0; c < static_cast<int>(cols.size()); ++c) {
    Eigen::VectorXd up = point, dn = point;
    up(cols[c]) += step;
    dn(cols[c]) -= step;
    const auto fu = eval(up), fd = eval(dn);
    for (int r = 0; r < static_cast<int>(fu.size()); ++r) {
      const double num = (fu[r] - fd[r]) / (2 * step);
      worst = std::max(worst, std::abs(full(r, c) - num) / std::max(1.0, std::abs(num)));
    }
  }
  return worst;
}

NominalSystem LinearNominal(const StateSpace& g) {
  const int n = g.states(), m = g.inputs();
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < m; ++i) names.push_back("d" + std::to_string(i + 1));
  NominalSystem ns;
  ns.registry = VarRegistry(names);
  for (int i = 0; i < n; ++i) ns.x.push_back(i);
  for (int i = 0; i < m; ++i) ns.d.push_back(n + i);
  auto affine = [&](const Eigen::MatrixXd& s, const Eigen::MatrixXd& t, int row) {
    Polynomial p(n + m);
    for (int j = 0; j < n; ++j) p += s(row, j) * Polynomial::Variable(j, n + m);
    for (int j = 0; j < m; ++j) p += t(row, j) * Polynomial::Variable(n + j, n + m);
    return p;
  };
  for (int i = 0; i < n; ++i) ns.f.push_back(affine(g.A, g.B, i));
  for (int i = 0; i < g.outputs(); ++i) ns.h.push_back(affine(g.C, g.D, i));
  return ns;
}

}  // namespace diqc
