#pragma once

#include <vector>

#include <Eigen/Dense>

#include "diqc/poly.h"
#include "diqc/state_space.h"

namespace diqc {

/// x' = f(x, w, d), v = g(x, w, d), e = h(x, w, d), all polynomial over
/// `registry`. The index lists pick the registry entries of each group.
struct NominalSystem {
  VarRegistry registry;
  std::vector<int> x, w, d;
  std::vector<Polynomial> f, g, h;

  int nx() const { return static_cast<int>(x.size()); }
  int nw() const { return static_cast<int>(w.size()); }
  int nd() const { return static_cast<int>(d.size()); }
  int nv() const { return static_cast<int>(g.size()); }
  int ne() const { return static_cast<int>(h.size()); }

  /// Dimension checks; every polynomial may only use x, w, d variables.
  void Validate() const;
};

/// Differential dynamics
///   dx' = Ax dx + Bxw dw + Bxd dd
///   dv  = Cv dx + Dvw dw + Dvd dd
///   de  = Ce dx + Dew dw + Ded dd
/// with blocks polynomial in rho = (x, w, d). `f` is the nominal vector field,
/// needed only when a state-dependent metric is differentiated along it.
struct DiffSystem {
  VarRegistry registry;
  std::vector<int> x, w, d;
  PolyMatrix ax, bxw, bxd;
  PolyMatrix cv, dvw, dvd;
  PolyMatrix ce, dew, ded;
  std::vector<Polynomial> f;

  int nx() const { return ax.rows(); }
  int nw() const { return bxw.cols(); }
  int nd() const { return bxd.cols(); }
  int nv() const { return cv.rows(); }
  int ne() const { return ce.rows(); }

  void Validate() const;
  /// Frozen LTI system at `point` (registry coordinates): inputs (dw, dd),
  /// outputs (dv, de).
  StateSpace Frozen(const Eigen::VectorXd& point) const;
};

/// Blockwise sum of two conformal systems over the same registry.
DiffSystem operator+(const DiffSystem& a, const DiffSystem& b);

DiffSystem DifferentiateSystem(const NominalSystem& ns);

/// max |J - J_fd| / max(1, |J_fd|) over every Jacobian entry of (f, g, h)
/// with respect to (x, w, d) at a registry point, J_fd by central differences.
double JacobianFdMismatch(const NominalSystem& ns, const Eigen::VectorXd& point,
                          double step = 1e-6);
/// Same, for blocks `ds` derived some other way from `ns`.
double JacobianFdMismatch(const NominalSystem& ns, const DiffSystem& ds,
                          const Eigen::VectorXd& point, double step = 1e-6);

/// x' = A x + B d, e = C x + D d over variables x1.., d1...
NominalSystem LinearNominal(const StateSpace& g);

/// Series interconnection of the differential dynamics with the stacked
/// filter Psi acting on (dv, dw). State chi = (dx, psi).
struct ExtendedSystem {
  int nx = 0;
  int npsi = 0;
  PolyMatrix a, bw, bd;
  PolyMatrix cz, dzw, dzd;  // stacked filter outputs
  PolyMatrix ce, dew, ded;

  int nchi() const { return nx + npsi; }
  int nw() const { return bw.cols(); }
  int nd() const { return bd.cols(); }
  int nz() const { return cz.rows(); }
  int ne() const { return ce.rows(); }

  /// Frozen LTI system: inputs (dw, dd), outputs (z, de).
  StateSpace Frozen(const Eigen::VectorXd& point) const;
};

/// Requires filter.inputs() == nv + nw.
ExtendedSystem Extend(const DiffSystem& ds, const StateSpace& filter);

}  // namespace diqc
