#include "diqc/conic.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace diqc {

int SdpProblem::AddFree(int count) {
  if (count < 0) throw std::invalid_argument("SdpProblem::AddFree: negative count");
  const int first = num_free;
  num_free += count;
  return first;
}

int SdpProblem::AddBlock(int size) {
  if (size <= 0) throw std::invalid_argument("SdpProblem::AddBlock: size must be positive");
  block_sizes.push_back(size);
  return num_blocks() - 1;
}

int SdpProblem::AddRow(double value) {
  rhs.push_back(value);
  return num_rows() - 1;
}

void SdpProblem::AddFreeCoeff(int row, int var, double value) {
  if (value != 0.0) constraints.push_back({row, kFree, var, 0, value});
}

void SdpProblem::AddBlockCoeff(int row, int block, int i, int j, double value) {
  if (value != 0.0) constraints.push_back({row, block, std::min(i, j), std::max(i, j), value});
}

void SdpProblem::AddFreeCost(int var, double value) {
  if (value != 0.0) objective.push_back({0, kFree, var, 0, value});
}

void SdpProblem::AddBlockCost(int block, int i, int j, double value) {
  if (value != 0.0) objective.push_back({0, block, std::min(i, j), std::max(i, j), value});
}

void SdpProblem::Validate() const {
  auto check = [&](const SdpEntry& e, bool has_row) {
    if (has_row && (e.row < 0 || e.row >= num_rows())) {
      throw std::invalid_argument("SdpProblem: row index out of range");
    }
    if (!std::isfinite(e.value)) throw std::invalid_argument("SdpProblem: non-finite coefficient");
    if (e.block == kFree) {
      if (e.i < 0 || e.i >= num_free) {
        throw std::invalid_argument("SdpProblem: free variable index out of range");
      }
      return;
    }
    if (e.block < 0 || e.block >= num_blocks()) {
      throw std::invalid_argument("SdpProblem: block index out of range");
    }
    const int n = block_sizes[e.block];
    if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n) {
      throw std::invalid_argument("SdpProblem: block entry out of range");
    }
  };
  for (const auto& e : constraints) check(e, true);
  for (const auto& e : objective) check(e, false);
  for (double v : rhs) {
    if (!std::isfinite(v)) throw std::invalid_argument("SdpProblem: non-finite right-hand side");
  }
  for (int n : block_sizes) {
    if (n <= 0) throw std::invalid_argument("SdpProblem: block sizes must be positive");
  }
}

std::string StatusName(SdpStatus status) {
  switch (status) {
    case SdpStatus::kOptimal:
      return "optimal";
    case SdpStatus::kPrimalInfeasible:
      return "primal_infeasible";
    case SdpStatus::kDualInfeasible:
      return "dual_infeasible";
    case SdpStatus::kMaxIter:
      return "max_iter";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Blocks = std::vector<MatrixXd>;

// Column-major full vectorization of every block, concatenated.
struct Layout {
  std::vector<int> sizes;
  std::vector<int> offsets;
  int length = 0;
  int order = 0;  // sum of block sizes

  explicit Layout(const std::vector<int>& s) : sizes(s) {
    for (int n : sizes) {
      offsets.push_back(length);
      length += n * n;
      order += n;
    }
  }
  int count() const { return static_cast<int>(sizes.size()); }
};

void AddSym(double* vec, const Layout& l, int block, int i, int j, double v) {
  const int n = l.sizes[block], off = l.offsets[block];
  vec[off + i + j * n] += v;
  if (i != j) vec[off + j + i * n] += v;
}

Blocks Unvec(const VectorXd& v, const Layout& l) {
  Blocks out;
  for (int b = 0; b < l.count(); ++b) {
    const int n = l.sizes[b];
    out.push_back(Eigen::Map<const MatrixXd>(v.data() + l.offsets[b], n, n));
  }
  return out;
}

VectorXd Vec(const Blocks& blocks, const Layout& l) {
  VectorXd v(l.length);
  for (int b = 0; b < l.count(); ++b) {
    const int n = l.sizes[b];
    Eigen::Map<MatrixXd>(v.data() + l.offsets[b], n, n) = blocks[b];
  }
  return v;
}

MatrixXd Sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double MinEig(const MatrixXd& m) {
  if (m.rows() == 1) return m(0, 0);
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(Sym(m), Eigen::EigenvaluesOnly)
      .eigenvalues()(0);
}

// Largest alpha with X + alpha dX PSD (infinity if unbounded).
double MaxStep(const MatrixXd& x, const MatrixXd& dx) {
  if (x.rows() == 1) {
    return dx(0, 0) < 0 ? -x(0, 0) / dx(0, 0) : std::numeric_limits<double>::infinity();
  }
  Eigen::LLT<MatrixXd> llt(x);
  const MatrixXd l = llt.matrixL();
  MatrixXd w = l.triangularView<Eigen::Lower>().solve(dx);
  w = l.triangularView<Eigen::Lower>().solve(w.transpose()).transpose();
  const double lmin = MinEig(w);
  return lmin >= 0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

double ScalarStep(double v, double dv) {
  return dv < 0 ? -v / dv : std::numeric_limits<double>::infinity();
}

struct IpmResult {
  SdpStatus status = SdpStatus::kMaxIter;
  VectorXd x, y, s;
  double tau = 1.0, kappa = 1.0;
  int iterations = 0;
  std::string message;
  std::vector<double> mu_history;
};

// Homogeneous self-dual embedding of min c'x s.t. Ax = b, x in the PSD
// blocks of `l`:
//   Ax - b tau = 0,  A'y + s - c tau = 0,  b'y - c'x - kappa = 0.
IpmResult RunIpm(const MatrixXd& a, const VectorXd& b, const VectorXd& c, const Layout& l,
                 const SdpOptions& opt) {
  const int m = static_cast<int>(a.rows());
  const int nb = l.count();
  IpmResult res;
  Blocks x(nb), s(nb), sinv(nb);
  for (int k = 0; k < nb; ++k) {
    x[k] = MatrixXd::Identity(l.sizes[k], l.sizes[k]);
    s[k] = x[k];
  }
  VectorXd y = VectorXd::Zero(m);
  double tau = 1.0, kappa = 1.0;
  const double bnorm = 1.0 + b.norm(), cnorm = 1.0 + c.norm();
  const double dof = l.order + 1.0;

  std::ostringstream diag;
  for (int it = 0;; ++it) {
    const VectorXd xv = Vec(x, l), sv = Vec(s, l);
    const VectorXd rp = a * xv - b * tau;
    const VectorXd aty = a.transpose() * y;
    const VectorXd rd = aty + sv - c * tau;
    const double pobj = c.dot(xv), dobj = b.dot(y);
    const double rg = dobj - pobj - kappa;
    const double mu = (xv.dot(sv) + tau * kappa) / dof;
    res.mu_history.push_back(mu);

    const double pres = rp.norm() / (tau * bnorm);
    const double dres = rd.norm() / (tau * cnorm);
    const double gap = std::abs(pobj - dobj) / (tau + std::abs(pobj) + std::abs(dobj));
    res.iterations = it;
    diag.str("");
    diag << "iter " << it << ": pres " << pres << " dres " << dres << " gap " << gap
         << " tau " << tau << " kappa " << kappa;
    if (!std::isfinite(mu) || !std::isfinite(tau)) {
      res.message = "numerical breakdown (non-finite iterate); last " + diag.str();
      break;
    }
    if (pres <= opt.tol && dres <= opt.tol && gap <= opt.tol) {
      res.status = SdpStatus::kOptimal;
      break;
    }
    if (dobj > 0 && (aty + sv).norm() / dobj <= opt.tol) {
      res.status = SdpStatus::kPrimalInfeasible;
      break;
    }
    if (pobj < 0 && (a * xv).norm() / (-pobj) <= opt.tol) {
      res.status = SdpStatus::kDualInfeasible;
      break;
    }
    if (it >= opt.max_iter) {
      res.message = "iteration limit reached; last " + diag.str();
      break;
    }

    // Schur complement M_ij = tr(A_i X A_j S^-1).
    for (int k = 0; k < nb; ++k) {
      sinv[k] = s[k].llt().solve(MatrixXd::Identity(l.sizes[k], l.sizes[k]));
    }
    MatrixXd g(l.length, m);
    for (int j = 0; j < m; ++j) {
      const VectorXd row = a.row(j).transpose();
      for (int k = 0; k < nb; ++k) {
        const int n = l.sizes[k], off = l.offsets[k];
        const Eigen::Map<const MatrixXd> aj(row.data() + off, n, n);
        Eigen::Map<MatrixXd>(g.col(j).data() + off, n, n) = x[k] * aj * sinv[k];
      }
    }
    MatrixXd mm = a * g;
    mm = Sym(mm);
    Eigen::LLT<MatrixXd> chol(mm);
    Eigen::LDLT<MatrixXd> ldlt;
    const bool use_ldlt = chol.info() != Eigen::Success;
    if (use_ldlt) ldlt.compute(mm);
    auto msolve = [&](const VectorXd& r) {
      VectorXd z = use_ldlt ? VectorXd(ldlt.solve(r)) : VectorXd(chol.solve(r));
      const VectorXd corr = r - mm * z;  // one step of iterative refinement
      z += use_ldlt ? VectorXd(ldlt.solve(corr)) : VectorXd(chol.solve(corr));
      return z;
    };

    Blocks xcs(nb), rdb = Unvec(rd, l), z(nb);
    const Blocks cb = Unvec(c, l);
    for (int k = 0; k < nb; ++k) {
      xcs[k] = x[k] * cb[k] * sinv[k];
      z[k] = x[k] * rdb[k] * sinv[k];
    }
    const VectorXd xcsv = Vec(xcs, l), zv = Vec(z, l);
    const VectorXd w = a * xcsv;
    const VectorXd v = w + b;
    const double cc = c.dot(xcsv);
    const VectorXd az = a * zv;
    const double cz = c.dot(zv);
    const VectorXd q = msolve(v);
    const VectorXd bw = b - w;
    const double den = bw.dot(q) + cc + kappa / tau;

    struct Dir {
      Blocks dx, ds;
      VectorXd dy;
      double dtau = 0, dkappa = 0;
    };
    auto direction = [&](double sigma, double eta, const Blocks* corr, double corr_tk) {
      Dir d;
      Blocks r(nb);
      for (int k = 0; k < nb; ++k) {
        r[k] = sigma * mu * sinv[k] - x[k];
        if (corr) r[k] -= (*corr)[k];
      }
      const VectorXd rv = Vec(r, l);
      const double rc = sigma * mu - tau * kappa - corr_tk;
      const VectorXd r1 = -eta * rp - a * rv - eta * az;
      const VectorXd p = msolve(r1);
      const double num = -eta * rg + c.dot(rv) + eta * cz + rc / tau - bw.dot(p);
      d.dtau = num / den;
      d.dy = p + q * d.dtau;
      const VectorXd dsv = -eta * rd - a.transpose() * d.dy + c * d.dtau;
      d.ds = Unvec(dsv, l);
      d.dx.resize(nb);
      for (int k = 0; k < nb; ++k) {
        d.dx[k] = r[k] - Sym(x[k] * d.ds[k] * sinv[k]);
        d.ds[k] = Sym(d.ds[k]);
      }
      d.dkappa = (rc - kappa * d.dtau) / tau;
      return d;
    };
    auto max_step = [&](const Dir& d) {
      double am = std::min(ScalarStep(tau, d.dtau), ScalarStep(kappa, d.dkappa));
      for (int k = 0; k < nb; ++k) {
        am = std::min(am, MaxStep(x[k], d.dx[k]));
        am = std::min(am, MaxStep(s[k], d.ds[k]));
      }
      return am;
    };

    const Dir aff = direction(0.0, 1.0, nullptr, 0.0);
    const double a_aff = std::min(1.0, max_step(aff));
    double mu_aff = (tau + a_aff * aff.dtau) * (kappa + a_aff * aff.dkappa);
    for (int k = 0; k < nb; ++k) {
      mu_aff += ((x[k] + a_aff * aff.dx[k]).cwiseProduct(s[k] + a_aff * aff.ds[k])).sum();
    }
    mu_aff /= dof;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);
    Blocks corr(nb);
    for (int k = 0; k < nb; ++k) corr[k] = Sym(aff.dx[k] * aff.ds[k] * sinv[k]);
    const Dir d = direction(sigma, 1.0 - sigma, &corr, aff.dtau * aff.dkappa);
    const double alpha = std::min(1.0, 0.99 * max_step(d));
    if (!(alpha > 1e-12)) {
      res.message = "step length collapsed; last " + diag.str();
      break;
    }
    for (int k = 0; k < nb; ++k) {
      x[k] = Sym(x[k] + alpha * d.dx[k]);
      s[k] = Sym(s[k] + alpha * d.ds[k]);
    }
    y += alpha * d.dy;
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
  }
  res.x = Vec(x, l);
  res.s = Vec(s, l);
  res.y = y;
  res.tau = tau;
  res.kappa = kappa;
  return res;
}

}  // namespace

SdpSolution SolveSdp(const SdpProblem& problem, const SdpOptions& options) {
  problem.Validate();
  if (problem.block_sizes.empty()) {
    throw std::invalid_argument("SolveSdp: at least one PSD block is required");
  }
  const Layout l(problem.block_sizes);
  const int m = problem.num_rows(), nf = problem.num_free;

  MatrixXd fm = MatrixXd::Zero(m, nf);
  MatrixXd am = MatrixXd::Zero(m, l.length);
  VectorXd bvec = Eigen::Map<const VectorXd>(problem.rhs.data(), m);
  VectorXd cf = VectorXd::Zero(nf), cv = VectorXd::Zero(l.length);
  {
    MatrixXd amt = MatrixXd::Zero(l.length, m);  // column access is cheaper
    for (const auto& e : problem.constraints) {
      if (e.block == SdpProblem::kFree) {
        fm(e.row, e.i) += e.value;
      } else {
        AddSym(amt.col(e.row).data(), l, e.block, e.i, e.j, e.value);
      }
    }
    am = amt.transpose();
  }
  for (const auto& e : problem.objective) {
    if (e.block == SdpProblem::kFree) {
      cf(e.i) += e.value;
    } else {
      AddSym(cv.data(), l, e.block, e.i, e.j, e.value);
    }
  }

  SdpSolution sol;
  sol.free = VectorXd::Zero(nf);
  sol.y = VectorXd::Zero(m);
  auto blocks_of = [&](const VectorXd& v) { return Unvec(v, l); };

  // Eliminate the free variables: rows are rotated by Q = [Q1 Q2] with
  // range(F) = range(Q1); u = F^+ (b - A(X)) and the objective picks up
  // -A^*(g) with F'g = c.
  MatrixXd fpinv;
  VectorXd g = VectorXd::Zero(m);
  MatrixXd q2;
  bool rotate = false;
  if (nf > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
    cod.setThreshold(1e-11);
    cod.compute(fm);
    fpinv = cod.pseudoInverse();
    g = fpinv.transpose() * cf;
    const VectorXd cres = cf - fm.transpose() * g;
    if (cres.norm() > 1e-9 * (1.0 + cf.norm())) {
      // Free direction with nonzero cost and no constraint: dual infeasible.
      sol.status = SdpStatus::kDualInfeasible;
      sol.free = -cres / cres.squaredNorm();
      sol.x = blocks_of(VectorXd::Zero(l.length));
      sol.ray_residual = (fm * sol.free).norm();
      sol.message = "objective has a component on unconstrained free directions";
      return sol;
    }
    const int r = static_cast<int>(cod.rank());
    const MatrixXd qfull = cod.householderQ();
    q2 = qfull.rightCols(m - r);
    rotate = true;
  }
  MatrixXd ar = rotate ? MatrixXd(q2.transpose() * am) : am;
  VectorXd br = rotate ? VectorXd(q2.transpose() * bvec) : bvec;
  const VectorXd ceff = cv - am.transpose() * g;
  const int m2 = static_cast<int>(ar.rows());

  // Lift a multiplier on the reduced rows back to the original rows.
  auto lift = [&](const VectorXd& y2) -> VectorXd {
    return rotate ? VectorXd(q2 * y2) : y2;
  };

  // Row scaling, zero and dependent rows.
  VectorXd rscale = VectorXd::Ones(m2);
  for (int i = 0; i < m2; ++i) {
    const double nrm = ar.row(i).norm();
    if (nrm > 0) rscale(i) = nrm;
  }
  MatrixXd as = rscale.cwiseInverse().asDiagonal() * ar;
  VectorXd bs = br.cwiseQuotient(rscale);
  std::vector<int> keep;
  {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(as.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    if (rank < m2) {
      // Consistency of the dropped rows: residual of bs on range(as).
      Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(as);
      cod.setThreshold(1e-10);
      const VectorXd xls = cod.solve(bs);
      const VectorXd resid = bs - as * xls;
      if (resid.norm() > 1e-9 * (1.0 + bs.norm())) {
        const VectorXd y2 = (resid / resid.squaredNorm()).cwiseQuotient(rscale);
        VectorXd y = lift(y2);
        y /= bvec.dot(y);
        sol.status = SdpStatus::kPrimalInfeasible;
        sol.y = y;
        sol.s = blocks_of(-(am.transpose() * y));
        sol.ray_residual = (fm.transpose() * y).norm() + (am.transpose() * y).norm();
        sol.message = "inconsistent linear equalities";
        return sol;
      }
    }
    for (int i = 0; i < rank; ++i) keep.push_back(qr.colsPermutation().indices()(i));
    std::sort(keep.begin(), keep.end());
  }
  const int m3 = static_cast<int>(keep.size());
  MatrixXd ai(m3, l.length);
  VectorXd bi(m3);
  for (int i = 0; i < m3; ++i) {
    ai.row(i) = as.row(keep[i]);
    bi(i) = bs(keep[i]);
  }
  const double beta_b = std::max(1.0, bi.norm());
  const double beta_c = std::max(1.0, ceff.norm());
  const IpmResult ipm = RunIpm(ai, bi / beta_b, ceff / beta_c, l, options);
  sol.iterations = ipm.iterations;
  sol.mu_history = ipm.mu_history;
  sol.message = ipm.message;
  sol.status = ipm.status;

  auto reduced_to_full = [&](const VectorXd& yk) {
    VectorXd y2 = VectorXd::Zero(m2);
    for (int i = 0; i < m3; ++i) y2(keep[i]) = yk(i) / rscale(keep[i]);
    return lift(y2);
  };

  switch (ipm.status) {
    case SdpStatus::kOptimal:
    case SdpStatus::kMaxIter: {
      const VectorXd xv = ipm.x * (beta_b / ipm.tau);
      const VectorXd y = g + reduced_to_full(ipm.y * (beta_c / ipm.tau));
      if (nf > 0) sol.free = fpinv * (bvec - am * xv);
      const VectorXd sv = cv - am.transpose() * y;
      sol.x = blocks_of(xv);
      sol.y = y;
      sol.s = blocks_of(sv);
      sol.primal_objective = cf.dot(sol.free) + cv.dot(xv);
      sol.dual_objective = bvec.dot(y);
      const double denom = 1.0 + std::abs(sol.primal_objective) + std::abs(sol.dual_objective);
      sol.gap = std::abs(sol.primal_objective - sol.dual_objective) / denom;
      sol.primal_residual = (fm * sol.free + am * xv - bvec).norm() / (1.0 + bvec.norm());
      sol.min_eig_x = std::numeric_limits<double>::infinity();
      sol.min_eig_s = std::numeric_limits<double>::infinity();
      for (int k = 0; k < l.count(); ++k) {
        sol.min_eig_x = std::min(sol.min_eig_x, MinEig(sol.x[k]));
        sol.min_eig_s = std::min(sol.min_eig_s, MinEig(sol.s[k]));
      }
      const double cscale = 1.0 + cf.norm() + cv.norm();
      sol.dual_residual = std::max((fm.transpose() * y - cf).norm(),
                                   std::max(0.0, -sol.min_eig_s)) / cscale;
      break;
    }
    case SdpStatus::kPrimalInfeasible: {
      VectorXd y = reduced_to_full(ipm.y);
      y /= bvec.dot(y);
      sol.y = y;
      const VectorXd sv = -(am.transpose() * y);
      sol.s = blocks_of(sv);
      double neg = 0.0;
      for (const auto& sb : sol.s) neg = std::max(neg, -MinEig(sb));
      sol.ray_residual = std::max((fm.transpose() * y).norm(), neg);
      sol.dual_objective = 1.0;
      break;
    }
    case SdpStatus::kDualInfeasible: {
      VectorXd xv = ipm.x;
      VectorXd u = nf > 0 ? VectorXd(-fpinv * (am * xv)) : VectorXd::Zero(0);
      const double obj = cf.dot(u) + cv.dot(xv);
      xv /= -obj;
      u /= -obj;
      sol.x = blocks_of(xv);
      sol.free = u;
      sol.primal_objective = -1.0;
      double neg = 0.0;
      for (const auto& xb : sol.x) neg = std::max(neg, -MinEig(xb));
      sol.ray_residual = std::max((fm * u + am * xv).norm(), neg);
      break;
    }
  }
  return sol;
}

void DumpProblem(const SdpProblem& p, std::ostream& out) {
  p.Validate();
  out.precision(17);
  out << "diqc-sdp 1\n";
  out << "free " << p.num_free << "\n";
  out << "blocks " << p.num_blocks();
  for (int n : p.block_sizes) out << " " << n;
  out << "\nrows " << p.num_rows() << "\n";
  for (int i = 0; i < p.num_rows(); ++i) {
    if (p.rhs[i] != 0.0) out << "rhs " << i << " " << p.rhs[i] << "\n";
  }
  for (const auto& e : p.constraints) {
    if (e.block == SdpProblem::kFree) {
      out << "a " << e.row << " free " << e.i << " " << e.value << "\n";
    } else {
      out << "a " << e.row << " " << e.block << " " << e.i << " " << e.j << " " << e.value << "\n";
    }
  }
  for (const auto& e : p.objective) {
    if (e.block == SdpProblem::kFree) {
      out << "c free " << e.i << " " << e.value << "\n";
    } else {
      out << "c " << e.block << " " << e.i << " " << e.j << " " << e.value << "\n";
    }
  }
}

SdpProblem ParseProblem(std::istream& in) {
  SdpProblem p;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("ParseProblem: line " + std::to_string(lineno) + ": " + why);
  };
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    if (!header) {
      int version = 0;
      if (key != "diqc-sdp" || !(ls >> version) || version != 1) fail("bad header");
      header = true;
      continue;
    }
    if (key == "free") {
      if (!(ls >> p.num_free)) fail("bad free count");
    } else if (key == "blocks") {
      int k = 0;
      if (!(ls >> k)) fail("bad block count");
      p.block_sizes.resize(k);
      for (int& n : p.block_sizes) {
        if (!(ls >> n)) fail("bad block size");
      }
    } else if (key == "rows") {
      int m = 0;
      if (!(ls >> m)) fail("bad row count");
      p.rhs.assign(m, 0.0);
    } else if (key == "rhs") {
      int r = 0;
      double v = 0;
      if (!(ls >> r >> v) || r < 0 || r >= p.num_rows()) fail("bad rhs");
      p.rhs[r] = v;
    } else if (key == "a" || key == "c") {
      int row = 0;
      if (key == "a" && !(ls >> row)) fail("bad row");
      std::string blk;
      if (!(ls >> blk)) fail("missing block");
      SdpEntry e{row, SdpProblem::kFree, 0, 0, 0.0};
      if (blk == "free") {
        if (!(ls >> e.i >> e.value)) fail("bad free entry");
      } else {
        try {
          e.block = std::stoi(blk);
        } catch (const std::exception&) {
          fail("bad block index");
        }
        if (!(ls >> e.i >> e.j >> e.value)) fail("bad block entry");
      }
      (key == "a" ? p.constraints : p.objective).push_back(e);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!header) throw std::invalid_argument("ParseProblem: empty input");
  p.Validate();
  return p;
}

}  // namespace diqc
