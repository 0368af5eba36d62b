#include "diqc/analysis.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "diqc/linalg.h"
#include "diqc/lti.h"

namespace diqc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

AffinePoly Differentiate(const AffinePoly& p, int var) {
  AffinePoly out;
  for (const auto& [e, c] : p.terms()) {
    if (var >= static_cast<int>(e.size()) || e[var] == 0) continue;
    Exponents k = e;
    k[var] -= 1;
    out.AddTerm(k, c * static_cast<double>(e[var]));
  }
  return out;
}

PolyMatrix HStack(const std::vector<PolyMatrix>& parts) {
  int rows = -1, cols = 0;
  for (const auto& m : parts) {
    if (m.cols() == 0) continue;
    if (rows >= 0 && m.rows() != rows) throw std::invalid_argument("HStack: row mismatch");
    rows = m.rows();
    cols += m.cols();
  }
  if (rows < 0) rows = parts.empty() ? 0 : parts.front().rows();
  PolyMatrix out(rows, cols);
  int c = 0;
  for (const auto& m : parts) {
    if (m.cols() == 0) continue;
    out.SetBlock(0, c, m);
    c += m.cols();
  }
  return out;
}

PolyMatrix Constant(const AffinePolyMatrix& m) {
  PolyMatrix out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      out(i, j) = m(i, j).Substitute([](const DecisionRef&) -> double {
        throw std::logic_error("expected a decision-free matrix");
      });
    }
  }
  return out;
}

MatrixXd SymEval(const PolyMatrix& m, const VectorXd& pt) {
  const MatrixXd v = m.Evaluate(pt);
  return 0.5 * (v + v.transpose());
}

double MinEig(const MatrixXd& m) {
  if (m.rows() == 0) return std::numeric_limits<double>::infinity();
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double MaxEig(const MatrixXd& m) {
  if (m.rows() == 0) return -std::numeric_limits<double>::infinity();
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly)
      .eigenvalues()(m.rows() - 1);
}

MatrixXd BlockDiagX(int nx, const MatrixXd& x) {
  MatrixXd out = MatrixXd::Zero(nx + x.rows(), nx + x.rows());
  out.bottomRightCorner(x.rows(), x.rows()) = x;
  return out;
}

std::vector<int> SampleVars(const PolyMatrix& lmi, const std::vector<int>& x, const Region& region) {
  std::set<int> s(x.begin(), x.end());
  for (int v : lmi.Variables()) s.insert(v);
  for (const auto& g : region.generators) {
    for (int v : g.Variables()) s.insert(v);
  }
  return {s.begin(), s.end()};
}

struct FilterCheck {
  MatrixXd x;
  double are_residual = 0.0;
  double grid_residual = 0.0;
};

FilterCheck FactorAt(const MultiplierSet& ms, const VectorXd& lambda) {
  FilterCheck out;
  if (ms.empty()) return out;
  const CombinedMultiplier c = Combine(ms, lambda);
  // Static multipliers leave no filter state: the ARE is empty and P~ = P.
  if (c.psi.states() == 0) {
    out.x = MatrixXd(0, 0);
    return out;
  }
  const JFactor jf = JSpectralFactorize(c.psi, c.m_lambda, ms.nv(), ms.nw());
  out.x = jf.x;
  out.are_residual = jf.are_residual;
  out.grid_residual = JFactorGridResidual(c.psi, c.m_lambda, jf, LogGrid(1e-3, 1e3, 200));
  return out;
}

std::string MultiplierId(const MultiplierSet& ms) {
  std::string id;
  for (const auto& e : ms.entries()) id += (id.empty() ? "" : "+") + e.name;
  return id.empty() ? "none" : id;
}

}  // namespace

AffinePolyMatrix AssembleLmi(const ExtendedSystem& ext, const MultiplierSet& ms,
                             const std::vector<Polynomial>& f, const std::vector<int>& xvars,
                             const AffinePolyMatrix& p, const std::vector<LinExpr>& lambda,
                             const LinExpr& gamma) {
  const int nchi = ext.nchi(), nw = ext.nw(), nd = ext.nd();
  const int n = nchi + nw + nd;
  if (p.rows() != nchi || p.cols() != nchi) throw std::invalid_argument("AssembleLmi: P size");
  if (static_cast<int>(lambda.size()) != ms.size()) {
    throw std::invalid_argument("AssembleLmi: lambda size does not match multipliers");
  }
  if (ms.size() > 0 && ext.nz() != ms.Filter().outputs()) {
    throw std::invalid_argument("AssembleLmi: extended system does not match multipliers");
  }
  std::set<int> pvars;
  for (int v : p.Variables()) pvars.insert(v);
  for (int v : pvars) {
    if (std::find(xvars.begin(), xvars.end(), v) == xvars.end()) {
      throw std::invalid_argument("AssembleLmi: P may only depend on the physical state");
    }
  }

  AffinePolyMatrix tl = p * ext.a;
  tl = tl + tl.Transpose();
  if (!pvars.empty()) {
    if (f.size() != xvars.size()) {
      throw std::invalid_argument("AssembleLmi: state-dependent P needs the vector field");
    }
    for (size_t i = 0; i < xvars.size(); ++i) {
      if (!pvars.count(xvars[i])) continue;
      for (int r = 0; r < nchi; ++r) {
        for (int c = 0; c < nchi; ++c) tl(r, c) += Differentiate(p(r, c), xvars[i]) * f[i];
      }
    }
  }

  AffinePolyMatrix l(n, n);
  l.SetBlock(0, 0, tl);
  if (nw > 0) {
    const AffinePolyMatrix pbw = p * ext.bw;
    l.SetBlock(0, nchi, pbw);
    l.SetBlock(nchi, 0, pbw.Transpose());
  }
  if (nd > 0) {
    const AffinePolyMatrix pbd = p * ext.bd;
    l.SetBlock(0, nchi + nw, pbd);
    l.SetBlock(nchi + nw, 0, pbd.Transpose());
    for (int i = 0; i < nd; ++i) l(nchi + nw + i, nchi + nw + i) = AffinePoly(-gamma);
  }

  if (ext.ne() > 0) {
    const PolyMatrix er = HStack({ext.ce, ext.dew, ext.ded});
    l += AffinePolyMatrix(er.Transpose() * er);
  }
  for (int k = 0; k < ms.size(); ++k) {
    const auto [row, cnt] = ms.OutputRows(k);
    const PolyMatrix zk = HStack({ext.cz.Block(row, 0, cnt, nchi), ext.dzw.Block(row, 0, cnt, nw),
                                  ext.dzd.Block(row, 0, cnt, nd)});
    const PolyMatrix nk = zk.Transpose() * (ms.entry(k).m * zk);
    l += lambda[k] * nk;
  }
  return l;
}

Eigen::MatrixXd Certificate::Storage(const Eigen::VectorXd& point) const {
  MatrixXd v = SymEval(p, point);
  if (npsi > 0) v -= BlockDiagX(nx, filter_x);
  return v + epsilon * MatrixXd::Identity(v.rows(), v.cols());
}

ResidualReport VerifyCertificate(const Certificate& cert, const DiffSystem& ds,
                                 const MultiplierSet& ms, int n_samples, unsigned seed) {
  const ExtendedSystem ext = Extend(ds, ms.Filter());
  std::vector<LinExpr> lam;
  for (int k = 0; k < cert.lambda.size(); ++k) lam.emplace_back(cert.lambda(k));
  const PolyMatrix lmi = Constant(
      AssembleLmi(ext, ms, ds.f, ds.x, AffinePolyMatrix(cert.p), lam, LinExpr(cert.gamma)));

  ResidualReport r;
  MatrixXd x = MatrixXd::Zero(ext.npsi, ext.npsi);
  r.are_ok = r.jfactor_ok = true;
  if (!ms.empty()) {
    try {
      const FilterCheck fc = FactorAt(ms, cert.lambda);
      x = fc.x;
      r.are_residual = fc.are_residual;
      r.jfactor_residual = fc.grid_residual;
      r.are_ok = fc.are_residual <= 1e-8;
      r.jfactor_ok = fc.grid_residual <= 1e-6;
    } catch (const std::exception&) {
      r.are_residual = r.jfactor_residual = std::numeric_limits<double>::infinity();
      r.are_ok = r.jfactor_ok = false;
    }
  }

  const auto vars = SampleVars(lmi, cert.x, cert.region);
  const auto pts = cert.region.Sample(vars, ds.registry.size(), n_samples, seed);
  r.samples = static_cast<int>(pts.size());
  r.lmi_max_eig = -std::numeric_limits<double>::infinity();
  r.ptilde_min_eig = r.storage_min_eig = std::numeric_limits<double>::infinity();
  const MatrixXd bx = BlockDiagX(ext.nx, x);
  for (const auto& pt : pts) {
    r.lmi_max_eig = std::max(r.lmi_max_eig, MaxEig(SymEval(lmi, pt)));
    const MatrixXd pt_tilde = SymEval(cert.p, pt) - bx;
    const double mn = MinEig(pt_tilde);
    r.ptilde_min_eig = std::min(r.ptilde_min_eig, mn);
    r.storage_min_eig = std::min(r.storage_min_eig, mn + cert.epsilon);
  }
  r.lmi_ok = r.lmi_max_eig <= -0.5 * kLmiMargin;
  r.ptilde_ok = r.ptilde_min_eig >= -1e-9;
  r.storage_ok = r.storage_min_eig >= 0.5 * cert.epsilon;
  return r;
}

GainResult MinGain(const DiffSystem& ds, const MultiplierSet& ms, const Region& region,
                   const GainOptions& opt) {
  ds.Validate();
  if (ms.nv() != ds.nv() || ms.nw() != ds.nw()) {
    throw std::invalid_argument("MinGain: multiplier channel split does not match the system");
  }
  if (opt.p_degree < 0) throw std::invalid_argument("MinGain: negative P degree");
  const ExtendedSystem ext = Extend(ds, ms.Filter());
  const int nchi = ext.nchi();

  GainResult res;
  Certificate& cert = res.cert;
  cert.registry = ds.registry;
  cert.x = ds.x;
  cert.nx = ext.nx;
  cert.npsi = ext.npsi;
  cert.region = region;
  cert.multiplier_id = MultiplierId(ms);
  cert.seed = opt.seed;

  auto solve = [&](const MatrixXd* xprev) {
    SosProgram prog(ds.registry);
    const AffinePolyMatrix p = prog.NewSymmetricPolyMatrix(nchi, ds.x, opt.p_degree);
    std::vector<LinExpr> lambda;
    for (int k = 0; k < ms.size(); ++k) {
      lambda.push_back(prog.NewNonneg() + LinExpr(k == 0 ? MultiplierSet::kLambdaMin : 0.0));
      if (opt.lambda_max > 0.0) {
        prog.AddEquality(lambda.back() + prog.NewNonneg() - LinExpr(opt.lambda_max));
      }
    }
    const LinExpr gamma = prog.NewNonneg();
    prog.AddPmi(AssembleLmi(ext, ms, ds.f, ds.x, p, lambda, gamma), region, opt.pmi);
    if (xprev) {
      PmiOptions psd = opt.pmi;
      psd.margin = 0.0;
      prog.AddPmi(-1.0 * (p + AffinePolyMatrix(PolyMatrix::FromNumeric(-BlockDiagX(ext.nx, *xprev)))),
                  region, psd);
    }
    prog.Minimize(gamma);
    const SdpSolution sol = prog.Solve(opt.sdp);
    res.status = sol.status;
    cert.sdp_iterations += sol.iterations;
    if (sol.status != SdpStatus::kOptimal) {
      res.message = "SDP " + StatusName(sol.status) + (sol.message.empty() ? "" : ": " + sol.message);
      return false;
    }
    cert.p = SosProgram::Value(p, sol);
    cert.lambda.resize(ms.size());
    for (int k = 0; k < ms.size(); ++k) {
      cert.lambda(k) = SosProgram::Value(lambda[k], sol);
      // Interior-point round-off may dip below the bounds by ~tol.
      cert.lambda(k) = std::max(cert.lambda(k), k == 0 ? MultiplierSet::kLambdaMin : 0.0);
    }
    cert.gamma = std::max(SosProgram::Value(gamma, sol), 0.0);
    cert.alpha = std::sqrt(cert.gamma);
    return true;
  };

  auto factor = [&]() {
    try {
      cert.filter_x = ms.empty() ? MatrixXd(0, 0) : FactorAt(ms, cert.lambda).x;
      return true;
    } catch (const std::exception& e) {
      res.message = std::string("J-factorization at the optimal lambda failed: ") + e.what();
      return false;
    }
  };

  auto finish = [&]() {
    const auto vars = SampleVars(PolyMatrix(), ds.x, region);
    double pnorm = 0.0;
    for (const auto& pt : region.Sample(vars, ds.registry.size(), opt.verify_samples, opt.seed)) {
      pnorm = std::max(pnorm, SymEval(cert.p, pt).norm());
    }
    cert.epsilon = 1e-6 * (1.0 + pnorm);
    cert.report = VerifyCertificate(cert, ds, ms, opt.verify_samples, opt.seed);
    res.certified = cert.report.ok();
    if (!res.certified && res.message.empty()) res.message = "certificate checks failed";
  };

  if (!solve(nullptr) || !factor()) return res;
  if (ext.npsi > 0) {
    double worst = std::numeric_limits<double>::infinity();
    const auto vars = SampleVars(PolyMatrix(), ds.x, region);
    const MatrixXd bx = BlockDiagX(ext.nx, cert.filter_x);
    for (const auto& pt : region.Sample(vars, ds.registry.size(), opt.verify_samples, opt.seed)) {
      worst = std::min(worst, MinEig(SymEval(cert.p, pt) - bx));
    }
    if (worst < -1e-9) {
      cert.resolved = true;
      const MatrixXd xprev = cert.filter_x;
      if (!solve(&xprev) || !factor()) return res;
    }
  }
  finish();
  return res;
}

double PathEnergy(const std::vector<VectorXd>& path,
                  const std::function<MatrixXd(const VectorXd&)>& metric) {
  const int n = static_cast<int>(path.size());
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("PathEnergy: need an odd number >= 3 of nodes");
  const double h = 1.0 / (n - 1);
  double integral = 0.0;
  for (int k = 0; k < n; ++k) {
    if (!path[k].allFinite()) throw std::invalid_argument("PathEnergy: non-finite path sample");
    VectorXd cs;
    if (k == 0) {
      cs = (-3.0 * path[0] + 4.0 * path[1] - path[2]) / (2 * h);
    } else if (k == n - 1) {
      cs = (3.0 * path[n - 1] - 4.0 * path[n - 2] + path[n - 3]) / (2 * h);
    } else {
      cs = (path[k + 1] - path[k - 1]) / (2 * h);
    }
    const MatrixXd m = metric(path[k]);
    if (MinEig(0.5 * (m + m.transpose())) <= 0.0) {
      throw std::domain_error("PathEnergy: metric is not positive definite on the path");
    }
    const double w = (k == 0 || k == n - 1) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    integral += w * std::sqrt(std::max(0.0, cs.dot(m * cs)));
  }
  integral *= h / 3.0;
  return integral * integral;
}

double PathEnergy(const std::vector<VectorXd>& path, const MatrixXd& metric) {
  return PathEnergy(path, [&](const VectorXd&) { return metric; });
}

CcmResult CcmSynthesize(const ControlPlant& plant, const Region& region, int y_degree,
                        double target_alpha, double robust_delta, const PmiOptions& pmi,
                        const SdpOptions& sdp) {
  const int nx = static_cast<int>(plant.x.size());
  const int nu = static_cast<int>(plant.b.cols());
  const int nd = static_cast<int>(plant.e.cols());
  const int ne = static_cast<int>(plant.c.rows());
  if (static_cast<int>(plant.f.size()) != nx || plant.b.rows() != nx || plant.e.rows() != nx ||
      plant.c.cols() != nx || plant.d.rows() != ne || plant.d.cols() != nu) {
    throw std::invalid_argument("CcmSynthesize: plant dimensions are inconsistent");
  }
  SosProgram prog(plant.registry);
  const auto wv = prog.NewPsd(nx);
  AffinePolyMatrix w(nx, nx);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nx; ++j) w(i, j) = AffinePoly(wv[i][j] + LinExpr(i == j ? 1e-6 : 0.0));
  }
  const AffinePolyMatrix y = prog.NewPolyMatrix(nu, nx, plant.x, y_degree);
  const LinExpr gamma = prog.NewNonneg();

  const PolyMatrix a = Jacobian(plant.f, plant.x);
  AffinePolyMatrix top = a * w + PolyMatrix::FromNumeric(plant.b) * y;
  top = top + top.Transpose();
  const AffinePolyMatrix cwdy = PolyMatrix::FromNumeric(plant.c) * w +
                                PolyMatrix::FromNumeric(plant.d) * y;
  // Optional robustness channel u = K x + w, |w| <= delta |K x|, scaled by mu.
  const bool robust = robust_delta > 0.0;
  const int nr = robust ? nu : 0;
  const LinExpr mu = robust ? prog.NewNonneg() : LinExpr();
  const int iw = nx, id = nx + nr, ie = nx + nr + nd, iv = nx + nr + nd + ne;
  const int n = iv + nr;
  AffinePolyMatrix l(n, n);
  l.SetBlock(0, 0, top);
  l.SetBlock(0, id, AffinePolyMatrix(PolyMatrix::FromNumeric(plant.e)));
  l.SetBlock(id, 0, AffinePolyMatrix(PolyMatrix::FromNumeric(plant.e.transpose())));
  l.SetBlock(ie, 0, cwdy);
  l.SetBlock(0, ie, cwdy.Transpose());
  for (int i = 0; i < nd; ++i) l(id + i, id + i) = AffinePoly(-gamma);
  for (int i = 0; i < ne; ++i) l(ie + i, ie + i) = Polynomial::Constant(-1.0);
  if (robust) {
    const AffinePolyMatrix mb = mu * PolyMatrix::FromNumeric(plant.b);
    const AffinePolyMatrix md = mu * PolyMatrix::FromNumeric(plant.d);
    const AffinePolyMatrix dy = robust_delta * y;
    l.SetBlock(0, iw, mb);
    l.SetBlock(iw, 0, mb.Transpose());
    l.SetBlock(ie, iw, md);
    l.SetBlock(iw, ie, md.Transpose());
    l.SetBlock(iv, 0, dy);
    l.SetBlock(0, iv, dy.Transpose());
    for (int i = 0; i < nu; ++i) {
      l(iw + i, iw + i) = AffinePoly(-mu);
      l(iv + i, iv + i) = AffinePoly(-mu);
    }
  }
  prog.AddPmi(l, region, pmi);
  if (target_alpha > 0.0) {
    prog.AddEquality(gamma + prog.NewNonneg() - LinExpr(target_alpha * target_alpha));
    // [[Z, I], [I, W]] >= 0 bounds W^-1 by Z, so small |Y| + tr Z keeps
    // K = Y W^-1 small instead of letting W and Y shrink together.
    const auto zb = prog.NewPsd(2 * nx);
    LinExpr l1;
    for (int i = 0; i < nx; ++i) {
      l1 += zb[i][i];
      for (int j = 0; j < nx; ++j) {
        prog.AddEquality(zb[i][nx + j] - LinExpr(i == j ? 1.0 : 0.0));
        if (i <= j) prog.AddEquality(zb[nx + i][nx + j] - wv[i][j] - LinExpr(i == j ? 1e-6 : 0.0));
      }
    }
    for (int i = 0; i < y.rows(); ++i) {
      for (int j = 0; j < y.cols(); ++j) {
        for (const auto& [e, c] : y(i, j).terms()) {
          const LinExpr t = prog.NewNonneg();
          prog.AddEquality(t - c - prog.NewNonneg());
          prog.AddEquality(t + c - prog.NewNonneg());
          l1 += t;
        }
      }
    }
    prog.Minimize(l1);
  } else {
    prog.Minimize(gamma);
  }
  const SdpSolution sol = prog.Solve(sdp);

  CcmResult res;
  res.status = sol.status;
  if (sol.status != SdpStatus::kOptimal) {
    res.message = "SDP " + StatusName(sol.status) + (sol.message.empty() ? "" : ": " + sol.message);
    return res;
  }
  res.w = Constant(SosProgram::Value(w, sol)).Evaluate(VectorXd::Zero(plant.registry.size()));
  res.w = 0.5 * (res.w + res.w.transpose()).eval();
  res.y = SosProgram::Value(y, sol);
  res.k = res.y * res.w.inverse();
  res.alpha = std::sqrt(std::max(0.0, SosProgram::Value(gamma, sol)));
  return res;
}

DiffSystem CcmClosedLoop(const ControlPlant& plant, const PolyMatrix& k, const std::vector<int>& w,
                         const std::vector<int>& d) {
  const int nu = static_cast<int>(plant.b.cols());
  const int nd = static_cast<int>(plant.e.cols());
  const int ne = static_cast<int>(plant.c.rows());
  const bool channel = !w.empty();
  if ((channel && static_cast<int>(w.size()) != nu) || static_cast<int>(d.size()) != nd) {
    throw std::invalid_argument("CcmClosedLoop: w/d variable counts do not match the plant");
  }
  if (k.rows() != nu || k.cols() != static_cast<int>(plant.x.size())) {
    throw std::invalid_argument("CcmClosedLoop: gain dimensions do not match the plant");
  }
  DiffSystem ds;
  ds.registry = plant.registry;
  ds.x = plant.x;
  ds.w = w;
  ds.d = d;
  const PolyMatrix b = PolyMatrix::FromNumeric(plant.b);
  const int nx = static_cast<int>(plant.x.size());
  const int nwc = channel ? nu : 0;
  ds.ax = Jacobian(plant.f, plant.x) + b * k;
  ds.bxw = channel ? b : PolyMatrix::Zero(nx, 0);
  ds.bxd = PolyMatrix::FromNumeric(plant.e);
  ds.cv = channel ? k : PolyMatrix::Zero(0, nx);
  ds.dvw = PolyMatrix::Zero(nwc, nwc);
  ds.dvd = PolyMatrix::Zero(nwc, nd);
  ds.ce = PolyMatrix::FromNumeric(plant.c) + PolyMatrix::FromNumeric(plant.d) * k;
  ds.dew = channel ? PolyMatrix::FromNumeric(plant.d) : PolyMatrix::Zero(ne, 0);
  ds.ded = PolyMatrix::Zero(ne, nd);
  ds.Validate();
  return ds;
}

namespace {

nlohmann::json PolyToJson(const Polynomial& p, int nvars) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [e, c] : p.terms()) {
    Exponents k = e;
    k.resize(std::max<size_t>(k.size(), nvars), 0);
    terms.push_back({{"exp", k}, {"coeff", c}});
  }
  return terms;
}

Polynomial PolyFromJson(const nlohmann::json& j, int nvars) {
  Polynomial p(nvars);
  for (const auto& t : j) p.AddTerm(t.at("exp").get<Exponents>(), t.at("coeff").get<double>());
  return p;
}

nlohmann::json MatToJson(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (int j = 0; j < m.cols(); ++j) r[j] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

// Non-finite doubles serialize as null.
double Num(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

MatrixXd MatFromJson(const nlohmann::json& j, int n) {
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json PolyMatrixToJson(const PolyMatrix& m, const VarRegistry& reg) {
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (m(i, j).is_zero()) continue;
      entries.push_back({{"i", i}, {"j", j}, {"text", m(i, j).ToString(reg)},
                         {"terms", PolyToJson(m(i, j), reg.size())}});
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"entries", entries}};
}

PolyMatrix PolyMatrixFromJson(const nlohmann::json& j, int nvars) {
  PolyMatrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  for (int i = 0; i < m.rows(); ++i) {
    for (int k = 0; k < m.cols(); ++k) m(i, k) = Polynomial(nvars);
  }
  for (const auto& e : j.at("entries")) {
    m(e.at("i").get<int>(), e.at("j").get<int>()) = PolyFromJson(e.at("terms"), nvars);
  }
  return m;
}

nlohmann::json CertificateToJson(const Certificate& cert) {
  using nlohmann::json;
  const VarRegistry& reg = cert.registry;
  json p = json::array();
  for (int i = 0; i < cert.p.rows(); ++i) {
    for (int j = i; j < cert.p.cols(); ++j) {
      if (!cert.p(i, j).is_zero()) p.push_back({{"i", i}, {"j", j}, {"terms", PolyToJson(cert.p(i, j), reg.size())}});
    }
  }
  json gens = json::array();
  for (const auto& g : cert.region.generators) {
    gens.push_back({{"text", g.ToString(reg)}, {"terms", PolyToJson(g, reg.size())}});
  }
  json bounds = json::array();
  for (const auto& [v, b] : cert.region.bounds) {
    bounds.push_back({{"var", reg.name(v)}, {"lo", b.first}, {"hi", b.second}});
  }
  const ResidualReport& r = cert.report;
  return json{
      {"format", "diqc-certificate"},
      {"version", 1},
      {"config_hash", cert.config_hash},
      {"seed", cert.seed},
      {"multiplier_id", cert.multiplier_id},
      {"registry", reg.names()},
      {"state", cert.x},
      {"nx", cert.nx},
      {"npsi", cert.npsi},
      {"alpha", cert.alpha},
      {"gamma", cert.gamma},
      {"lambda", std::vector<double>(cert.lambda.data(), cert.lambda.data() + cert.lambda.size())},
      {"epsilon", cert.epsilon},
      {"P", {{"size", cert.p.rows()}, {"entries", p}}},
      {"filter_X", MatToJson(cert.filter_x)},
      {"region", {{"generators", gens}, {"bounds", bounds}}},
      {"residuals",
       {{"samples", r.samples},
        {"lmi_max_eig", r.lmi_max_eig},
        {"ptilde_min_eig", r.ptilde_min_eig},
        {"storage_min_eig", r.storage_min_eig},
        {"are_residual", r.are_residual},
        {"jfactor_residual", r.jfactor_residual},
        {"lmi_ok", r.lmi_ok},
        {"ptilde_ok", r.ptilde_ok},
        {"storage_ok", r.storage_ok},
        {"are_ok", r.are_ok},
        {"jfactor_ok", r.jfactor_ok},
        {"ok", r.ok()}}},
      {"sdp_iterations", cert.sdp_iterations},
      {"resolved", cert.resolved},
  };
}

Certificate CertificateFromJson(const nlohmann::json& j) {
  if (j.value("format", "") != "diqc-certificate") {
    throw std::invalid_argument("not a diqc certificate");
  }
  Certificate c;
  c.registry = VarRegistry(j.at("registry").get<std::vector<std::string>>());
  const int nv = c.registry.size();
  c.config_hash = j.at("config_hash").get<std::string>();
  c.seed = j.at("seed").get<unsigned>();
  c.multiplier_id = j.at("multiplier_id").get<std::string>();
  c.x = j.at("state").get<std::vector<int>>();
  c.nx = j.at("nx").get<int>();
  c.npsi = j.at("npsi").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.gamma = j.at("gamma").get<double>();
  const auto lam = j.at("lambda").get<std::vector<double>>();
  c.lambda = Eigen::Map<const VectorXd>(lam.data(), static_cast<Eigen::Index>(lam.size()));
  c.epsilon = j.at("epsilon").get<double>();
  const int n = j.at("P").at("size").get<int>();
  c.p = PolyMatrix(n, n);
  for (const auto& e : j.at("P").at("entries")) {
    const int r = e.at("i").get<int>(), col = e.at("j").get<int>();
    c.p(r, col) = c.p(col, r) = PolyFromJson(e.at("terms"), nv);
  }
  c.filter_x = MatFromJson(j.at("filter_X"), c.npsi);
  for (const auto& g : j.at("region").at("generators")) {
    c.region.generators.push_back(PolyFromJson(g.at("terms"), nv));
  }
  for (const auto& b : j.at("region").at("bounds")) {
    c.region.bounds[c.registry.IndexOf(b.at("var").get<std::string>())] = {
        b.at("lo").get<double>(), b.at("hi").get<double>()};
  }
  const auto& r = j.at("residuals");
  c.report.samples = r.at("samples").get<int>();
  c.report.lmi_max_eig = Num(r.at("lmi_max_eig"));
  c.report.ptilde_min_eig = Num(r.at("ptilde_min_eig"));
  c.report.storage_min_eig = Num(r.at("storage_min_eig"));
  c.report.are_residual = Num(r.at("are_residual"));
  c.report.jfactor_residual = Num(r.at("jfactor_residual"));
  c.report.lmi_ok = r.at("lmi_ok").get<bool>();
  c.report.ptilde_ok = r.at("ptilde_ok").get<bool>();
  c.report.storage_ok = r.at("storage_ok").get<bool>();
  c.report.are_ok = r.at("are_ok").get<bool>();
  c.report.jfactor_ok = r.at("jfactor_ok").get<bool>();
  c.sdp_iterations = j.at("sdp_iterations").get<int>();
  c.resolved = j.at("resolved").get<bool>();
  return c;
}

}  // namespace diqc
