#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "diqc/linalg.h"
#include "diqc/state_space.h"

namespace diqc {

/// One factorized multiplier Pi = Psi~ M Psi acting on (v, w).
struct MultiplierEntry {
  std::string name;
  StateSpace psi;
  Eigen::MatrixXd m;
};

/// An ordered family of delta-IQC multipliers over the channel split
/// (nv, nw), together with the aggregated filter realization.
class MultiplierSet {
 public:
  /// Lower bound imposed on lambda_1 (the open condition lambda_1 > 0).
  static constexpr double kLambdaMin = 1e-6;

  MultiplierSet(int nv, int nw) : nv_(nv), nw_(nw) {}

  /// Appends an entry; the filter must be stable with nv + nw inputs and M
  /// symmetric.
  void Add(MultiplierEntry entry);

  int nv() const { return nv_; }
  int nw() const { return nw_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  const std::vector<MultiplierEntry>& entries() const { return entries_; }
  const MultiplierEntry& entry(int k) const { return entries_.at(k); }

  /// Stacked filter of all entries (shared inputs).
  StateSpace Filter() const;
  /// (first row, row count) of entry k within Filter()'s outputs.
  std::pair<int, int> OutputRows(int k) const;

  /// True when entry 0 is the normalized bound diag(I, -I) with identity
  /// filter. Sets without it are accepted but flagged.
  bool FirstIsNormBound() const;

 private:
  int nv_;
  int nw_;
  std::vector<MultiplierEntry> entries_;
};

/// eta(w) = (w^2 + 0.08 w^4) / (1 + 0.13 w^2 + 0.02 w^4).
double DelayEta(double omega);
/// Stable minimum-phase psi with |psi(jw)|^2 = eta(w).
RationalFunction DelayEtaFactor();

/// The two delta-IQCs for w = v(t - theta) - v(t), theta in [0, theta_max],
/// on a scalar channel:
///   |v|^2 - |v + w|^2 >= 0 and eta(theta_max w) |v|^2 - |w|^2 >= 0.
MultiplierSet DelayMultipliers(double theta_max);

/// Static Psi = I, M = diag(I_nv, -I_nw).
MultiplierEntry NormBoundMultiplier(int nv, int nw);

struct Assumption1Entry {
  double min_vv = 0.0;  // min eigenvalue of Pi_vv over the grid
  double max_ww = 0.0;  // max eigenvalue of Pi_ww over the grid
  bool vv_ok = false;
  bool ww_ok = false;
  bool pass() const { return vv_ok && ww_ok; }
};

struct Assumption1Report {
  std::vector<Assumption1Entry> entries;
  bool all_pass() const;
};

/// Pi_vv(jw) >= 0 and Pi_ww(jw) <= 0 on `grid` (to 1e-9) for every entry.
Assumption1Report CheckAssumption1(const MultiplierSet& ms,
                                   const std::vector<double>& grid);

/// Pi_lambda = sum_k lambda_k Pi_k on the stacked filter.
struct CombinedMultiplier {
  StateSpace psi;
  Eigen::MatrixXd m_lambda;
  Eigen::MatrixXd q, s, r;  // partition against filter states / feedthrough
};

/// Requires |lambda| = ms.size(), lambda_1 >= kLambdaMin, lambda_k >= 0.
CombinedMultiplier Combine(const MultiplierSet& ms, const Eigen::VectorXd& lambda);

/// Drives the filter with samples (v_k, w_k) (rows are time samples) from the
/// zero state using RK4 with linearly interpolated inputs and returns
/// int_0^{t_k} z'Mz dt at every sample. Rejects dt > 0.1 / |A|_2.
std::vector<double> HardIqcPartialIntegrals(const StateSpace& psi,
                                            const Eigen::MatrixXd& m,
                                            const Eigen::MatrixXd& v,
                                            const Eigen::MatrixXd& w, double dt);

}  // namespace diqc
