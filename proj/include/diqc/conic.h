#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace diqc {

/// One coefficient of the SDP data. For PSD blocks, (i, j) and (j, i) denote
/// the same symmetric pair: an off-diagonal value v contributes v * (X_ij +
/// X_ji) = 2 v X_ij. For free variables, `block` is kFree and `i` is the
/// variable index (j unused).
struct SdpEntry {
  int row;
  int block;
  int i;
  int j;
  double value;
};

/// Standard-form SDP
///   minimize    c'u + sum_b <C_b, X_b>
///   subject to  F u + sum_b A_b(X_b) = rhs,  X_b PSD,  u free.
/// Scalar nonnegative variables are 1x1 blocks.
struct SdpProblem {
  static constexpr int kFree = -1;

  int num_free = 0;
  std::vector<int> block_sizes;
  std::vector<double> rhs;
  std::vector<SdpEntry> constraints;
  std::vector<SdpEntry> objective;  // `row` ignored

  int num_rows() const { return static_cast<int>(rhs.size()); }
  int num_blocks() const { return static_cast<int>(block_sizes.size()); }

  /// Returns the index of the first of `count` new free variables.
  int AddFree(int count = 1);
  /// Returns the index of a new size x size PSD block.
  int AddBlock(int size);
  /// Returns the index of a new equality row.
  int AddRow(double value);

  void AddFreeCoeff(int row, int var, double value);
  void AddBlockCoeff(int row, int block, int i, int j, double value);
  void AddFreeCost(int var, double value);
  void AddBlockCost(int block, int i, int j, double value);

  /// Index and size checks; throws std::invalid_argument.
  void Validate() const;
};

enum class SdpStatus { kOptimal, kPrimalInfeasible, kDualInfeasible, kMaxIter };

std::string StatusName(SdpStatus status);

struct SdpOptions {
  double tol = 1e-8;
  int max_iter = 200;
};

/// Solution in the coordinates of the original problem. On kOptimal, `free`
/// and `x` are primal optimal, `y` and `s` dual optimal with
/// S_b = C_b - A_b^*(y). On kPrimalInfeasible, `y` is a Farkas ray
/// normalized to rhs'y = 1 with F'y ~ 0 and -A^*(y) ~ PSD. On
/// kDualInfeasible, (`free`, `x`) is an improving ray normalized to objective
/// -1 with F u + A(X) ~ 0.
struct SdpSolution {
  SdpStatus status = SdpStatus::kMaxIter;
  Eigen::VectorXd free;
  std::vector<Eigen::MatrixXd> x;
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> s;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  // Relative KKT measures on the original data (kOptimal only).
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double min_eig_x = 0.0;
  double min_eig_s = 0.0;
  // Residual of the certificate ray (infeasible statuses only).
  double ray_residual = 0.0;
  int iterations = 0;
  std::string message;
  /// Complementarity measure mu at every iterate.
  std::vector<double> mu_history;
};

/// Primal-dual interior point on the homogeneous self-dual embedding with
/// the HKM direction and Mehrotra predictor-corrector. Free variables are
/// eliminated beforehand by a complete orthogonal decomposition of F.
SdpSolution SolveSdp(const SdpProblem& problem, const SdpOptions& options = {});

/// Text dump, one item per line (0-based indices):
///   diqc-sdp 1
///   free <n>
///   blocks <k> <n_1> ... <n_k>
///   rows <m>
///   rhs <row> <value>
///   a <row> free <var> <value>
///   a <row> <block> <i> <j> <value>
///   c free <var> <value>
///   c <block> <i> <j> <value>
void DumpProblem(const SdpProblem& problem, std::ostream& out);
SdpProblem ParseProblem(std::istream& in);

}  // namespace diqc
