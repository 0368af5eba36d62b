#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace diqc {

/// Continuous-time LTI realization x' = Ax + Bu, y = Cx + Du.
struct StateSpace {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  StateSpace() = default;
  StateSpace(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c,
             Eigen::MatrixXd d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
    Validate();
  }

  /// Static gain y = Du with no states.
  static StateSpace Static(const Eigen::MatrixXd& d) {
    return StateSpace(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, d.cols()),
                      Eigen::MatrixXd(d.rows(), 0), d);
  }

  int states() const { return static_cast<int>(A.rows()); }
  int inputs() const { return static_cast<int>(D.cols()); }
  int outputs() const { return static_cast<int>(D.rows()); }

  void Validate() const {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n ||
        C.rows() != D.rows() || B.cols() != D.cols()) {
      throw std::invalid_argument("StateSpace: inconsistent dimensions");
    }
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite()) {
      throw std::invalid_argument("StateSpace: non-finite entries");
    }
  }
};

}  // namespace diqc
