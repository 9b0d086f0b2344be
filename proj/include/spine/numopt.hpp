#pragma once

#include <Eigen/Dense>
#include <string_view>

namespace spine::numopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Convex quadratic program
///
///   minimize    1/2 z'Pz + f'z
///   subject to  Aeq z  = beq
///               Ain z <= bin
///
/// Empty constraint blocks are represented by zero-row matrices.
struct QpProblem {
  MatrixXd P;
  VectorXd f;
  MatrixXd Aeq;
  VectorXd beq;
  MatrixXd Ain;
  VectorXd bin;

  Eigen::Index num_variables() const { return f.size(); }

  /// Problem with n variables and no constraints; all blocks zero-initialized.
  static QpProblem unconstrained(Eigen::Index n);
};

enum class QpStatus { optimal, infeasible, max_iterations };

std::string_view to_string(QpStatus status);

struct QpSolution {
  VectorXd z;
  QpStatus status = QpStatus::max_iterations;
  double objective = 0.0;
  /// max of the original equality and inequality violations and the
  /// stationarity and complementarity residuals of the equilibrated problem
  double kkt_residual = 0.0;
  /// Lagrange multipliers of the equality rows
  VectorXd y;
  /// Lagrange multipliers of the inequality rows (>= 0)
  VectorXd lambda;
  int iterations = 0;
};

struct QpSettings {
  int max_iterations = 10000;
  double eps_primal = 1e-9;
  double eps_dual = 1e-9;
  double eps_gap = 1e-10;
  /// normalized certificate threshold for primal infeasibility
  double eps_infeasible = 1e-8;
  double symmetry_tol = 1e-12;
  double psd_tol = 1e-9;
};

/// Primal-dual interior-point solve (Mehrotra predictor-corrector with a
/// sparse LDL' factorization of the regularized KKT system).
///
/// Throws DimensionError on inconsistent shapes and InvalidInputError when
/// P is not symmetric positive semidefinite or data are not finite.
/// Redundant but consistent equality rows are accepted.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

/// Checks shapes, finiteness, symmetry and positive semidefiniteness of P.
void validate(const QpProblem& problem, const QpSettings& settings = {});

struct RankResult {
  Eigen::Index rank = 0;
  /// descending
  VectorXd singular_values;
};

/// rank = count of singular values >= rel_tol * sigma_max.
RankResult numeric_rank(const MatrixXd& M, double rel_tol);

/// Stationary point of min 1/2 z'Pz + f'z s.t. Aeq z = beq by a direct
/// solve of the KKT matrix [P Aeq'; Aeq 0]. Throws SingularSystemError.
VectorXd solve_equality_kkt(const MatrixXd& P, const VectorXd& f, const MatrixXd& Aeq,
                            const VectorXd& beq);

/// Least-squares residual norm min_x ||Ax - b||_2 (via complete orthogonal decomposition).
double least_squares_residual(const MatrixXd& A, const VectorXd& b);

}  // namespace spine::numopt
