#include "spine/numopt.hpp"

#include <Eigen/SVD>
#include <sstream>

#include "spine/errors.hpp"

namespace spine::numopt {

QpProblem QpProblem::unconstrained(Eigen::Index n) {
  QpProblem qp;
  qp.P = MatrixXd::Zero(n, n);
  qp.f = VectorXd::Zero(n);
  qp.Aeq = MatrixXd::Zero(0, n);
  qp.beq = VectorXd::Zero(0);
  qp.Ain = MatrixXd::Zero(0, n);
  qp.bin = VectorXd::Zero(0);
  return qp;
}

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal:
      return "optimal";
    case QpStatus::infeasible:
      return "infeasible";
    case QpStatus::max_iterations:
      return "max_iterations";
  }
  return "unknown";
}

RankResult numeric_rank(const MatrixXd& M, double rel_tol) {
  if (!M.allFinite()) {
    throw InvalidInputError("numeric_rank: matrix has non-finite entries");
  }
  RankResult result;
  if (M.size() == 0) {
    result.singular_values = VectorXd::Zero(0);
    return result;
  }
  Eigen::BDCSVD<MatrixXd> svd(M);
  result.singular_values = svd.singularValues();
  const double smax = result.singular_values(0);
  if (smax <= 0.0) {
    return result;
  }
  for (Eigen::Index i = 0; i < result.singular_values.size(); ++i) {
    if (result.singular_values(i) >= rel_tol * smax) {
      ++result.rank;
    }
  }
  return result;
}

VectorXd solve_equality_kkt(const MatrixXd& P, const VectorXd& f, const MatrixXd& Aeq,
                            const VectorXd& beq) {
  const Eigen::Index n = f.size();
  const Eigen::Index m = beq.size();
  if (P.rows() != n || P.cols() != n || Aeq.rows() != m || (m > 0 && Aeq.cols() != n)) {
    throw DimensionError("solve_equality_kkt: inconsistent dimensions");
  }
  MatrixXd K = MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = P;
  if (m > 0) {
    K.topRightCorner(n, m) = Aeq.transpose();
    K.bottomLeftCorner(m, n) = Aeq;
  }
  VectorXd rhs(n + m);
  rhs << -f, beq;

  Eigen::FullPivLU<MatrixXd> lu(K);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    std::ostringstream msg;
    msg << "solve_equality_kkt: KKT matrix is singular (rank " << lu.rank() << " of " << n + m
        << ")";
    throw SingularSystemError(msg.str());
  }
  return lu.solve(rhs).head(n);
}

double least_squares_residual(const MatrixXd& A, const VectorXd& b) {
  if (A.rows() != b.size()) {
    throw DimensionError("least_squares_residual: inconsistent dimensions");
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
  const VectorXd x = cod.solve(b);
  return (A * x - b).norm();
}

}  // namespace spine::numopt
