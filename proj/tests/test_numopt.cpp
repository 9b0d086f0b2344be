#include <gtest/gtest.h>

#include <random>

#include "spine/errors.hpp"
#include "spine/numopt.hpp"

using namespace spine;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using numopt::QpProblem;
using numopt::QpStatus;

namespace {

MatrixXd random_psd(std::mt19937_64& rng, Eigen::Index n, double ridge) {
  std::normal_distribution<double> g;
  MatrixXd L(n, n);
  for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = g(rng);
  return L * L.transpose() + ridge * MatrixXd::Identity(n, n);
}

VectorXd random_vec(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  VectorXd v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(SolveQp, ActiveLowerBound) {
  QpProblem qp = QpProblem::unconstrained(1);
  qp.P(0, 0) = 2.0;
  qp.Ain = MatrixXd::Constant(1, 1, -1.0);
  qp.bin = VectorXd::Constant(1, -1.0);
  const auto sol = numopt::solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::optimal);
  EXPECT_NEAR(sol.z(0), 1.0, 1e-8);
  EXPECT_GT(sol.lambda(0), 0.0);
}

TEST(SolveQp, SymmetricEquality) {
  QpProblem qp = QpProblem::unconstrained(2);
  qp.P = MatrixXd::Identity(2, 2);
  qp.Aeq = MatrixXd::Ones(1, 2);
  qp.beq = VectorXd::Constant(1, 2.0);
  const auto sol = numopt::solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::optimal);
  EXPECT_NEAR(sol.z(0), 1.0, 1e-9);
  EXPECT_NEAR(sol.z(1), 1.0, 1e-9);
}

TEST(SolveQp, HalfspaceProjection) {
  // (z1-2)^2 + (z2-1)^2 = z'z - 4 z1 - 2 z2 + 5
  QpProblem qp = QpProblem::unconstrained(2);
  qp.P = 2.0 * MatrixXd::Identity(2, 2);
  qp.f = VectorXd{{-4.0, -2.0}};
  qp.Ain = MatrixXd::Ones(1, 2);
  qp.bin = VectorXd::Constant(1, 1.0);
  const auto sol = numopt::solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::optimal);
  EXPECT_NEAR(sol.z(0), 1.0, 1e-8);
  EXPECT_NEAR(sol.z(1), 0.0, 1e-8);

  // Independent check: scan the boundary z1 + z2 = 1.
  double best = 1e300;
  double best_z1 = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double z1 = -1.0 + 3.0 * i / 200000.0;
    const double v = (z1 - 2) * (z1 - 2) + (1 - z1 - 1) * (1 - z1 - 1);
    if (v < best) {
      best = v;
      best_z1 = z1;
    }
  }
  EXPECT_NEAR(sol.z(0), best_z1, 2e-5);
}

TEST(SolveQp, DetectsInfeasibility) {
  QpProblem qp = QpProblem::unconstrained(1);
  qp.P(0, 0) = 1.0;
  qp.Ain = MatrixXd{{1.0}, {-1.0}};
  qp.bin = VectorXd{{-1.0, -1.0}};  // z <= -1 and z >= 1
  EXPECT_EQ(numopt::solve_qp(qp).status, QpStatus::infeasible);
}

TEST(SolveQp, RejectsIndefiniteHessian) {
  QpProblem qp = QpProblem::unconstrained(2);
  qp.P = MatrixXd{{1.0, 0.0}, {0.0, -1.0}};
  EXPECT_THROW(numopt::solve_qp(qp), InvalidInputError);
}

TEST(SolveQp, RejectsShapeMismatch) {
  QpProblem qp = QpProblem::unconstrained(2);
  qp.Aeq = MatrixXd::Ones(1, 3);
  qp.beq = VectorXd::Ones(1);
  EXPECT_THROW(numopt::solve_qp(qp), DimensionError);
}

TEST(SolveQp, AcceptsRedundantEqualities) {
  QpProblem qp = QpProblem::unconstrained(2);
  qp.P = MatrixXd::Identity(2, 2);
  qp.Aeq = MatrixXd{{1.0, 1.0}, {2.0, 2.0}};
  qp.beq = VectorXd{{2.0, 4.0}};
  const auto sol = numopt::solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::optimal);
  EXPECT_NEAR(sol.z(0), 1.0, 1e-8);
}

TEST(SolveQp, RandomEqualityMatchesKkt) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + trial % 19;
    const Eigen::Index me = trial % std::max<Eigen::Index>(1, n / 2);
    QpProblem qp = QpProblem::unconstrained(n);
    qp.P = random_psd(rng, n, 0.1);
    qp.f = random_vec(rng, n);
    qp.Aeq = MatrixXd::Zero(me, n);
    for (Eigen::Index r = 0; r < me; ++r) qp.Aeq.row(r) = random_vec(rng, n).transpose();
    qp.beq = random_vec(rng, me);
    const auto sol = numopt::solve_qp(qp);
    ASSERT_EQ(sol.status, QpStatus::optimal) << "trial " << trial;
    const VectorXd ref = numopt::solve_equality_kkt(qp.P, qp.f, qp.Aeq, qp.beq);
    EXPECT_LE((sol.z - ref).lpNorm<Eigen::Infinity>(), 1e-8) << "trial " << trial;
  }
}

TEST(SolveQp, BoxConstrainedGridOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  const int grid = 1000;  // 1e6 points on [-1, 1]^2
  const double h = 2.0 / grid;
  for (int trial = 0; trial < 20; ++trial) {
    QpProblem qp = QpProblem::unconstrained(2);
    qp.P = random_psd(rng, 2, 0.2);
    qp.f = VectorXd{{c(rng), c(rng)}};
    qp.Ain = MatrixXd(4, 2);
    qp.Ain << MatrixXd::Identity(2, 2), -MatrixXd::Identity(2, 2);
    qp.bin = VectorXd::Ones(4);
    const auto sol = numopt::solve_qp(qp);
    ASSERT_EQ(sol.status, QpStatus::optimal);

    double best = 1e300;
    Eigen::Vector2d arg;
    for (int i = 0; i <= grid; ++i) {
      for (int j = 0; j <= grid; ++j) {
        const Eigen::Vector2d z(-1.0 + h * i, -1.0 + h * j);
        const double v = 0.5 * z.dot(qp.P * z) + qp.f.dot(z);
        if (v < best) {
          best = v;
          arg = z;
        }
      }
    }
    const double obj = 0.5 * sol.z.dot(qp.P * sol.z) + qp.f.dot(sol.z);
    EXPECT_LE(obj, best + 1e-9 * std::abs(best));
    EXPECT_LE((sol.z - arg).lpNorm<Eigen::Infinity>(), 2.0 * h) << "trial " << trial;
  }
}

TEST(SolveQp, AgreesWithKktOnRandomPsd) {
  std::mt19937_64 rng(3);
  const MatrixXd P = random_psd(rng, 5, 0.5);
  const VectorXd f = random_vec(rng, 5);
  MatrixXd Aeq(2, 5);
  Aeq.row(0) = random_vec(rng, 5).transpose();
  Aeq.row(1) = random_vec(rng, 5).transpose();
  const VectorXd beq = random_vec(rng, 2);
  QpProblem qp = QpProblem::unconstrained(5);
  qp.P = P;
  qp.f = f;
  qp.Aeq = Aeq;
  qp.beq = beq;
  const auto sol = numopt::solve_qp(qp);
  EXPECT_LE((sol.z - numopt::solve_equality_kkt(P, f, Aeq, beq)).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(SolveQp, InactiveConstraintsLeaveUnconstrainedOptimum) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd P = random_psd(rng, 4, 1.0);
    const VectorXd f = random_vec(rng, 4);
    const VectorXd z0 = P.ldlt().solve(-f);
    QpProblem qp = QpProblem::unconstrained(4);
    qp.P = P;
    qp.f = f;
    qp.Ain = MatrixXd::Identity(4, 4);
    qp.bin = z0.array() + 1.0;
    const auto sol = numopt::solve_qp(qp);
    ASSERT_EQ(sol.status, QpStatus::optimal);
    EXPECT_LE((sol.z - z0).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_LE(sol.lambda.maxCoeff(), 1e-7);
  }
}

TEST(EqualityKkt, Examples) {
  const VectorXd z = numopt::solve_equality_kkt(MatrixXd::Identity(2, 2), VectorXd::Zero(2),
                                                MatrixXd::Ones(1, 2), VectorXd::Constant(1, 2.0));
  EXPECT_NEAR(z(0), 1.0, 1e-12);
  EXPECT_NEAR(z(1), 1.0, 1e-12);
  const VectorXd u = numopt::solve_equality_kkt(2.0 * MatrixXd::Identity(2, 2), VectorXd{{-4.0, -2.0}},
                                                MatrixXd(0, 2), VectorXd(0));
  EXPECT_NEAR(u(0), 2.0, 1e-12);
  EXPECT_NEAR(u(1), 1.0, 1e-12);
}

TEST(EqualityKkt, SingularThrows) {
  EXPECT_THROW(numopt::solve_equality_kkt(MatrixXd::Zero(2, 2), VectorXd::Ones(2), MatrixXd(0, 2),
                                          VectorXd(0)),
               SingularSystemError);
}

TEST(NumericRank, Examples) {
  EXPECT_EQ(numopt::numeric_rank(MatrixXd::Identity(3, 3), 1e-10).rank, 3);
  EXPECT_EQ(numopt::numeric_rank(MatrixXd::Zero(4, 6), 1e-10).rank, 0);
  MatrixXd M(3, 3);
  M << 1, 2, 3, 2, 4, 6, 0, 1, 1;
  const auto r = numopt::numeric_rank(M, 1e-10);
  EXPECT_EQ(r.rank, 2);
  EXPECT_GE(r.singular_values(0), r.singular_values(1));
}

TEST(LeastSquares, ConsistentAndInconsistent) {
  const MatrixXd A = MatrixXd{{1.0}, {1.0}};
  EXPECT_NEAR(numopt::least_squares_residual(A, VectorXd{{2.0, 2.0}}), 0.0, 1e-12);
  EXPECT_NEAR(numopt::least_squares_residual(A, VectorXd{{1.0, -1.0}}), std::sqrt(2.0), 1e-12);
}
