#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "spine/errors.hpp"
#include "spine/numopt.hpp"

namespace spine::numopt {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

constexpr double kPrimalReg = 1e-9;
constexpr double kDualReg = 1e-9;
constexpr int kRefinementSteps = 4;
constexpr double kStepFraction = 0.99;
constexpr int kMaxStalledIterations = 50;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Problem after cost normalization and constraint row equilibration.
struct ScaledProblem {
  SpMat P, Aeq, Ain, AeqT, AinT;
  VectorXd f, beq, bin;
  double cost_scale = 1.0;
  VectorXd eq_scale, in_scale;
};

VectorXd row_scaling(const MatrixXd& A) {
  VectorXd scale = VectorXd::Ones(A.rows());
  for (Index i = 0; i < A.rows(); ++i) {
    const double norm = A.row(i).lpNorm<Eigen::Infinity>();
    if (norm > 0.0) {
      scale(i) = 1.0 / norm;
    }
  }
  return scale;
}

ScaledProblem scale_problem(const QpProblem& qp) {
  ScaledProblem sp;
  double cost_max = 0.0;
  if (qp.P.size() > 0) cost_max = qp.P.cwiseAbs().maxCoeff();
  cost_max = std::max(cost_max, inf_norm(qp.f));
  sp.cost_scale = cost_max > 0.0 ? 1.0 / cost_max : 1.0;

  sp.eq_scale = row_scaling(qp.Aeq);
  sp.in_scale = row_scaling(qp.Ain);

  const MatrixXd P = sp.cost_scale * qp.P;
  sp.P = P.sparseView();
  sp.f = sp.cost_scale * qp.f;
  const MatrixXd Aeq = sp.eq_scale.asDiagonal() * qp.Aeq;
  sp.Aeq = Aeq.sparseView();
  sp.beq = sp.eq_scale.cwiseProduct(qp.beq);
  const MatrixXd Ain = sp.in_scale.asDiagonal() * qp.Ain;
  sp.Ain = Ain.sparseView();
  sp.bin = sp.in_scale.cwiseProduct(qp.bin);
  sp.AeqT = sp.Aeq.transpose();
  sp.AinT = sp.Ain.transpose();
  return sp;
}

// Regularized KKT system
//   [ P + Ain' W Ain + rho I    Aeq' ] [dz]   [r1]
//   [ Aeq                    -delta I ] [dy] = [r2]
// solved with iterative refinement against the unregularized operator.
class KktSystem {
 public:
  explicit KktSystem(const ScaledProblem& sp) : sp_(sp), n_(sp.f.size()), me_(sp.beq.size()) {}

  bool factorize(const VectorXd& w) {
    w_ = w;
    SpMat H = sp_.P;
    if (w.size() > 0) {
      H += SpMat(sp_.AinT * w.asDiagonal() * sp_.Ain);
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(H.nonZeros() + 2 * sp_.Aeq.nonZeros() + n_ + me_));
    for (Index k = 0; k < H.outerSize(); ++k) {
      for (SpMat::InnerIterator it(H, k); it; ++it) {
        triplets.emplace_back(it.row(), it.col(), it.value());
      }
    }
    for (Index i = 0; i < n_; ++i) triplets.emplace_back(i, i, kPrimalReg);
    for (Index k = 0; k < sp_.Aeq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sp_.Aeq, k); it; ++it) {
        triplets.emplace_back(n_ + it.row(), it.col(), it.value());
        triplets.emplace_back(it.col(), n_ + it.row(), it.value());
      }
    }
    for (Index i = 0; i < me_; ++i) triplets.emplace_back(n_ + i, n_ + i, -kDualReg);
    SpMat K(n_ + me_, n_ + me_);
    K.setFromTriplets(triplets.begin(), triplets.end());
    if (!analyzed_) {
      ldlt_.analyzePattern(K);
      analyzed_ = true;
      nnz_ = K.nonZeros();
    } else if (K.nonZeros() != nnz_) {
      ldlt_.analyzePattern(K);
      nnz_ = K.nonZeros();
    }
    ldlt_.factorize(K);
    return ldlt_.info() == Eigen::Success;
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd x = ldlt_.solve(rhs);
    double best = residual(rhs, x).lpNorm<Eigen::Infinity>();
    const double target = 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    for (int k = 0; k < kRefinementSteps && best > target; ++k) {
      const VectorXd candidate = x + ldlt_.solve(residual(rhs, x));
      const double r = residual(rhs, candidate).lpNorm<Eigen::Infinity>();
      if (!(r < best)) break;
      x = candidate;
      best = r;
    }
    return x;
  }

 private:
  VectorXd residual(const VectorXd& rhs, const VectorXd& x) const {
    const auto dz = x.head(n_);
    const auto dy = x.tail(me_);
    VectorXd Kx(n_ + me_);
    VectorXd top = sp_.P * dz;
    if (w_.size() > 0) top += sp_.AinT * (w_.cwiseProduct(sp_.Ain * dz));
    if (me_ > 0) top += sp_.AeqT * dy;
    Kx.head(n_) = top;
    if (me_ > 0) Kx.tail(me_) = sp_.Aeq * dz;
    return rhs - Kx;
  }

  const ScaledProblem& sp_;
  Index n_, me_;
  VectorXd w_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
  Index nnz_ = 0;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

}  // namespace

void validate(const QpProblem& qp, const QpSettings& settings) {
  const Index n = qp.f.size();
  if (qp.P.rows() != n || qp.P.cols() != n) {
    throw DimensionError("solve_qp: P must be n x n with n = size(f)");
  }
  if (qp.Aeq.rows() != qp.beq.size() || (qp.Aeq.rows() > 0 && qp.Aeq.cols() != n)) {
    throw DimensionError("solve_qp: Aeq/beq dimensions inconsistent");
  }
  if (qp.Ain.rows() != qp.bin.size() || (qp.Ain.rows() > 0 && qp.Ain.cols() != n)) {
    throw DimensionError("solve_qp: Ain/bin dimensions inconsistent");
  }
  if (!qp.P.allFinite() || !qp.f.allFinite() || !qp.Aeq.allFinite() || !qp.beq.allFinite() ||
      !qp.Ain.allFinite() || !qp.bin.allFinite()) {
    throw InvalidInputError("solve_qp: problem data contain non-finite entries");
  }
  if (n == 0) return;
  const double pmax = qp.P.cwiseAbs().maxCoeff();
  const double asym = (qp.P - qp.P.transpose()).cwiseAbs().maxCoeff();
  if (asym > settings.symmetry_tol * std::max(1.0, pmax)) {
    throw InvalidInputError("solve_qp: P is not symmetric");
  }
  if (pmax == 0.0) return;
  // P + tau I is positive definite iff lambda_min(P) > -tau.
  const double tau = settings.psd_tol * pmax;
  SpMat Ps = qp.P.sparseView();
  for (Index i = 0; i < n; ++i) Ps.coeffRef(i, i) += tau;
  Eigen::SimplicialLLT<SpMat> llt(Ps);
  if (llt.info() != Eigen::Success) {
    throw InvalidInputError("solve_qp: P is not positive semidefinite");
  }
}

QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings) {
  validate(qp, settings);
  const ScaledProblem sp = scale_problem(qp);
  const Index n = sp.f.size();
  const Index me = sp.beq.size();
  const Index mi = sp.bin.size();

  KktSystem kkt(sp);
  VectorXd z(n), y = VectorXd::Zero(me), lambda = VectorXd::Ones(mi), s(mi);

  // Initial point: minimize the cost plus 1/2||Ain z - bin||^2 on the equality manifold.
  {
    if (!kkt.factorize(VectorXd::Ones(mi))) {
      throw SingularSystemError("solve_qp: initial KKT factorization failed");
    }
    VectorXd rhs(n + me);
    rhs.head(n) = -sp.f;
    if (mi > 0) rhs.head(n) += sp.AinT * sp.bin;
    rhs.tail(me) = sp.beq;
    const VectorXd sol = kkt.solve(rhs);
    z = sol.head(n);
    y = sol.tail(me);
    if (mi > 0) {
      s = sp.bin - sp.Ain * z;
      s = s.cwiseMax(1.0);
    }
  }

  QpSolution out;
  out.status = QpStatus::max_iterations;
  int stalled = 0;
  int iter = 0;
  for (; iter < settings.max_iterations; ++iter) {
    const VectorXd Pz = sp.P * z;
    VectorXd AeqTy = me > 0 ? VectorXd(sp.AeqT * y) : VectorXd::Zero(n);
    VectorXd AinTl = mi > 0 ? VectorXd(sp.AinT * lambda) : VectorXd::Zero(n);
    const VectorXd r_d = Pz + sp.f + AeqTy + AinTl;
    const VectorXd Aeqz = me > 0 ? VectorXd(sp.Aeq * z) : VectorXd::Zero(0);
    const VectorXd r_e = Aeqz - sp.beq;
    const VectorXd Ainz = mi > 0 ? VectorXd(sp.Ain * z) : VectorXd::Zero(0);
    const VectorXd r_i = Ainz + s - sp.bin;
    const double mu = mi > 0 ? s.dot(lambda) / static_cast<double>(mi) : 0.0;
    const double max_comp = mi > 0 ? s.cwiseProduct(lambda).maxCoeff() : 0.0;

    const double tol_e = settings.eps_primal * (1.0 + std::max(inf_norm(Aeqz), inf_norm(sp.beq)));
    const double tol_i =
        settings.eps_primal * (1.0 + std::max({inf_norm(Ainz), inf_norm(sp.bin), inf_norm(s)}));
    const double tol_d = settings.eps_dual * (1.0 + std::max({inf_norm(Pz), inf_norm(sp.f),
                                                               inf_norm(AeqTy), inf_norm(AinTl)}));
    const bool primal_ok = inf_norm(r_e) <= tol_e && inf_norm(r_i) <= tol_i;
    const bool dual_ok = inf_norm(r_d) <= tol_d;
    const bool gap_ok = max_comp <= settings.eps_gap;
    if (primal_ok && dual_ok && gap_ok) {
      out.status = QpStatus::optimal;
      break;
    }

    // Farkas certificate: Aeq'y + Ain'lambda ~ 0 with beq'y + bin'lambda < 0.
    if (!primal_ok) {
      const double scale = std::max(inf_norm(y), inf_norm(lambda));
      if (scale > 1e3) {
        const VectorXd cert = (AeqTy + AinTl) / scale;
        const double bdot = (sp.beq.dot(y) + sp.bin.dot(lambda)) / scale;
        if (inf_norm(cert) <= settings.eps_infeasible * 1e2 &&
            bdot < -settings.eps_infeasible * 1e2) {
          out.status = QpStatus::infeasible;
          break;
        }
      }
    }

    const VectorXd w = mi > 0 ? VectorXd(lambda.cwiseQuotient(s)) : VectorXd::Zero(0);
    if (!kkt.factorize(w)) {
      throw SingularSystemError("solve_qp: KKT factorization failed");
    }

    // Solves the Newton system for a given complementarity residual r_c.
    auto newton = [&](const VectorXd& r_c, VectorXd& dz, VectorXd& dy, VectorXd& dl,
                      VectorXd& ds) {
      VectorXd rhs(n + me);
      rhs.head(n) = -r_d;
      VectorXd t;
      if (mi > 0) {
        t = (lambda.cwiseProduct(r_i) - r_c).cwiseQuotient(s);
        rhs.head(n) -= sp.AinT * t;
      }
      rhs.tail(me) = -r_e;
      const VectorXd sol = kkt.solve(rhs);
      dz = sol.head(n);
      dy = sol.tail(me);
      if (mi > 0) {
        const VectorXd Adz = sp.Ain * dz;
        ds = -r_i - Adz;
        dl = w.cwiseProduct(Adz) + t;
      }
    };

    VectorXd dz, dy, dl, ds;
    if (mi == 0) {
      newton(VectorXd::Zero(0), dz, dy, dl, ds);
      z += dz;
      y += dy;
      if (inf_norm(dz) == 0.0 && inf_norm(dy) == 0.0) ++stalled;
      if (stalled > kMaxStalledIterations) break;
      continue;
    }

    // Predictor.
    VectorXd dz_a, dy_a, dl_a, ds_a;
    newton(s.cwiseProduct(lambda), dz_a, dy_a, dl_a, ds_a);
    const double alpha_a = std::min(max_step(s, ds_a), max_step(lambda, dl_a));
    const double mu_a =
        (s + alpha_a * ds_a).dot(lambda + alpha_a * dl_a) / static_cast<double>(mi);
    const double sigma = std::pow(std::clamp(mu_a / mu, 0.0, 1.0), 3);

    // Corrector.
    const VectorXd r_c =
        s.cwiseProduct(lambda) + ds_a.cwiseProduct(dl_a) - VectorXd::Constant(mi, sigma * mu);
    newton(r_c, dz, dy, dl, ds);
    const double alpha =
        std::min(1.0, kStepFraction * std::min(max_step(s, ds), max_step(lambda, dl)));
    z += alpha * dz;
    y += alpha * dy;
    lambda += alpha * dl;
    s += alpha * ds;
    // Keep strictly interior despite roundoff.
    s = s.cwiseMax(1e-300);
    lambda = lambda.cwiseMax(1e-300);

    stalled = alpha < 1e-10 ? stalled + 1 : 0;
    if (stalled > kMaxStalledIterations) break;
  }
  out.iterations = iter;

  out.z = z;
  out.y = sp.eq_scale.cwiseProduct(y) / sp.cost_scale;
  out.lambda = sp.in_scale.cwiseProduct(lambda) / sp.cost_scale;
  out.objective = 0.5 * z.dot(qp.P * z) + qp.f.dot(z);

  // Feasibility is reported in the original units. Stationarity and
  // complementarity are measured on the normalized problem, where the cost
  // has unit magnitude and constraint rows unit infinity norm.
  double res = 0.0;
  if (me > 0) res = std::max(res, inf_norm(qp.Aeq * z - qp.beq));
  VectorXd grad = sp.P * z + sp.f;
  if (me > 0) grad += sp.AeqT * y;
  if (mi > 0) {
    res = std::max(res, (qp.Ain * z - qp.bin).maxCoeff());
    const VectorXd slack = sp.bin - sp.Ain * z;
    for (Index i = 0; i < mi; ++i) {
      res = std::max(res, std::min(std::abs(slack(i)), lambda(i)));
    }
    grad += sp.AinT * lambda;
  }
  out.kkt_residual = std::max(res, inf_norm(grad));
  return out;
}

}  // namespace spine::numopt
