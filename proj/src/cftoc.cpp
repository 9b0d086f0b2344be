#include <cmath>
#include <sstream>

#include "spine/errors.hpp"
#include "spine/mpc.hpp"

namespace spine::mpc {

namespace {

// Dense row-by-row builder for A z <= b or A z = b.
class RowBlock {
 public:
  explicit RowBlock(Index cols) : cols_(cols) {}

  /// Starts a new row with right-hand side `rhs`; returns its index.
  Index add_row(double rhs) {
    rows_.emplace_back();
    rhs_.push_back(rhs);
    return static_cast<Index>(rhs_.size()) - 1;
  }
  void set(Index row, Index col, double value) {
    rows_[static_cast<std::size_t>(row)].emplace_back(col, value);
  }

  void to_dense(MatrixXd& A, VectorXd& b) const {
    A = MatrixXd::Zero(static_cast<Index>(rows_.size()), cols_);
    b.resize(static_cast<Index>(rhs_.size()));
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      for (const auto& [c, v] : rows_[r]) A(static_cast<Index>(r), c) += v;
      b(static_cast<Index>(r)) = rhs_[r];
    }
  }

 private:
  Index cols_;
  std::vector<std::vector<std::pair<Index, double>>> rows_;
  std::vector<double> rhs_;
};

void check_lin(const LinearizedDynamics& lin, Index n, Index m) {
  if (lin.discretization == Discretization::none) {
    throw InvalidInputError("CFTOC needs discretized dynamics");
  }
  if (lin.A.rows() != n || lin.A.cols() != n || lin.B.rows() != n || lin.B.cols() != m ||
      lin.c.size() != n) {
    throw DimensionError("linearized dynamics do not match the state/input dimensions");
  }
}

void check_window(const std::vector<VectorXd>& window, std::size_t needed, Index dim,
                  const char* what) {
  if (window.size() < needed) {
    std::ostringstream msg;
    msg << what << " window has " << window.size() << " entries, horizon needs " << needed;
    throw InvalidInputError(msg.str());
  }
  for (const auto& v : window) {
    if (v.size() != dim) throw DimensionError(std::string(what) + " window has wrong dimension");
  }
}

/// x_{k+1} = A x_k + B u_k + c for k = 0..N-1, and x_0 = xi_now.
void add_dynamics(RowBlock& eq, const VariableLayout& L, const LinearizedDynamics& lin,
                  const VectorXd& xi_now) {
  const Index n = L.state_dim;
  for (int k = 0; k < L.horizon; ++k) {
    for (Index i = 0; i < n; ++i) {
      const Index r = eq.add_row(lin.c(i));
      eq.set(r, L.state(k + 1) + i, 1.0);
      for (Index j = 0; j < n; ++j) {
        if (lin.A(i, j) != 0.0) eq.set(r, L.state(k) + j, -lin.A(i, j));
      }
      for (Index j = 0; j < L.input_dim; ++j) {
        if (lin.B(i, j) != 0.0) eq.set(r, L.input(k) + j, -lin.B(i, j));
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    const Index r = eq.add_row(xi_now(i));
    eq.set(r, L.state(0) + i, 1.0);
  }
}

/// |z[a + i] - z[b + i]| <= bound for i < count (b < 0: compare against `offset`).
void add_inf_norm_box(RowBlock& in, Index a, Index b, Index count, double bound,
                      const VectorXd* offset = nullptr) {
  for (Index i = 0; i < count; ++i) {
    const double o = offset ? (*offset)(i) : 0.0;
    Index r = in.add_row(bound + o);
    in.set(r, a + i, 1.0);
    if (b >= 0) in.set(r, b + i, -1.0);
    r = in.add_row(bound - o);
    in.set(r, a + i, -1.0);
    if (b >= 0) in.set(r, b + i, 1.0);
  }
}

/// Adds ||z[first..first+n) - target||^2_diag(w) to (P, f, constant).
void add_tracking(MatrixXd& P, VectorXd& f, double& constant, Index first,
                  const std::vector<std::pair<Index, double>>& weights, const VectorXd& target) {
  for (const auto& [i, w] : weights) {
    if (w == 0.0) continue;
    P(first + i, first + i) += 2.0 * w;
    f(first + i) -= 2.0 * w * target(i);
    constant += w * target(i) * target(i);
  }
}

}  // namespace

SmoothingConfig SmoothingConfig::for_model(const SpineModel& model) {
  SmoothingConfig c;
  const int d = model.dim;
  for (int j = 0; j < model.moving_bodies(); ++j) {
    const Index p = model.pose_offset(j);
    for (int a = 0; a < d; ++a) c.position_coords.push_back(p + a);
    for (int a = d; a < model.pose_dim(); ++a) c.angle_coords.push_back(p + a);
    c.smoothing_slices.emplace_back(p, model.pose_dim());
    c.height_coords.push_back(p + model.vertical_axis());
  }
  return c;
}

void SmoothingConfig::validate(Index state_dim, Index input_dim) const {
  if (N < 1) throw ConfigError("smoothing horizon N must be >= 1");
  if (input_dim < 1) throw ConfigError("smoothing controller needs inputs");
  for (double w : {u_min, u_max, w1, w2, w3, w4, w5, w6, w7, w8, w9, w10, w11}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("smoothing constants must be finite and non-negative");
    }
  }
  if (u_min > u_max) throw ConfigError("smoothing u_min exceeds u_max");
  if (smoothing_slices.size() > 3) {
    throw ConfigError("at most three state-smoothing slices (w4, w5, w6)");
  }
  auto check = [state_dim](Index i) {
    if (i < 0 || i >= state_dim) throw ConfigError("smoothing index outside the state");
  };
  for (Index i : position_coords) check(i);
  for (Index i : angle_coords) check(i);
  for (Index i : height_coords) check(i);
  for (const auto& [first, count] : smoothing_slices) {
    check(first);
    check(first + count - 1);
  }
}

TrackingConfig TrackingConfig::for_model(const SpineModel& model) {
  TrackingConfig c;
  for (int j = 0; j < model.moving_bodies(); ++j) {
    for (int a = 0; a < model.pose_dim(); ++a) c.tracked_coords.push_back(model.pose_offset(j) + a);
  }
  c.height_coord = model.vertical_axis();
  return c;
}

void TrackingConfig::validate(Index state_dim, Index input_dim) const {
  if (N < 1) throw ConfigError("tracking horizon N must be >= 1");
  if (input_dim < 1) throw ConfigError("tracking controller needs inputs");
  for (double w : {u_min, w1, w2, w3}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("tracking constants must be finite and non-negative");
    }
  }
  for (Index i : tracked_coords) {
    if (i < 0 || i >= state_dim) throw ConfigError("tracking index outside the state");
  }
  if (height_coord < 0 || height_coord >= state_dim) {
    throw ConfigError("tracking height index outside the state");
  }
}

CftocProblem build_cftoc_smoothing(const SmoothingConfig& config, const LinearizedDynamics& lin,
                                   const VectorXd& xi_now, const VectorXd& u_prev,
                                   const std::vector<VectorXd>& reference) {
  const Index n = xi_now.size();
  const Index m = u_prev.size();
  config.validate(n, m);
  check_lin(lin, n, m);
  const int N = config.N;
  check_window(reference, static_cast<std::size_t>(N + 1), n, "reference state");

  CftocProblem prob;
  VariableLayout& L = prob.layout;
  L.state_dim = n;
  L.input_dim = m;
  L.horizon = N;
  L.input_steps = N + 1;
  L.epigraph = N;
  const Index nz = L.size();

  RowBlock eq(nz);
  add_dynamics(eq, L, lin, xi_now);

  RowBlock in(nz);
  const VectorXd lower = VectorXd::Constant(m, config.u_min);
  const VectorXd upper = VectorXd::Constant(m, config.u_max);
  for (int k = 0; k <= N; ++k) {
    for (Index i = 0; i < m; ++i) {
      Index r = in.add_row(upper(i));
      in.set(r, L.input(k) + i, 1.0);
      r = in.add_row(-lower(i));
      in.set(r, L.input(k) + i, -1.0);
    }
  }
  add_inf_norm_box(in, L.input(0), -1, m, config.w1, &u_prev);
  for (int k = 1; k < N; ++k) add_inf_norm_box(in, L.input(k), L.input(0), m, config.w2);
  add_inf_norm_box(in, L.input(N), L.input(0), m, config.w3);

  const double slice_bounds[3] = {config.w4, config.w5, config.w6};
  for (int k = 1; k <= N; ++k) {
    for (std::size_t s = 0; s < config.smoothing_slices.size(); ++s) {
      const auto [first, count] = config.smoothing_slices[s];
      add_inf_norm_box(in, L.state(k) + first, L.state(k - 1) + first, count, slice_bounds[s]);
    }
    for (std::size_t h = 0; h + 1 < config.height_coords.size(); ++h) {
      const Index r = in.add_row(-config.w7);
      in.set(r, L.state(k) + config.height_coords[h], 1.0);
      in.set(r, L.state(k) + config.height_coords[h + 1], -1.0);
    }
  }
  // t_k >= |u_k - u_{k-1}|, with u_{-1} = u_prev
  for (int k = 0; k < N; ++k) {
    for (Index i = 0; i < m; ++i) {
      for (double sign : {1.0, -1.0}) {
        const Index r = in.add_row(k == 0 ? sign * u_prev(i) : 0.0);
        in.set(r, L.input(k) + i, sign);
        if (k > 0) in.set(r, L.input(k - 1) + i, -sign);
        in.set(r, L.epigraph_var(k), -1.0);
      }
    }
  }

  numopt::QpProblem& qp = prob.qp;
  qp.P = MatrixXd::Zero(nz, nz);
  qp.f = VectorXd::Zero(nz);
  for (int k = 0; k <= N; ++k) {
    std::vector<std::pair<Index, double>> q;
    const double wp = std::pow(config.w9, k);
    const double wa = std::pow(config.w10, k);
    for (Index i : config.position_coords) q.emplace_back(i, wp);
    for (Index i : config.angle_coords) q.emplace_back(i, wa);
    add_tracking(qp.P, qp.f, prob.constant_cost, L.state(k), q, reference[static_cast<std::size_t>(k)]);
  }
  for (int k = 1; k <= N; ++k) {
    const double w = std::pow(config.w11, k);
    if (w == 0.0) continue;
    for (const auto* coords : {&config.position_coords, &config.angle_coords}) {
      for (Index i : *coords) {
        const Index a = L.state(k) + i;
        const Index b = L.state(k - 1) + i;
        qp.P(a, a) += 2.0 * w;
        qp.P(b, b) += 2.0 * w;
        qp.P(a, b) -= 2.0 * w;
        qp.P(b, a) -= 2.0 * w;
      }
    }
  }
  for (int k = 0; k < N; ++k) qp.f(L.epigraph_var(k)) += config.w8;

  eq.to_dense(qp.Aeq, qp.beq);
  in.to_dense(qp.Ain, qp.bin);
  return prob;
}

CftocProblem build_cftoc_tracking(const TrackingConfig& config, const LinearizedDynamics& lin,
                                  const VectorXd& xi_now, const std::vector<VectorXd>& reference,
                                  const std::vector<VectorXd>& reference_inputs) {
  const Index n = xi_now.size();
  const Index m = lin.B.cols();
  config.validate(n, m);
  check_lin(lin, n, m);
  const int N = config.N;
  check_window(reference, static_cast<std::size_t>(N + 1), n, "reference state");
  check_window(reference_inputs, static_cast<std::size_t>(N), m, "reference input");

  CftocProblem prob;
  VariableLayout& L = prob.layout;
  L.state_dim = n;
  L.input_dim = m;
  L.horizon = N;
  L.input_steps = N;
  L.epigraph = 0;
  const Index nz = L.size();

  RowBlock eq(nz);
  add_dynamics(eq, L, lin, xi_now);

  RowBlock in(nz);
  for (int k = 0; k < N; ++k) {
    for (Index i = 0; i < m; ++i) {
      const Index r = in.add_row(-config.u_min);
      in.set(r, L.input(k) + i, -1.0);
    }
  }
  for (int k = 1; k <= N; ++k) {
    const Index r = in.add_row(-config.w1);
    in.set(r, L.state(k) + config.height_coord, -1.0);
  }

  numopt::QpProblem& qp = prob.qp;
  qp.P = MatrixXd::Zero(nz, nz);
  qp.f = VectorXd::Zero(nz);
  std::vector<std::pair<Index, double>> Q;
  for (Index i : config.tracked_coords) Q.emplace_back(i, config.w2);
  std::vector<std::pair<Index, double>> R;
  for (Index i = 0; i < m; ++i) R.emplace_back(i, config.w3);
  for (int k = 0; k <= N; ++k) {
    add_tracking(qp.P, qp.f, prob.constant_cost, L.state(k), Q, reference[static_cast<std::size_t>(k)]);
  }
  for (int k = 0; k < N; ++k) {
    add_tracking(qp.P, qp.f, prob.constant_cost, L.input(k), R,
                 reference_inputs[static_cast<std::size_t>(k)]);
  }

  eq.to_dense(qp.Aeq, qp.beq);
  in.to_dense(qp.Ain, qp.bin);
  return prob;
}

}  // namespace spine::mpc
