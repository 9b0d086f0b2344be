#include "spine/inverse_statics.hpp"

#include <ostream>
#include <sstream>

#include "spine/csv.hpp"
#include "spine/errors.hpp"
#include "spine/numopt.hpp"

namespace spine {

namespace {

/// I_blocks (x) I_b (x) 1'_eta : sums node rows per body within each block.
MatrixXd body_sum(int blocks, int bodies, int eta) {
  MatrixXd S = MatrixXd::Zero(blocks * bodies, blocks * bodies * eta);
  for (int r = 0; r < blocks * bodies; ++r) S.block(r, r * eta, 1, eta).setOnes();
  return S;
}

/// Row indices of the moving bodies inside a block-by-body row layout.
std::vector<Index> moving_rows(int blocks, int bodies) {
  std::vector<Index> rows;
  for (int a = 0; a < blocks; ++a) {
    for (int j = 1; j < bodies; ++j) rows.push_back(static_cast<Index>(a) * bodies + j);
  }
  return rows;
}

MatrixXd select_rows(const MatrixXd& M, const std::vector<Index>& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), M.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = M.row(rows[i]);
  return out;
}

VectorXd select_rows(const VectorXd& v, const std::vector<Index>& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

/// Replaces the fixed body's load in every block by the reaction balancing the others.
void ground_reaction(VectorXd& p, int blocks, int bodies) {
  for (int a = 0; a < blocks; ++a) {
    const Index first = static_cast<Index>(a) * bodies;
    p(first) = -p.segment(first + 1, bodies - 1).sum();
  }
}

}  // namespace

NodalEquilibrium assemble_nodal(const SpineModel& model, const MatrixXd& nodes) {
  if (nodes.rows() != model.dim || nodes.cols() != model.num_nodes()) {
    throw DimensionError("assemble_nodal: node matrix has the wrong shape");
  }
  cable_vectors(model, nodes);  // rejects degenerate cables
  const MatrixXd& C = model.connectivity;
  const Index n = model.num_nodes();
  NodalEquilibrium eq;
  eq.A.resize(n * model.dim, C.rows());
  for (int a = 0; a < model.dim; ++a) {
    const VectorXd member = C * nodes.row(a).transpose();
    eq.A.middleRows(a * n, n) = C.transpose() * member.asDiagonal();
  }
  eq.p = VectorXd::Zero(n * model.dim);
  const int eta = model.nodes_per_body();
  for (int body = 0; body < model.bodies; ++body) {
    const auto& g = model.geometry[static_cast<std::size_t>(body)];
    for (int k = 0; k < eta; ++k) {
      eq.p(model.vertical_axis() * n + body * eta + k) = -g.node_masses(k) * model.gravity;
    }
  }
  return eq;
}

ReductionMatrices reduction_matrices(const SpineModel& model) {
  if (model.bodies < 2 || model.connectivity.cols() % model.bodies != 0 ||
      model.connectivity.cols() / model.bodies != model.nodes_per_body()) {
    throw ConfigError("connectivity columns are not block-ordered by body");
  }
  const int d = model.dim;
  const int eta = model.nodes_per_body();
  const int moving = model.moving_bodies();
  ReductionMatrices r;
  r.W = MatrixXd::Zero(moving * eta, model.num_nodes());
  r.W.rightCols(moving * eta).setIdentity();
  r.Wf = MatrixXd::Zero(d * r.W.rows(), d * r.W.cols());
  for (int a = 0; a < d; ++a) r.Wf.block(a * r.W.rows(), a * r.W.cols(), r.W.rows(), r.W.cols()) = r.W;
  r.K = body_sum(d, moving, eta);
  r.H = MatrixXd::Zero(model.cables + model.bars, model.cables);
  r.H.topRows(model.cables).setIdentity();
  return r;
}

MatrixXd moment_arm_matrix(const SpineModel& model, const MatrixXd& nodes) {
  const Index n = model.num_nodes();
  if (model.dim == 2) {
    MatrixXd B(n, 2 * n);
    B << -MatrixXd(nodes.row(1).transpose().asDiagonal()),
        MatrixXd(nodes.row(0).transpose().asDiagonal());
    return B;
  }
  const MatrixXd X = nodes.row(0).transpose().asDiagonal();
  const MatrixXd Y = nodes.row(1).transpose().asDiagonal();
  const MatrixXd Z = nodes.row(2).transpose().asDiagonal();
  const MatrixXd O = MatrixXd::Zero(n, n);
  MatrixXd B(3 * n, 3 * n);
  B << O, -Z, Y,  //
      Z, O, -X,   //
      -Y, X, O;
  return B;
}

Stacking stacking_from_string(const std::string& name) {
  if (name == "collapsed") return Stacking::collapsed;
  if (name == "with_fixed_body") return Stacking::with_fixed_body;
  if (name == "per_node") return Stacking::per_node;
  throw ConfigError("unknown stacking '" + name +
                    "' (expected collapsed, with_fixed_body or per_node)");
}

std::string to_string(Stacking stacking) {
  switch (stacking) {
    case Stacking::collapsed: return "collapsed";
    case Stacking::with_fixed_body: return "with_fixed_body";
    case Stacking::per_node: return "per_node";
  }
  return "?";
}

RigidBodyEquilibrium assemble_rigid_body(const SpineModel& model, const MatrixXd& nodes,
                                         Stacking stacking) {
  const NodalEquilibrium nodal = assemble_nodal(model, nodes);
  const ReductionMatrices red = reduction_matrices(model);
  const int d = model.dim;
  const int b = model.bodies;
  const int eta = model.nodes_per_body();
  const int moment_blocks = d == 2 ? 1 : 3;

  const MatrixXd AH = nodal.A * red.H;
  const MatrixXd B = moment_arm_matrix(model, nodes);
  const MatrixXd BAH = B * AH;
  const VectorXd Bp = B * nodal.p;

  const MatrixXd force_sum = body_sum(d, b, eta);
  const MatrixXd moment_sum = body_sum(moment_blocks, b, eta);
  MatrixXd Af = force_sum * AH;
  VectorXd pf = force_sum * nodal.p;
  MatrixXd Am = moment_sum * BAH;
  VectorXd pm = moment_sum * Bp;

  RigidBodyEquilibrium eq;
  eq.stacking = stacking;
  if (stacking == Stacking::with_fixed_body) {
    ground_reaction(pf, d, b);
    ground_reaction(pm, moment_blocks, b);
  } else {
    const auto force_rows = moving_rows(d, b);
    Af = select_rows(Af, force_rows);
    pf = select_rows(pf, force_rows);
    if (stacking == Stacking::collapsed) {
      const auto rows = moving_rows(moment_blocks, b);
      Am = select_rows(Am, rows);
      pm = select_rows(pm, rows);
    } else {
      // W B A H per moment component
      std::vector<Index> node_rows;
      const Index n = model.num_nodes();
      for (int a = 0; a < moment_blocks; ++a) {
        for (Index k = eta; k < n; ++k) node_rows.push_back(a * n + k);
      }
      Am = select_rows(BAH, node_rows);
      pm = select_rows(Bp, node_rows);
    }
  }
  eq.force_rows = Af.rows();
  eq.A_b.resize(Af.rows() + Am.rows(), model.cables);
  eq.A_b << Af, Am;
  eq.p_b.resize(pf.size() + pm.size());
  eq.p_b << pf, pm;
  return eq;
}

ForceDensities solve_min_norm_tensions(const RigidBodyEquilibrium& eq, const VectorXd& c_min,
                                       std::size_t index) {
  const Index s = eq.A_b.cols();
  if (c_min.size() != s) throw DimensionError("c_min needs one entry per cable");
  if ((c_min.array() < 0.0).any()) throw InvalidInputError("c_min must be non-negative");
  numopt::QpProblem qp;
  qp.P = 2.0 * MatrixXd::Identity(s, s);
  qp.f = VectorXd::Zero(s);
  qp.Aeq = eq.A_b;
  qp.beq = eq.p_b;
  qp.Ain = -MatrixXd::Identity(s, s);
  qp.bin = -c_min;
  const numopt::QpSolution sol = numopt::solve_qp(qp);
  if (sol.status != numopt::QpStatus::optimal) {
    std::ostringstream msg;
    msg << "tension QP at pose " << index << " returned " << numopt::to_string(sol.status);
    throw InfeasibleError(msg.str(), index);
  }
  ForceDensities out;
  out.q = sol.z;
  out.c_min = c_min;
  out.residual = (eq.A_b * sol.z - eq.p_b).lpNorm<Eigen::Infinity>();
  return out;
}

InputVector rest_lengths_from_densities(const SpineModel& model, const MatrixXd& nodes,
                                        const VectorXd& q) {
  if (q.size() != model.cables) throw DimensionError("one force density per cable required");
  const CableVectors cv = cable_vectors(model, nodes);
  InputVector u(model.cables);
  for (int i = 0; i < model.cables; ++i) {
    if (q(i) < 0.0) throw InvalidInputError("force densities must be non-negative");
    u(i) = cv.lengths(i) - cv.lengths(i) * q(i) / model.cable_stiffness(i);
    if (u(i) < 0.0) {
      std::ostringstream msg;
      msg << "cable " << i << " would need rest length " << u(i) << " m";
      throw NegativeRestLengthError(msg.str(), static_cast<std::size_t>(i));
    }
  }
  return u;
}

InputTrajectory generate_input_trajectory(const SpineModel& model, const Trajectory& reference,
                                          const InverseStaticsOptions& options) {
  const VectorXd c_min = VectorXd::Constant(model.cables, options.c_min);
  InputTrajectory out;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const MatrixXd nodes = node_positions(model, reference.xi[k]);
    const RigidBodyEquilibrium eq = assemble_rigid_body(model, nodes, options.stacking);
    ForceDensities fd = solve_min_norm_tensions(eq, c_min, k);
    InputVector u;
    try {
      u = rest_lengths_from_densities(model, nodes, fd.q);
    } catch (const NegativeRestLengthError& e) {
      throw InfeasibleError(std::string(e.what()) + " at pose " + std::to_string(k), k);
    }
    out.t.push_back(reference.t[k]);
    out.u.push_back(std::move(u));
    out.q.push_back(std::move(fd.q));
    out.residual.push_back(fd.residual);
  }
  return out;
}

void write_input_trajectory_csv(std::ostream& out, const InputTrajectory& inputs) {
  const Index s = inputs.u.empty() ? 0 : inputs.u.front().size();
  std::vector<std::string> header{"t"};
  for (auto& c : csv::numbered("u_ref", s)) header.push_back(std::move(c));
  for (auto& c : csv::numbered("q", s)) header.push_back(std::move(c));
  header.emplace_back("residual");
  csv::write_header(out, header);
  csv::RowWriter row(out);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    row.add(inputs.t[k]).add(inputs.u[k]).add(inputs.q[k]).add(inputs.residual[k]);
    row.end();
  }
}

}  // namespace spine
