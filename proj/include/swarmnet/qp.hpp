#pragma once

#include "swarmnet/trajectory.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <optional>

namespace swarmnet
{

/// Ego-frame initial state. Position is always the origin.
struct InitialState
{
  Vector3 position = Vector3::Zero();
  Vector3 velocity = Vector3::Zero();
  Vector3 acceleration = Vector3::Zero();
};

/// Per-axis actuation limits.
struct Limits
{
  Vector3 v_max{3.5, 3.5, 3.5};
  Vector3 a_max{20.0, 20.0, 9.6};

  bool valid() const { return (v_max.array() > 0.0).all() && (a_max.array() > 0.0).all(); }
};

/// Learned linear safety constraint g . q <= 0 over the flattened control
/// points. The all-zero vector is vacuous.
struct CollisionConstraint
{
  Eigen::VectorXd g;
};

/// min ||q - q_star||^2  s.t.  eq_matrix q = eq_rhs,  ineq_matrix q <= ineq_rhs.
struct QpProblem
{
  Eigen::VectorXd q_star;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;

  Eigen::Index numVariables() const { return q_star.size(); }
};

enum class QpStatus
{
  optimal,
  infeasible,
};

struct QpSolution
{
  Eigen::VectorXd q;
  double objective = 0.0;
  QpStatus status = QpStatus::infeasible;
  int iterations = 0;
  /// Multipliers of the equality rows followed by the inequality rows.
  Eigen::VectorXd multipliers;
};

struct QpOptions
{
  int max_iterations = 500;
  double tolerance = 1e-8;
};

/// Builds the trajectory-refinement QP: initial position/velocity/acceleration
/// pinned to x0, per-axis boxes on every MINVO velocity and acceleration
/// control point, and the optional row g . q <= -margin.
/// Throws std::invalid_argument on dimension mismatch or invalid limits.
QpProblem assemble(const Eigen::VectorXd& q_star, const InitialState& x0, const Limits& limits,
                   const std::optional<CollisionConstraint>& g, const KnotVector& knots,
                   double margin = 0.0);

/// Dual active-set solve (Goldfarb-Idnani with identity Hessian).
/// Infeasible problems come back with status infeasible; never throws for
/// well-formed problems.
QpSolution solve(const QpProblem& problem, const QpOptions& options = {});

/// Largest violation among stationarity, primal feasibility, dual feasibility
/// and complementarity for a candidate (q, multipliers).
double kkt_residual(const QpProblem& problem, const QpSolution& solution);

void to_json(nlohmann::json& j, const QpProblem& problem);

}  // namespace swarmnet
