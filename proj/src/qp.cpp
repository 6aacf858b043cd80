#include "swarmnet/qp.hpp"

#include "swarmnet/minvo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmnet
{

namespace
{

// Spreads a per-axis coefficient row over the flattened [x y z]-interleaved
// control-point vector.
Eigen::RowVectorXd axis_row(const Eigen::RowVectorXd& coeffs, int axis)
{
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3 * coeffs.size());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) row(3 * i + axis) = coeffs(i);
  return row;
}

void append_box_rows(const Eigen::MatrixXd& map, const Vector3& bound,
                     std::vector<Eigen::RowVectorXd>& rows, std::vector<double>& rhs)
{
  for (Eigen::Index r = 0; r < map.rows(); ++r)
    for (int axis = 0; axis < 3; ++axis)
    {
      const Eigen::RowVectorXd row = axis_row(map.row(r), axis);
      rows.push_back(row);
      rhs.push_back(bound(axis));
      rows.push_back(-row);
      rhs.push_back(bound(axis));
    }
}

}  // namespace

QpProblem assemble(const Eigen::VectorXd& q_star, const InitialState& x0, const Limits& limits,
                   const std::optional<CollisionConstraint>& g, const KnotVector& knots,
                   double margin)
{
  const int n_cp = knots.numControlPoints();
  if (knots.degree != kSplineDegree || n_cp < kSplineDegree + 1)
    throw std::invalid_argument("assemble: knots must describe a cubic spline");
  const Eigen::Index n = 3 * n_cp;
  if (q_star.size() != n)
    throw std::invalid_argument("assemble: q_star has " + std::to_string(q_star.size()) +
                                " entries, expected " + std::to_string(n));
  if (g && g->g.size() != n)
    throw std::invalid_argument("assemble: g has " + std::to_string(g->g.size()) +
                                " entries, expected " + std::to_string(n));
  if (!limits.valid()) throw std::invalid_argument("assemble: limits must be positive");

  QpProblem prob;
  prob.q_star = q_star;

  // Clamped start: position = P0, velocity and acceleration are the first
  // control points of the derivative splines.
  const Eigen::MatrixXd d1 = derivative_cp_map(knots);
  const Eigen::MatrixXd d2 = derivative_cp_map(derivative_knots(knots)) * d1;
  Eigen::RowVectorXd pos_row = Eigen::RowVectorXd::Zero(n_cp);
  pos_row(0) = 1.0;
  const Eigen::RowVectorXd start_rows[3] = {pos_row, d1.row(0), d2.row(0)};
  const Vector3 start_values[3] = {x0.position, x0.velocity, x0.acceleration};

  prob.eq_matrix.resize(9, n);
  prob.eq_rhs.resize(9);
  for (int k = 0; k < 3; ++k)
    for (int axis = 0; axis < 3; ++axis)
    {
      prob.eq_matrix.row(3 * k + axis) = axis_row(start_rows[k], axis);
      prob.eq_rhs(3 * k + axis) = start_values[k](axis);
    }

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  append_box_rows(minvo_velocity_map(knots), limits.v_max, rows, rhs);
  append_box_rows(minvo_acceleration_map(knots), limits.a_max, rows, rhs);
  if (g)
  {
    rows.push_back(g->g.transpose());
    rhs.push_back(-margin);
  }

  prob.ineq_matrix.resize(static_cast<Eigen::Index>(rows.size()), n);
  prob.ineq_rhs.resize(static_cast<Eigen::Index>(rhs.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
  {
    prob.ineq_matrix.row(static_cast<Eigen::Index>(i)) = rows[i];
    prob.ineq_rhs(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  return prob;
}

namespace
{

struct ActiveSet
{
  std::vector<Eigen::Index> index;  // constraint index: equalities first, then inequalities
  std::vector<double> lambda;
};

// Active normals are kept factorised as N_A = J[:, :m] R with J orthogonal and
// R upper triangular; adding or dropping a constraint is a sweep of Givens
// rotations rather than a fresh factorisation.
class DualActiveSet
{
public:
  DualActiveSet(const QpProblem& prob, const QpOptions& opts)
      : prob_(prob), opts_(opts), n_eq_(prob.eq_matrix.rows()), n_in_(prob.ineq_matrix.rows()),
        n_(prob.numVariables()), J_(Eigen::MatrixXd::Identity(n_, n_)), R_(Eigen::MatrixXd::Zero(n_, n_)),
        row_norm_(prob.ineq_matrix.rowwise().norm())
  {
  }

  QpSolution run()
  {
    QpSolution sol;
    sol.q = prob_.q_star;
    if (!project_on_equalities(sol.q))
    {
      sol.status = QpStatus::infeasible;
      finish(sol);
      return sol;
    }

    std::vector<bool> is_active(n_in_, false);
    for (Eigen::Index j = 0; j < n_in_; ++j)
      if (row_norm_(j) == 0.0 && prob_.ineq_rhs(j) < -opts_.tolerance)
      {
        sol.status = QpStatus::infeasible;
        finish(sol);
        return sol;
      }

    int iterations = 0;
    Eigen::VectorXd slack(n_in_);
    while (true)
    {
      // most violated inequality, scaled by its row norm
      slack.noalias() = prob_.ineq_matrix * sol.q;
      Eigen::Index p = -1;
      double worst = opts_.tolerance;
      for (Eigen::Index j = 0; j < n_in_; ++j)
      {
        if (is_active[j] || row_norm_(j) == 0.0) continue;
        const double viol = (slack(j) - prob_.ineq_rhs(j)) / row_norm_(j);
        if (viol > worst)
        {
          worst = viol;
          p = j;
        }
      }
      if (p < 0)
      {
        sol.status = QpStatus::optimal;
        break;
      }

      const Eigen::VectorXd np = prob_.ineq_matrix.row(p).transpose();
      double lambda_p = 0.0;
      bool added = false;
      while (!added)
      {
        if (++iterations > opts_.max_iterations)
        {
          sol.status = QpStatus::infeasible;
          sol.iterations = iterations;
          finish(sol);
          return sol;
        }

        const Eigen::VectorXd d = J_.transpose() * np;
        const Eigen::Index m = active();
        const Eigen::VectorXd z = J_.rightCols(n_ - m) * d.tail(n_ - m);
        const Eigen::VectorXd r =
            R_.topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(d.head(m));

        // largest step keeping active inequality multipliers non-negative
        double t2 = std::numeric_limits<double>::infinity();
        std::size_t block = 0;
        for (std::size_t a = 0; a < active_.index.size(); ++a)
        {
          if (active_.index[a] < n_eq_) continue;
          if (r(static_cast<Eigen::Index>(a)) > 1e-12)
          {
            const double ratio = active_.lambda[a] / r(static_cast<Eigen::Index>(a));
            if (ratio < t2)
            {
              t2 = ratio;
              block = a;
            }
          }
        }

        const double zz = z.squaredNorm();
        if (zz <= 1e-14 * std::max(1.0, np.squaredNorm()))
        {
          // n_p is spanned by the active normals: only a dual step is possible
          if (!std::isfinite(t2))
          {
            sol.status = QpStatus::infeasible;
            sol.iterations = iterations;
            finish(sol);
            return sol;
          }
          step_multipliers(r, t2);
          lambda_p += t2;
          drop(block, is_active);
          continue;
        }

        const double viol = np.dot(sol.q) - prob_.ineq_rhs(p);
        const double t1 = std::max(0.0, viol / zz);
        const double t = std::min(t1, t2);
        sol.q -= t * z;
        if (r.size() > 0) step_multipliers(r, t);
        lambda_p += t;
        if (t1 <= t2)
        {
          add_column(d);
          active_.index.push_back(n_eq_ + p);
          active_.lambda.push_back(lambda_p);
          is_active[p] = true;
          added = true;
        }
        else
        {
          drop(block, is_active);
        }
      }
    }
    sol.iterations = iterations;
    finish(sol);
    return sol;
  }

private:
  Eigen::Index active() const { return static_cast<Eigen::Index>(active_.index.size()); }

  // Rotates columns (i, j) of J by (c, s).
  void rotate_j(Eigen::Index i, Eigen::Index j, double c, double s)
  {
    for (Eigen::Index row = 0; row < n_; ++row)
    {
      const double a = J_(row, i), b = J_(row, j);
      J_(row, i) = c * a + s * b;
      J_(row, j) = -s * a + c * b;
    }
  }

  // Appends a column with d = J^T n; returns false if n is dependent.
  bool add_column(Eigen::VectorXd d)
  {
    const Eigen::Index m = active();
    for (Eigen::Index i = n_ - 1; i > m; --i)
    {
      const double h = std::hypot(d(i - 1), d(i));
      if (h == 0.0) continue;
      const double c = d(i - 1) / h, s = d(i) / h;
      rotate_j(i - 1, i, c, s);
      d(i - 1) = h;
      d(i) = 0.0;
    }
    R_.col(m).head(m + 1) = d.head(m + 1);
    return std::abs(d(m)) > 1e-10 * std::max(1.0, d.head(m + 1).norm());
  }

  void remove_column(Eigen::Index a)
  {
    const Eigen::Index m = active();
    for (Eigen::Index col = a; col + 1 < m; ++col) R_.col(col).head(col + 2) = R_.col(col + 1).head(col + 2);
    R_.col(m - 1).setZero();
    for (Eigen::Index j = a; j + 1 < m; ++j)
    {
      const double h = std::hypot(R_(j, j), R_(j + 1, j));
      if (h == 0.0) continue;
      const double c = R_(j, j) / h, s = R_(j + 1, j) / h;
      for (Eigen::Index col = j; col + 1 < m; ++col)
      {
        const double x = R_(j, col), y = R_(j + 1, col);
        R_(j, col) = c * x + s * y;
        R_(j + 1, col) = -s * x + c * y;
      }
      R_(j + 1, j) = 0.0;
      rotate_j(j, j + 1, c, s);
    }
    R_.row(m - 1).setZero();
  }

  bool project_on_equalities(Eigen::VectorXd& q)
  {
    if (n_eq_ == 0) return true;
    const Eigen::MatrixXd& ne = prob_.eq_matrix;
    const Eigen::MatrixXd gram = ne * ne.transpose();
    const Eigen::VectorXd shift = gram.completeOrthogonalDecomposition().solve(ne * q - prob_.eq_rhs);
    q -= ne.transpose() * shift;
    const double resid = (ne * q - prob_.eq_rhs).cwiseAbs().maxCoeff();
    if (resid > 1e-9 * std::max(1.0, prob_.eq_rhs.cwiseAbs().maxCoeff())) return false;

    // Dependent rows stay out of the active set; their multiplier is zero.
    for (Eigen::Index i = 0; i < n_eq_; ++i)
    {
      if (!add_column(J_.transpose() * ne.row(i).transpose()))
      {
        R_.col(active()).setZero();
        continue;
      }
      active_.index.push_back(i);
      active_.lambda.push_back(0.0);
    }
    // stationarity: N_A lambda = q* - q
    const Eigen::Index m = active();
    const Eigen::VectorXd lambda = R_.topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(
        J_.leftCols(m).transpose() * (prob_.q_star - q));
    for (Eigen::Index a = 0; a < m; ++a) active_.lambda[a] = lambda(a);
    return true;
  }

  void step_multipliers(const Eigen::VectorXd& r, double t)
  {
    for (std::size_t a = 0; a < active_.lambda.size(); ++a)
      active_.lambda[a] -= t * r(static_cast<Eigen::Index>(a));
  }

  void drop(std::size_t a, std::vector<bool>& is_active)
  {
    remove_column(static_cast<Eigen::Index>(a));
    is_active[active_.index[a] - n_eq_] = false;
    active_.index.erase(active_.index.begin() + static_cast<std::ptrdiff_t>(a));
    active_.lambda.erase(active_.lambda.begin() + static_cast<std::ptrdiff_t>(a));
  }

  void finish(QpSolution& sol) const
  {
    sol.objective = (sol.q - prob_.q_star).squaredNorm();
    sol.multipliers = Eigen::VectorXd::Zero(n_eq_ + n_in_);
    for (std::size_t a = 0; a < active_.index.size(); ++a)
      sol.multipliers(active_.index[a]) = std::max(
          active_.index[a] < n_eq_ ? -std::numeric_limits<double>::infinity() : 0.0,
          active_.lambda[a]);
  }

  const QpProblem& prob_;
  const QpOptions& opts_;
  const Eigen::Index n_eq_;
  const Eigen::Index n_in_;
  const Eigen::Index n_;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
  const Eigen::VectorXd row_norm_;
  ActiveSet active_;
};

}  // namespace

QpSolution solve(const QpProblem& problem, const QpOptions& options)
{
  return DualActiveSet(problem, options).run();
}

double kkt_residual(const QpProblem& problem, const QpSolution& solution)
{
  const Eigen::Index n_eq = problem.eq_matrix.rows();
  const Eigen::Index n_in = problem.ineq_matrix.rows();
  const Eigen::VectorXd lam_eq = solution.multipliers.head(n_eq);
  const Eigen::VectorXd lam_in = solution.multipliers.tail(n_in);

  // stationarity for 1/2 ||q - q*||^2
  Eigen::VectorXd grad = solution.q - problem.q_star;
  if (n_eq > 0) grad += problem.eq_matrix.transpose() * lam_eq;
  if (n_in > 0) grad += problem.ineq_matrix.transpose() * lam_in;
  double res = grad.cwiseAbs().maxCoeff();

  if (n_eq > 0) res = std::max(res, (problem.eq_matrix * solution.q - problem.eq_rhs).cwiseAbs().maxCoeff());
  if (n_in > 0)
  {
    const Eigen::VectorXd slack = problem.ineq_matrix * solution.q - problem.ineq_rhs;
    res = std::max(res, slack.maxCoeff());
    res = std::max(res, (-lam_in).maxCoeff());
    res = std::max(res, lam_in.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  return std::max(res, 0.0);
}

void to_json(nlohmann::json& j, const QpProblem& problem)
{
  const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  const auto mat = [&](const Eigen::MatrixXd& m)
  {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
    return rows;
  };
  j = nlohmann::json{{"q_star", vec(problem.q_star)},
                     {"eq_matrix", mat(problem.eq_matrix)},
                     {"eq_rhs", vec(problem.eq_rhs)},
                     {"ineq_matrix", mat(problem.ineq_matrix)},
                     {"ineq_rhs", vec(problem.ineq_rhs)}};
}

}  // namespace swarmnet
