#ifndef LANDING_QP_SOLVER_HPP
#define LANDING_QP_SOLVER_HPP

#include <Eigen/Dense>

#include <vector>

namespace landing::sqp {

/**
 * Dense convex QP
 *
 *   min  0.5 p'Hp + g'p
 *   s.t. A p  = b
 *        C p <= d
 *        lower <= p <= upper     (entries may be +-infinity)
 *
 * H must be symmetric positive definite.
 */
struct QpProblem {
    Eigen::MatrixXd hessian;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd eq_matrix;
    Eigen::VectorXd eq_rhs;
    Eigen::MatrixXd ineq_matrix;
    Eigen::VectorXd ineq_rhs;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

enum class QpStatus { optimal, infeasible, numerical_failure };

/**
 * Multipliers follow H p + g + A'eq + C'ineq + bound = 0 with ineq >= 0;
 * bound(i) > 0 when the upper bound is active and < 0 at the lower bound.
 */
struct QpSolution {
    QpStatus status = QpStatus::numerical_failure;
    Eigen::VectorXd step;
    Eigen::VectorXd eq_multipliers;
    Eigen::VectorXd ineq_multipliers;
    Eigen::VectorXd bound_multipliers;
    int iterations = 0;
    // Set when the linearization was inconsistent and the step came from the
    // elastic (feasibility restoration) program instead.
    bool restoration = false;
};

struct QpOptions {
    double feasibility_tolerance = 1e-11;
    int max_iterations = 0;  // 0: 10 * (n + constraints)
    // weight on the l1 constraint slacks of the elastic program
    double elastic_weight = 1e4;
    bool allow_restoration = true;
};

/// Goldfarb-Idnani dual active-set solve. Returns `infeasible` without
/// restoration when the constraints admit no point.
QpSolution solve_qp_active_set(const QpProblem& qp, const QpOptions& options = {});

/// Active-set solve with elastic fallback: an inconsistent linearization is
/// replaced by min violation (l1, weighted) and flagged in `restoration`.
QpSolution qp_subproblem(const QpProblem& qp, const QpOptions& options = {});

}  // namespace landing::sqp

#endif  // LANDING_QP_SOLVER_HPP
