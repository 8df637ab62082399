#ifndef LANDING_SQP_SOLVER_HPP
#define LANDING_SQP_SOLVER_HPP

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "landing/nlp_problem.hpp"
#include "landing/qp_solver.hpp"

namespace landing::sqp {

struct SolverOptions {
    double kkt_tolerance = 1e-6;
    double constraint_tolerance = 1e-8;
    int max_iterations = 500;
    // finite-difference step h_i = fd_relative_step * (1 + |z_i|)
    double fd_relative_step = 1.4901161193847656e-08;
    // l1 merit penalty: with r = penalty_factor * |multipliers|_inf + penalty_offset,
    // rho <- max(r, (rho + r) / 2); restoration steps leave rho unchanged
    double initial_penalty = 1.0;
    double penalty_factor = 1.5;
    double penalty_offset = 1e-3;
    double backtrack_factor = 0.5;
    double armijo = 1e-4;
    int max_backtracks = 40;
    bool second_order_correction = true;
    double elastic_weight = 1e4;
    // FD columns evaluated on this many threads when the problem is reentrant
    int threads = 1;
    // line-delimited iteration records, CSV with a header row
    std::ostream* iteration_log = nullptr;
};

enum class SolverStatus { converged, max_iterations, infeasible, numerical_failure };

std::string to_string(SolverStatus s);

struct SolverResult {
    Eigen::VectorXd solution;
    double objective = 0.0;
    double eq_violation = 0.0;    // |g|_inf
    double ineq_violation = 0.0;  // max(h)+
    double kkt_residual = 0.0;
    double complementarity = 0.0;
    int iterations = 0;
    SolverStatus status = SolverStatus::numerical_failure;
    Eigen::VectorXd eq_multipliers;
    Eigen::VectorXd ineq_multipliers;
    Eigen::VectorXd bound_multipliers;
    // merit values (same penalty) before/after every accepted step
    std::vector<std::pair<double, double>> merit_history;
};

/// Raised for non-finite callback output during differencing.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Central-difference Jacobian with h_i = rel_step * (1 + |z_i|).
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
                            const Eigen::VectorXd& z, double rel_step = 1.4901161193847656e-08);

SolverResult solve(const NlpProblem& nlp, const SolverOptions& options = {});

}  // namespace landing::sqp

#endif  // LANDING_SQP_SOLVER_HPP
