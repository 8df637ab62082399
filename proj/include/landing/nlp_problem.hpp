#ifndef LANDING_NLP_PROBLEM_HPP
#define LANDING_NLP_PROBLEM_HPP

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace landing {

/// Values of one NLP evaluation: f(z), g(z) (= 0) and h(z) (<= 0).
struct NlpValues {
    double objective = 0.0;
    Eigen::VectorXd eq;
    Eigen::VectorXd ineq;
};

/**
 * min f(z)  s.t.  g(z) = 0,  h(z) <= 0,  lower <= z <= upper.
 *
 * `evaluate` must return vectors of exactly num_eq and num_ineq entries on
 * every call. `hessian_blocks` optionally partitions the variables for a
 * block-diagonal quasi-Newton Hessian; empty means one dense block.
 */
struct NlpProblem {
    int num_vars = 0;
    int num_eq = 0;
    int num_ineq = 0;
    std::function<NlpValues(const Eigen::VectorXd&)> evaluate;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd initial_guess;
    std::vector<std::vector<int>> hessian_blocks;
    bool reentrant = false;
};

}  // namespace landing

#endif  // LANDING_NLP_PROBLEM_HPP
