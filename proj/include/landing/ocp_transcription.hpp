#ifndef LANDING_OCP_TRANSCRIPTION_HPP
#define LANDING_OCP_TRANSCRIPTION_HPP

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "landing/lgr_basis.hpp"
#include "landing/nlp_problem.hpp"

namespace landing::ocp {

/// State, control and time at one end of a phase.
struct PhaseEnd {
    Eigen::VectorXd x;
    Eigen::VectorXd u;
    double t = 0.0;
};

using Dynamics = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t)>;
using LagrangeCost = std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t)>;
using MayerCost = std::function<double(const PhaseEnd& initial, const PhaseEnd& final)>;
using PathFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t)>;
using BoundaryFunction = std::function<Eigen::VectorXd(const PhaseEnd& initial, const PhaseEnd& final)>;
using LinkageFunction = std::function<Eigen::VectorXd(const PhaseEnd& left_final, const PhaseEnd& right_initial)>;

/**
 * Two-sided constraint rows lower <= fn <= upper. A row with lower == upper
 * becomes an equality; infinite sides are dropped. `scale` divides the row in
 * the NLP (defaults to ones).
 */
template <class Fn>
struct Bounded {
    Fn fn;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd scale;
    std::string name;
};

using PathConstraint = Bounded<PathFunction>;
using BoundaryConstraint = Bounded<BoundaryFunction>;

struct PhaseSpec {
    int state_dim = 0;
    int control_dim = 0;
    int n_collocation = 10;
    Dynamics dynamics;
    LagrangeCost lagrange_cost;  // optional
    MayerCost mayer_cost;        // optional
    std::vector<PathConstraint> path_constraints;
    std::vector<BoundaryConstraint> boundary_constraints;

    Eigen::VectorXd state_lower, state_upper;
    Eigen::VectorXd control_lower, control_upper;
    double t0_lower = 0.0, t0_upper = 0.0;
    double tf_lower = 0.0, tf_upper = 0.0;
    double duration_lower = 0.0;
    double duration_upper = std::numeric_limits<double>::infinity();

    // affine scaling: physical = scale * scaled + offset (empty means 1 / 0)
    Eigen::VectorXd state_scale, state_offset;
    Eigen::VectorXd control_scale, control_offset;
    double time_scale = 1.0;

    // initial guess: linear states, constant control, guessed times
    Eigen::VectorXd guess_initial_state, guess_final_state;
    Eigen::VectorXd guess_control;  // empty: mid-range of finite control bounds, else 0
    double guess_t0 = 0.0, guess_tf = 1.0;
};

struct LinkageSpec {
    int left_phase = 0;
    int right_phase = 1;
    LinkageFunction fn;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd scale;
    std::string name;
};

struct MultiphaseProblem {
    std::vector<PhaseSpec> phases;
    std::vector<LinkageSpec> linkages;
    double objective_scale = 1.0;
};

/// Offsets of one phase inside the decision vector.
struct PhaseLayout {
    int n = 0;
    int nx = 0;
    int nu = 0;
    int state_offset = 0;    // (n+1) * nx, node-major
    int control_offset = 0;  // n * nu, node-major
    int t0_index = 0;
    int tf_index = 0;
};

struct DecisionLayout {
    std::vector<PhaseLayout> phases;
    int total = 0;
};

/// Physical (unscaled) values of one phase.
struct PhaseValues {
    Eigen::MatrixXd states;    // (n+1) x nx, row k at tau_k
    Eigen::MatrixXd controls;  // n x nu, collocation nodes only
    double t0 = 0.0;
    double tf = 0.0;
};

/// Per phase: states node-major, then controls, then t0, tf.
DecisionLayout build_layout(const MultiphaseProblem& problem);

/// Unscaled views; with scaling pack/unpack apply the per-phase affine maps.
std::vector<PhaseValues> unpack(const MultiphaseProblem& problem, const DecisionLayout& layout,
                                const Eigen::VectorXd& z);
Eigen::VectorXd pack(const MultiphaseProblem& problem, const DecisionLayout& layout,
                     const std::vector<PhaseValues>& values);

/// D X - (tf - t0)/2 f(X_k, U_k, t_k), stacked node-major (n * nx entries).
Eigen::VectorXd assemble_defects(const PhaseSpec& phase, const lgr::LGRGrid& grid, const PhaseValues& values);

double assemble_cost(const MultiphaseProblem& problem, const std::vector<lgr::LGRGrid>& grids,
                     const std::vector<PhaseValues>& values);

/// Control at tau from the interpolant of the n collocation-node controls.
Eigen::VectorXd control_at(const lgr::LGRGrid& grid, const Eigen::MatrixXd& controls, double tau);
/// State at tau from the interpolant over all n+1 nodes.
Eigen::VectorXd state_at(const lgr::LGRGrid& grid, const Eigen::MatrixXd& states, double tau);

PhaseEnd phase_initial(const lgr::LGRGrid& grid, const PhaseValues& values);
PhaseEnd phase_final(const lgr::LGRGrid& grid, const PhaseValues& values);

/**
 * A transcribed multiphase problem. The NLP callbacks share ownership of the
 * problem definition, so copies stay valid. Rows are labelled for reporting.
 */
class Transcription {
public:
    explicit Transcription(MultiphaseProblem problem);

    const NlpProblem& nlp() const { return nlp_; }
    const MultiphaseProblem& problem() const;
    const DecisionLayout& layout() const;
    const std::vector<lgr::LGRGrid>& grids() const;
    const std::vector<std::string>& eq_labels() const;
    const std::vector<std::string>& ineq_labels() const;

    std::vector<PhaseValues> unpack(const Eigen::VectorXd& z) const;
    Eigen::VectorXd pack(const std::vector<PhaseValues>& values) const;
    NlpValues evaluate(const Eigen::VectorXd& z) const { return nlp_.evaluate(z); }
    double cost(const Eigen::VectorXd& z) const;

    struct Impl;

private:
    std::shared_ptr<const Impl> impl_;
    NlpProblem nlp_;
};

/// Throws invalid_argument on inconsistent bounds or dimensions.
Transcription transcribe(const MultiphaseProblem& problem);

}  // namespace landing::ocp

#endif  // LANDING_OCP_TRANSCRIPTION_HPP
