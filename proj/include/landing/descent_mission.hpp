#ifndef LANDING_DESCENT_MISSION_HPP
#define LANDING_DESCENT_MISSION_HPP

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

#include "landing/lgr_basis.hpp"
#include "landing/lunar_dynamics.hpp"
#include "landing/ocp_transcription.hpp"
#include "landing/sqp_solver.hpp"

namespace landing::mission {

/**
 * Forward-pass configuration. Phases 1 (rough braking) and 2 (fine braking)
 * fly the rotating spherical model, phase 3 (terminal descent) the flat model.
 *
 * Altitudes of phases 1-2 are above the mean surface except
 * `fine_braking_altitude`, which is above the local terrain: the fine-braking
 * terminal radius is R_M + terrain_elevation + fine_braking_altitude and the
 * terminal-descent frame measures altitude from the terrain.
 *
 * With `southbound_approach` the spherical phases are solved in a
 * latitude-mirrored track frame (phi -> -phi, v -> -v) so the along-track
 * velocity stays positive and the track never crosses a pole.
 */
struct MissionConfig {
    dyn::MoonConstants moon;
    double initial_altitude = 30000.0;     // m above mean surface
    double initial_velocity = 1680.0;      // m/s along track
    double initial_mass = 1729.0;          // kg
    double rough_braking_altitude = 7400.0;
    double v_sops = 100.0;                 // m/s
    double fine_braking_altitude = 800.0;  // m above terrain
    double site_latitude_deg = -69.37356;
    double site_longitude_deg = 32.31975;
    double terrain_elevation = 883.0;      // m above mean surface
    bool southbound_approach = true;
    std::array<int, 3> collocation{30, 30, 15};
    std::array<int, 3> engines{4, 4, 2};
    double min_thrust_fraction = 0.3;
    std::array<double, 3> duration_lower{100.0, 100.0, 10.0};
    std::array<double, 3> duration_upper{1500.0, 1500.0, 300.0};
    std::array<double, 3> duration_guess{650.0, 200.0, 100.0};
    double rough_braking_terminal_pitch_deg = 50.0;
    /// Phase 3 flown as a pure vertical descent (alpha = beta = 0 through the control bounds).
    bool vertical_terminal_descent = true;
    dyn::AttitudeHold attitude_hold;

    double max_thrust(int phase) const;
    double min_thrust(int phase) const;
    /// Landing-site latitude in the track frame.
    double site_track_latitude() const;
    double fine_braking_radius() const;
    void validate() const;
};

/// Per-phase transcription scales (physical = scale * scaled + offset).
struct PhaseScaling {
    Eigen::VectorXd state_scale, state_offset;
    Eigen::VectorXd control_scale;
    double time_scale = 1.0;
};
std::array<PhaseScaling, 3> default_scaling(const MissionConfig& config);

struct TrajectoryPhase {
    lgr::LGRGrid grid;
    Eigen::MatrixXd states;    // (n+1) x 7
    Eigen::MatrixXd controls;  // n x 3: T, alpha, beta
    double t0 = 0.0;
    double tf = 0.0;
};

struct TrajectorySolution {
    std::array<TrajectoryPhase, 3> phases;
    double objective = 0.0;
    sqp::SolverResult solver;
    std::vector<std::string> eq_labels;
    std::vector<std::string> ineq_labels;
    double solve_seconds = 0.0;

    double final_mass() const { return phases[2].states(phases[2].grid.n, 6); }
    double propellant() const { return phases[0].states(0, 6) - final_mass(); }
};

struct PhaseWaypoint {
    Eigen::Vector3d r0, v0, a0;
    Eigen::Vector3d rf, vf, af;
    double t0 = 0.0, tf = 0.0;
    double m0 = 0.0, mf = 0.0;
};

/**
 * Boundary waypoints in flat guidance frames. Phases 1-2 use the local frame
 * at the landing site with altitude above the mean surface; phase 3 uses the
 * terrain-relative frame at the fine-braking terminal ground projection.
 * Accelerations are thrust accelerations (commanded a, not a + g).
 */
struct WaypointSet {
    std::array<PhaseWaypoint, 3> phases;
    /// Spherical (track-frame) state at the end of phase 1 and start of phase 2.
    dyn::SphericalState rough_braking_end, fine_braking_start;
    double attitude_hold_thrust = 0.0;
};

/// Landing site on the mean surface in track coordinates (origin of the phase 1-2 guidance frame).
dyn::SphericalState site_reference(const MissionConfig& config);

ocp::MultiphaseProblem build_forward_pass(const MissionConfig& config);

/// Coarse-to-fine solve: a low-order solve seeds the requested grid.
TrajectorySolution solve_forward_pass(const MissionConfig& config, const sqp::SolverOptions& options = {});

WaypointSet extract_waypoints(const TrajectorySolution& solution, const MissionConfig& config);

struct PhaseCheck {
    Eigen::VectorXd terminal_mismatch;  // |propagated - collocated| / scale per state
    double max_scaled_mismatch = 0.0;
    double propellant_collocated = 0.0;  // m0 - mf from the states
    double propellant_quadrature = 0.0;  // integral of T/(Isp g0)
};

struct VerificationReport {
    std::array<PhaseCheck, 3> phases;
    double eq_violation = 0.0;
    double ineq_violation = 0.0;
    double max_scaled_mismatch = 0.0;
    bool ok = false;
};

/**
 * Re-propagates every phase from its collocated initial state with the
 * interpolated controls (thrust multiplied by `thrust_factor`) using RK4.
 */
VerificationReport verify_solution(const TrajectorySolution& solution, const MissionConfig& config,
                                   double thrust_factor = 1.0, double step = 0.05);

/**
 * Rough braking alone: from the initial orbit state `downrange` metres
 * (along-track arc on the mean surface) before `terminal`, to `terminal`
 * with the configured terminal attitude and terminal thrust `hold_thrust`.
 */
ocp::MultiphaseProblem build_rough_braking(const MissionConfig& config, const dyn::SphericalState& terminal,
                                           double hold_thrust, double downrange);

struct RoughBrakingSolve {
    double downrange = 0.0;
    TrajectoryPhase phase;
    sqp::SolverResult solver;
    bool converged = false;
    double propellant = 0.0;  // kg
};

RoughBrakingSolve solve_rough_braking(const MissionConfig& config, const dyn::SphericalState& terminal,
                                      double hold_thrust, double downrange, const sqp::SolverOptions& options = {});

/// Fraction of collocation nodes whose thrust lies within `tolerance` (relative
/// to the phase maximum) of either thrust bound.
double bang_bang_fraction(const TrajectorySolution& solution, const MissionConfig& config, double tolerance = 0.01);

/// Net thrust acceleration (local axes) for a phase state row and control row.
Eigen::Vector3d thrust_acceleration(const Eigen::VectorXd& state, const Eigen::VectorXd& control);

}  // namespace landing::mission

#endif  // LANDING_DESCENT_MISSION_HPP
