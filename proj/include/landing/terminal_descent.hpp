#ifndef LANDING_TERMINAL_DESCENT_HPP
#define LANDING_TERMINAL_DESCENT_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "landing/lunar_dynamics.hpp"
#include "landing/polynomial_guidance.hpp"

namespace landing::terminal {

/// Altitudes are above the local terrain, horizontal offsets in the terrain-relative frame.
struct TerminalSequenceConfig {
    double first_hover = 12.0;             // s
    double intermediate_altitude = 150.0;  // m
    double second_hover_max = 22.0;        // s
    double hazard_decision_time = 22.0;    // s, hover ends at min(decision, max)
    Eigen::Vector2d safe_site_offset = Eigen::Vector2d::Zero();  // (downrange, crossrange) m
    double retarget_altitude = 60.0;   // m above the safe site
    double handover_altitude = 10.0;   // m
    double handover_velocity = -1.0;   // m/s
    double descent_velocity = -1.0;    // m/s
    double rate_gain = 1.0;            // 1/s, vertical-rate feedback of the hold laws
    int engines = 2;
    double min_thrust_fraction = 0.3;
    double period = 0.1;  // s
    double position_tolerance = 0.1;   // m, guided segment arrival
    double velocity_tolerance = 0.05;  // m/s
    guidance::TgoRange descent_tgo{10.0, 200.0, 1.0};
    guidance::TgoRange retarget_tgo{10.0, 120.0, 1.0};
    guidance::TgoRange handover_tgo{5.0, 120.0, 1.0};

    guidance::ThrustLimits limits(const dyn::MoonConstants& k) const;
    void validate() const;
};

struct Segment {
    std::string label;
    std::vector<guidance::RolloutSample> trace;
    double propellant = 0.0;  // kg
    double duration = 0.0;    // s
    double t_go = 0.0;        // guided segments only
};

struct TerminalTrajectory {
    std::vector<Segment> segments;
    dyn::LocalState touchdown;
    Eigen::Vector3d site = Eigen::Vector3d::Zero();
    double total_propellant = 0.0;
    std::vector<std::string> diagnostics;

    const Segment& segment(const std::string& label) const;
    double lateral_error() const;
    /// All samples in time order (segment boundaries appear once).
    std::vector<guidance::RolloutSample> trace() const;
};

class SaturationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TerminalSequenceError : public std::runtime_error {
public:
    TerminalSequenceError(const std::string& what, TerminalTrajectory partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const TerminalTrajectory& partial() const { return partial_; }

private:
    TerminalTrajectory partial_;
};

/**
 * Vertical thrust m (g + K (w_ref - w)) for a rate hold at w_ref. Throws
 * SaturationError if it exceeds limits.max; clamps to limits.min.
 */
double hover_thrust(const dyn::LocalState& state, const dyn::MoonConstants& k, const guidance::ThrustLimits& limits,
                    double rate_gain = 1.0, double w_ref = 0.0);

/**
 * Hover, guided descent to the intermediate altitude, hover, retarget above
 * the safe site, guided descent to the handover point, then a constant-rate
 * descent until the altitude reaches zero.
 */
TerminalTrajectory simulate_terminal_sequence(const dyn::LocalState& start, const TerminalSequenceConfig& config,
                                              const dyn::MoonConstants& k);

}  // namespace landing::terminal

#endif  // LANDING_TERMINAL_DESCENT_HPP
