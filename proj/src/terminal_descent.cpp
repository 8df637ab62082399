#include "landing/terminal_descent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace landing::terminal {

namespace {

using Eigen::Vector3d;

// Rate-hold flight with thrust held over each cycle; stops early when `done` fires.
template <class Done>
Segment hold(const std::string& label, dyn::LocalState& x, double t0, double duration, double w_ref,
             const TerminalSequenceConfig& c, const dyn::MoonConstants& k, Done&& done) {
    Segment seg;
    seg.label = label;
    const auto limits = c.limits(k);
    const double m0 = x.mass;
    double t = 0.0;
    while (t < duration - 1e-12) {
        const double h = std::min(c.period, duration - t);
        const double T = hover_thrust(x, k, limits, c.rate_gain, w_ref);
        const Vector3d thrust(0.0, T, 0.0);
        seg.trace.push_back({t0 + t, x.position, x.velocity, x.mass, thrust});
        auto rhs = [&](double, const Eigen::VectorXd& s) -> Eigen::VectorXd {
            const auto ls = dyn::LocalState::from_vector(s);
            return dyn::flat_eom(ls, thrust / ls.mass, T, k);
        };
        const Eigen::VectorXd next = dyn::rk4_step(rhs, t, x.to_vector(), h);
        const auto nx = dyn::LocalState::from_vector(next);
        if (done(nx)) {
            // linear interpolation to the ground crossing
            const double a = x.position.y(), b = nx.position.y();
            const double f = a == b ? 1.0 : std::clamp(a / (a - b), 0.0, 1.0);
            dyn::LocalState ev;
            ev.position = x.position + f * (nx.position - x.position);
            ev.velocity = x.velocity + f * (nx.velocity - x.velocity);
            ev.mass = x.mass + f * (nx.mass - x.mass);
            x = ev;
            t += f * h;
            break;
        }
        x = nx;
        t += h;
    }
    seg.trace.push_back({t0 + t, x.position, x.velocity, x.mass, Vector3d(0.0, hover_thrust(x, k, limits, c.rate_gain, w_ref), 0.0)});
    seg.duration = t;
    seg.propellant = m0 - x.mass;
    return seg;
}

}  // namespace

guidance::ThrustLimits TerminalSequenceConfig::limits(const dyn::MoonConstants& k) const {
    const double tmax = k.max_thrust(engines);
    return {min_thrust_fraction * tmax, tmax};
}

void TerminalSequenceConfig::validate() const {
    if (!(first_hover > 0.0 && second_hover_max > 0.0 && hazard_decision_time > 0.0)) {
        throw std::invalid_argument("terminal sequence: durations must be positive");
    }
    if (!(intermediate_altitude > retarget_altitude && retarget_altitude > handover_altitude &&
          handover_altitude > 0.0)) {
        throw std::invalid_argument("terminal sequence: altitudes must decrease strictly");
    }
    if (!(handover_velocity < 0.0 && descent_velocity < 0.0)) {
        throw std::invalid_argument("terminal sequence: descent velocities must be negative");
    }
    if (!(position_tolerance > 0.0 && velocity_tolerance > 0.0)) {
        throw std::invalid_argument("terminal sequence: arrival tolerances must be positive");
    }
    if (!(rate_gain >= 0.0 && period > 0.0 && engines >= 1)) {
        throw std::invalid_argument("terminal sequence: invalid gain, period or engine count");
    }
    if (!(min_thrust_fraction >= 0.0 && min_thrust_fraction < 1.0)) {
        throw std::invalid_argument("terminal sequence: min_thrust_fraction must lie in [0, 1)");
    }
    if (!safe_site_offset.allFinite()) throw std::invalid_argument("terminal sequence: non-finite site offset");
}

const Segment& TerminalTrajectory::segment(const std::string& label) const {
    for (const auto& s : segments)
        if (s.label == label) return s;
    throw std::out_of_range("no terminal segment named " + label);
}

double TerminalTrajectory::lateral_error() const {
    return std::hypot(touchdown.position.x() - site.x(), touchdown.position.z() - site.z());
}

std::vector<guidance::RolloutSample> TerminalTrajectory::trace() const {
    std::vector<guidance::RolloutSample> out;
    for (const auto& s : segments) {
        for (std::size_t i = 0; i < s.trace.size(); ++i) {
            if (!out.empty() && i == 0 && std::abs(s.trace[i].t - out.back().t) < 1e-9) out.pop_back();
            out.push_back(s.trace[i]);
        }
    }
    return out;
}

double hover_thrust(const dyn::LocalState& state, const dyn::MoonConstants& k, const guidance::ThrustLimits& limits,
                    double rate_gain, double w_ref) {
    if (!(state.mass > 0.0) || !std::isfinite(state.mass)) throw std::invalid_argument("hover_thrust: invalid mass");
    const double T = state.mass * (k.g_moon + rate_gain * (w_ref - state.velocity.y()));
    if (T > limits.max) {
        std::ostringstream os;
        os << "hover_thrust: demand " << T << " N exceeds the limit " << limits.max << " N";
        throw SaturationError(os.str());
    }
    return std::max(T, limits.min);
}

TerminalTrajectory simulate_terminal_sequence(const dyn::LocalState& start, const TerminalSequenceConfig& c,
                                              const dyn::MoonConstants& k) {
    c.validate();
    if (!(start.position.y() > c.intermediate_altitude)) {
        throw std::invalid_argument("terminal sequence: start must lie above the intermediate altitude");
    }
    TerminalTrajectory out;
    const auto limits = c.limits(k);
    const Vector3d hover_accel = -k.g_local();
    dyn::LocalState x = start;
    double t = 0.0;
    auto never = [](const dyn::LocalState&) { return false; };

    auto push = [&](Segment s) {
        t += s.duration;
        out.total_propellant += s.propellant;
        out.segments.push_back(std::move(s));
    };

    auto guided = [&](const std::string& label, const guidance::TerminalTarget& target, const guidance::TgoRange& range) {
        guidance::RolloutOptions opt;
        opt.period = c.period;
        opt.position_tolerance = c.position_tolerance;
        opt.velocity_tolerance = c.velocity_tolerance;
        opt.fast_path = false;
        const Vector3d a0 = hover_accel;
        const auto search = guidance::grid_search_tgo(x, a0, target, range, k, limits, opt);
        if (!search.controllable) {
            out.touchdown = x;
            throw TerminalSequenceError("terminal sequence: no converged t_go for segment '" + label + "'", out);
        }
        opt.record = true;
        const auto r = guidance::closed_loop_rollout(x, a0, target, search.t_go_star, k, limits, opt);
        if (r.saturated) {
            std::ostringstream os;
            os << label << ": thrust saturated for " << r.saturated_time << " s";
            out.diagnostics.push_back(os.str());
        }
        Segment s;
        s.label = label;
        s.trace = r.trace;
        for (auto& p : s.trace) p.t += t;
        s.duration = search.t_go_star;
        s.t_go = search.t_go_star;
        s.propellant = x.mass - r.final_mass;
        x.position = r.final_position;
        x.velocity = r.final_velocity;
        x.mass = r.final_mass;
        push(std::move(s));
    };

    try {
        push(hold("first_hover", x, t, c.first_hover, 0.0, c, k, never));

        guided("descent", {Vector3d(x.position.x(), c.intermediate_altitude, x.position.z()), Vector3d::Zero(), hover_accel},
               c.descent_tgo);

        push(hold("second_hover", x, t, std::min(c.hazard_decision_time, c.second_hover_max), 0.0, c, k, never));

        out.site = Vector3d(x.position.x() + c.safe_site_offset.x(), 0.0, x.position.z() + c.safe_site_offset.y());
        guided("retarget", {out.site + Vector3d(0.0, c.retarget_altitude, 0.0), Vector3d::Zero(), hover_accel},
               c.retarget_tgo);

        guided("handover", {out.site + Vector3d(0.0, c.handover_altitude, 0.0), Vector3d(0.0, c.handover_velocity, 0.0),
                            hover_accel},
               c.handover_tgo);

        const double horizon = 10.0 * c.handover_altitude / std::abs(c.descent_velocity);
        push(hold("constant_velocity", x, t, horizon, c.descent_velocity, c, k,
                  [](const dyn::LocalState& s) { return s.position.y() <= 0.0; }));
    } catch (const SaturationError& e) {
        out.touchdown = x;
        throw TerminalSequenceError(e.what(), out);
    }
    if (x.position.y() > 1e-9) {
        out.touchdown = x;
        throw TerminalSequenceError("terminal sequence: no touchdown within the constant-velocity horizon", out);
    }
    out.touchdown = x;
    return out;
}

}  // namespace landing::terminal
