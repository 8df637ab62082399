#include "landing/descent_mission.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace landing::mission {

namespace {

using dyn::deg2rad;
using Vec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec vec(std::initializer_list<double> v) {
    Vec r(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) r(i++) = x;
    return r;
}

Vec spherical_rhs(const Vec& x, const Vec& u, const dyn::MoonConstants& k) {
    return dyn::spherical_eom(dyn::SphericalState::from_vector(x), {u(0), u(1), u(2)}, k);
}

Vec flat_rhs(const Vec& x, const Vec& u, const dyn::MoonConstants& k) {
    const auto s = dyn::LocalState::from_vector(x);
    return dyn::flat_eom(s, u(0) / s.mass * dyn::thrust_direction(u(1), u(2)), u(0), k);
}

// Rows selecting entries of a vector, with matching scales.
ocp::BoundaryConstraint pick_final(std::vector<int> idx, Vec value, Vec scale, std::string name) {
    ocp::BoundaryConstraint bc;
    bc.fn = [idx](const ocp::PhaseEnd&, const ocp::PhaseEnd& f) {
        Vec r(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const int j = idx[i];
            r(static_cast<Eigen::Index>(i)) = j < 100 ? f.x(j) : f.u(j - 100);
        }
        return r;
    };
    bc.lower = value;
    bc.upper = value;
    bc.scale = std::move(scale);
    bc.name = std::move(name);
    return bc;
}

ocp::BoundaryConstraint pick_initial(std::vector<int> idx, Vec value, Vec scale, std::string name) {
    ocp::BoundaryConstraint bc;
    bc.fn = [idx](const ocp::PhaseEnd& i0, const ocp::PhaseEnd&) {
        Vec r(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const int j = idx[i];
            r(static_cast<Eigen::Index>(i)) = j < 100 ? i0.x(j) : i0.u(j - 100);
        }
        return r;
    };
    bc.lower = value;
    bc.upper = value;
    bc.scale = std::move(scale);
    bc.name = std::move(name);
    return bc;
}

// index offset marking control entries in pick_*
constexpr int U = 100;

TrajectoryPhase to_phase(const lgr::LGRGrid& grid, const ocp::PhaseValues& v) {
    return {grid, v.states, v.controls, v.t0, v.tf};
}

// Interpolates a solved phase onto another grid size.
ocp::PhaseValues regrid(const lgr::LGRGrid& from, const ocp::PhaseValues& v, const lgr::LGRGrid& to) {
    ocp::PhaseValues out;
    out.states.resize(to.n + 1, v.states.cols());
    out.controls.resize(to.n, v.controls.cols());
    for (int k = 0; k <= to.n; ++k) out.states.row(k) = ocp::state_at(from, v.states, to.nodes(k)).transpose();
    for (int k = 0; k < to.n; ++k) out.controls.row(k) = ocp::control_at(from, v.controls, to.nodes(k)).transpose();
    out.t0 = v.t0;
    out.tf = v.tf;
    return out;
}

ocp::PhaseSpec spherical_phase(const MissionConfig& c, const PhaseScaling& sc, int p) {
    const auto& k = c.moon;
    const auto i = static_cast<std::size_t>(p);
    const double pi = dyn::kPi;
    ocp::PhaseSpec ph;
    ph.state_dim = 7;
    ph.control_dim = 3;
    ph.n_collocation = c.collocation[i];
    ph.dynamics = [k](const Vec& x, const Vec& u, double) { return spherical_rhs(x, u, k); };
    ph.state_lower = vec({k.radius, -pi, -1.4, -kInf, -kInf, -kInf, k.dry_mass + 1.0});
    ph.state_upper = vec({k.radius + c.initial_altitude + 5000.0, pi, 1.4, kInf, kInf, kInf, c.initial_mass});
    ph.control_lower = vec({c.min_thrust(p), -pi / 2.0, -pi / 2.0});
    ph.control_upper = vec({c.max_thrust(p), pi / 2.0, pi / 2.0});
    ph.state_scale = sc.state_scale;
    ph.state_offset = sc.state_offset;
    ph.control_scale = sc.control_scale;
    ph.time_scale = sc.time_scale;
    ph.duration_lower = c.duration_lower[i];
    ph.duration_upper = c.duration_upper[i];
    return ph;
}

}  // namespace

dyn::SphericalState site_reference(const MissionConfig& c) {
    dyn::SphericalState ref;
    ref.r = c.moon.radius;
    ref.theta = deg2rad(c.site_longitude_deg);
    ref.phi = c.site_track_latitude();
    ref.m = c.initial_mass;
    return ref;
}

double MissionConfig::max_thrust(int phase) const { return moon.max_thrust(engines.at(static_cast<std::size_t>(phase))); }

double MissionConfig::min_thrust(int phase) const { return min_thrust_fraction * max_thrust(phase); }

double MissionConfig::site_track_latitude() const {
    const double lat = deg2rad(site_latitude_deg);
    return southbound_approach ? -lat : lat;
}

double MissionConfig::fine_braking_radius() const {
    return moon.radius + terrain_elevation + fine_braking_altitude;
}

void MissionConfig::validate() const {
    moon.validate();
    if (!(v_sops > 0.0)) throw std::invalid_argument("v_sops must be positive");
    if (!(initial_velocity > 0.0)) throw std::invalid_argument("initial_velocity must be positive");
    if (!(initial_mass > moon.dry_mass)) throw std::invalid_argument("initial_mass must exceed the dry mass");
    if (!(initial_altitude > rough_braking_altitude &&
          rough_braking_altitude > terrain_elevation + fine_braking_altitude && fine_braking_altitude > 0.0)) {
        throw std::invalid_argument("altitudes must decrease strictly across phases");
    }
    if (!(std::abs(site_latitude_deg) < 89.0)) throw std::invalid_argument("site latitude too close to a pole");
    for (int p = 0; p < 3; ++p) {
        const auto i = static_cast<std::size_t>(p);
        if (collocation[i] < 2) throw std::invalid_argument("collocation counts must be >= 2");
        if (engines[i] < 1) throw std::invalid_argument("engine counts must be >= 1");
        if (!(duration_lower[i] > 0.0 && duration_lower[i] < duration_upper[i])) {
            throw std::invalid_argument("duration bounds must satisfy 0 < lower < upper");
        }
        if (!(duration_guess[i] >= duration_lower[i] && duration_guess[i] <= duration_upper[i])) {
            throw std::invalid_argument("duration guesses must lie within their bounds");
        }
    }
    if (!(min_thrust_fraction >= 0.0 && min_thrust_fraction < 1.0)) {
        throw std::invalid_argument("min_thrust_fraction must lie in [0, 1)");
    }
    if (!(attitude_hold.duration > 0.0 && attitude_hold.step > 0.0)) {
        throw std::invalid_argument("attitude hold duration and step must be positive");
    }
}

std::array<PhaseScaling, 3> default_scaling(const MissionConfig& c) {
    std::array<PhaseScaling, 3> s;
    const double m = c.initial_mass;
    for (int p = 0; p < 2; ++p) {
        auto& ps = s[static_cast<std::size_t>(p)];
        ps.state_scale = vec({1e4, 0.1, 0.1, 1700.0, 1700.0, 1700.0, m});
        ps.state_offset = vec({c.moon.radius, deg2rad(c.site_longitude_deg), c.site_track_latitude(), 0, 0, 0, 0});
        ps.control_scale = vec({3200.0, 1.0, 1.0});
        ps.time_scale = 1000.0;
    }
    s[2].state_scale = vec({1000.0, 1000.0, 1000.0, 100.0, 100.0, 100.0, m});
    s[2].state_offset = Vec::Zero(7);
    s[2].control_scale = vec({3200.0, 1.0, 1.0});
    s[2].time_scale = 100.0;
    return s;
}

ocp::MultiphaseProblem build_forward_pass(const MissionConfig& c) {
    c.validate();
    const auto& k = c.moon;
    const auto sc = default_scaling(c);
    const double theta_site = deg2rad(c.site_longitude_deg);
    const double phi_site = c.site_track_latitude();
    const double r_rb = k.radius + c.rough_braking_altitude;
    const double r_fb = c.fine_braking_radius();
    const double r0 = k.radius + c.initial_altitude;
    const double pi = dyn::kPi;

    // rough estimates of the along-track arcs for the initial guess
    const double v_rb = 0.8 * c.v_sops;
    const double arc2 = 0.5 * v_rb * c.duration_guess[1] / k.radius;
    const double arc1 = 0.5 * (c.initial_velocity + v_rb) * c.duration_guess[0] / k.radius;
    const double m_rb = c.initial_mass * std::exp(-(c.initial_velocity - v_rb) / (k.isp * k.g0));
    const double m_fb = m_rb * std::exp(-(v_rb + 1.62 * c.duration_guess[1] * 0.6) / (k.isp * k.g0));
    const double m_td = m_fb - 0.8 * c.max_thrust(2) * c.duration_guess[2] / (k.isp * k.g0);

    ocp::MultiphaseProblem prob;
    prob.objective_scale = c.initial_mass;

    // Phase 1: rough braking
    {
        ocp::PhaseSpec ph = spherical_phase(c, sc[0], 0);
        const Vec& xs = ph.state_scale;
        ph.t0_lower = ph.t0_upper = 0.0;
        ph.tf_lower = c.duration_lower[0];
        ph.tf_upper = c.duration_upper[0];
        ph.boundary_constraints.push_back(pick_initial({0, 3, 4, 5, 6},
                                                       vec({r0, 0.0, 0.0, c.initial_velocity, c.initial_mass}),
                                                       vec({xs(0), xs(3), xs(4), xs(5), xs(6)}), "initial_state"));
        ph.boundary_constraints.push_back(pick_final({0}, vec({r_rb}), vec({xs(0)}), "terminal_radius"));
        ph.boundary_constraints.push_back(pick_final({U + 1, U + 2},
                                                     vec({deg2rad(c.rough_braking_terminal_pitch_deg), 0.0}),
                                                     vec({1.0, 1.0}), "terminal_attitude"));
        ocp::BoundaryConstraint vs;
        vs.fn = [](const ocp::PhaseEnd&, const ocp::PhaseEnd& f) { return Vec::Constant(1, f.x(5)); };
        vs.lower = Vec::Constant(1, -kInf);
        vs.upper = Vec::Constant(1, c.v_sops);
        vs.scale = Vec::Constant(1, xs(5));
        vs.name = "terminal_v_sops";
        ph.boundary_constraints.push_back(vs);
        ph.guess_initial_state = vec({r0, theta_site, phi_site - arc1 - arc2, 0.0, 0.0, c.initial_velocity, c.initial_mass});
        ph.guess_final_state = vec({r_rb, theta_site, phi_site - arc2, -30.0, 0.0, v_rb, m_rb});
        ph.guess_control = vec({c.max_thrust(0), 1.3, 0.0});
        ph.guess_t0 = 0.0;
        ph.guess_tf = c.duration_guess[0];
        prob.phases.push_back(ph);
    }

    // Phase 2: fine braking
    {
        ocp::PhaseSpec ph = spherical_phase(c, sc[1], 1);
        const Vec& xs = ph.state_scale;
        ph.t0_lower = 0.0;
        ph.t0_upper = c.duration_upper[0] + c.attitude_hold.duration;
        ph.tf_lower = 0.0;
        ph.tf_upper = ph.t0_upper + c.duration_upper[1];
        ph.boundary_constraints.push_back(pick_initial({U + 1, U + 2},
                                                       vec({deg2rad(c.rough_braking_terminal_pitch_deg), 0.0}),
                                                       vec({1.0, 1.0}), "initial_attitude"));
        ph.boundary_constraints.push_back(pick_final({0, 1, 2, 3, 4, 5},
                                                     vec({r_fb, theta_site, phi_site, 0.0, 0.0, 0.0}),
                                                     xs.head(6), "terminal_state"));
        ph.boundary_constraints.push_back(
            pick_final({U + 1, U + 2}, vec({0.0, 0.0}), vec({1.0, 1.0}), "terminal_attitude"));
        ph.guess_initial_state = vec({r_rb - 300.0, theta_site, phi_site - arc2, -30.0, 0.0, v_rb, m_rb - 80.0});
        ph.guess_final_state = vec({r_fb, theta_site, phi_site, 0.0, 0.0, 0.0, m_fb});
        ph.guess_control = vec({0.6 * c.max_thrust(1), 0.5, 0.0});
        ph.guess_t0 = c.duration_guess[0] + c.attitude_hold.duration;
        ph.guess_tf = ph.guess_t0 + c.duration_guess[1];
        prob.phases.push_back(ph);
    }

    // Phase 3: terminal descent in the terrain-relative flat frame
    {
        ocp::PhaseSpec ph;
        ph.state_dim = 7;
        ph.control_dim = 3;
        ph.n_collocation = c.collocation[2];
        ph.dynamics = [k](const Vec& x, const Vec& u, double) { return flat_rhs(x, u, k); };
        const double span = 5000.0;
        ph.state_lower = vec({-span, 0.0, -span, -kInf, -kInf, -kInf, k.dry_mass + 1.0});
        ph.state_upper = vec({span, c.fine_braking_altitude + span, span, kInf, kInf, kInf, c.initial_mass});
        const double tilt = c.vertical_terminal_descent ? 0.0 : pi / 2.0;
        ph.control_lower = vec({c.min_thrust(2), -tilt, -tilt});
        ph.control_upper = vec({c.max_thrust(2), tilt, tilt});
        ph.state_scale = sc[2].state_scale;
        ph.state_offset = sc[2].state_offset;
        ph.control_scale = sc[2].control_scale;
        ph.time_scale = sc[2].time_scale;
        ph.duration_lower = c.duration_lower[2];
        ph.duration_upper = c.duration_upper[2];
        ph.t0_lower = 0.0;
        ph.t0_upper = prob.phases[1].tf_upper;
        ph.tf_lower = 0.0;
        ph.tf_upper = ph.t0_upper + c.duration_upper[2];
        ph.boundary_constraints.push_back(
            pick_final({0, 1, 2, 3, 4, 5}, Vec::Zero(6), ph.state_scale.head(6), "terminal_state"));
        if (!c.vertical_terminal_descent)
            ph.boundary_constraints.push_back(
                pick_final({U + 1, U + 2}, vec({0.0, 0.0}), vec({1.0, 1.0}), "terminal_attitude"));
        ph.mayer_cost = [](const ocp::PhaseEnd&, const ocp::PhaseEnd& f) { return -f.x(6); };
        ph.guess_initial_state = vec({0.0, c.fine_braking_altitude, 0.0, 0.0, 0.0, 0.0, m_fb});
        ph.guess_final_state = vec({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, m_td});
        ph.guess_control = vec({0.8 * c.max_thrust(2), 0.0, 0.0});
        ph.guess_t0 = prob.phases[1].guess_tf;
        ph.guess_tf = ph.guess_t0 + c.duration_guess[2];
        prob.phases.push_back(ph);
    }

    // 1 -> 2: x0(2) = P_AH(xf(1)) with the rough-braking terminal thrust; t0(2) = tf(1) + hold
    {
        ocp::LinkageSpec lk;
        lk.left_phase = 0;
        lk.right_phase = 1;
        const auto hold = c.attitude_hold;
        lk.fn = [k, hold](const ocp::PhaseEnd& l, const ocp::PhaseEnd& r) {
            thread_local Vec last_x;
            thread_local double last_T = std::numeric_limits<double>::quiet_NaN();
            thread_local dyn::SphericalState last_held;
            if (!(l.u(0) == last_T && last_x.size() == l.x.size() && last_x == l.x)) {
                last_held = dyn::propagate_attitude_hold(dyn::SphericalState::from_vector(l.x), l.u(0), k, hold);
                last_x = l.x;
                last_T = l.u(0);
            }
            const auto& held = last_held;
            Vec out(8);
            out.head(7) = r.x - held.to_vector();
            out(7) = r.t - l.t - hold.duration;
            return out;
        };
        lk.lower = lk.upper = Vec::Zero(8);
        lk.scale.resize(8);
        lk.scale << sc[1].state_scale, sc[1].time_scale;
        lk.name = "attitude_hold";
        prob.linkages.push_back(lk);
    }

    // 2 -> 3: frame change to the terrain-relative local frame
    {
        ocp::LinkageSpec lk;
        lk.left_phase = 1;
        lk.right_phase = 2;
        const double terrain = c.terrain_elevation;
        lk.fn = [k, terrain](const ocp::PhaseEnd& l, const ocp::PhaseEnd& r) {
            const auto s = dyn::SphericalState::from_vector(l.x);
            const auto local = dyn::spherical_to_local(s, s, k, terrain);
            Vec out(8);
            out.head(7) = r.x - local.to_vector();
            out(7) = r.t - l.t;
            return out;
        };
        lk.lower = lk.upper = Vec::Zero(8);
        lk.scale.resize(8);
        lk.scale << sc[2].state_scale, sc[2].time_scale;
        lk.name = "frame_change";
        prob.linkages.push_back(lk);
    }
    return prob;
}

TrajectorySolution solve_forward_pass(const MissionConfig& config, const sqp::SolverOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const auto fine_problem = build_forward_pass(config);
    const ocp::Transcription fine(fine_problem);

    // coarse pass seeds the fine grid
    MissionConfig coarse_cfg = config;
    for (auto& n : coarse_cfg.collocation) n = std::max(4, n / 3);
    NlpProblem nlp = fine.nlp();
    if (coarse_cfg.collocation != config.collocation) {
        const ocp::Transcription coarse(build_forward_pass(coarse_cfg));
        sqp::SolverOptions copt = options;
        copt.iteration_log = nullptr;
        copt.kkt_tolerance = std::max(options.kkt_tolerance, 1e-4);
        const auto cres = sqp::solve(coarse.nlp(), copt);
        if (cres.status == sqp::SolverStatus::converged || cres.status == sqp::SolverStatus::max_iterations) {
            const auto cv = coarse.unpack(cres.solution);
            std::vector<ocp::PhaseValues> seeded;
            for (std::size_t p = 0; p < 3; ++p) seeded.push_back(regrid(coarse.grids()[p], cv[p], fine.grids()[p]));
            nlp.initial_guess = fine.pack(seeded).cwiseMax(nlp.lower).cwiseMin(nlp.upper);
        }
    }

    TrajectorySolution sol;
    sol.solver = sqp::solve(nlp, options);
    const auto vals = fine.unpack(sol.solver.solution);
    for (std::size_t p = 0; p < 3; ++p) sol.phases[p] = to_phase(fine.grids()[p], vals[p]);
    sol.objective = fine.cost(sol.solver.solution);
    sol.eq_labels = fine.eq_labels();
    sol.ineq_labels = fine.ineq_labels();
    sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
}

ocp::MultiphaseProblem build_rough_braking(const MissionConfig& c, const dyn::SphericalState& terminal,
                                           double hold_thrust, double downrange) {
    c.validate();
    if (!(downrange > 0.0)) throw std::invalid_argument("downrange must be positive");
    if (!(hold_thrust >= c.min_thrust(0) && hold_thrust <= c.max_thrust(0))) {
        throw std::invalid_argument("hold thrust outside the rough-braking thrust bounds");
    }
    const auto& k = c.moon;
    const auto sc = default_scaling(c);
    const double r0 = k.radius + c.initial_altitude;
    const double phi0 = terminal.phi - downrange / k.radius;

    ocp::PhaseSpec ph = spherical_phase(c, sc[0], 0);
    const Vec& xs = ph.state_scale;
    ph.t0_lower = ph.t0_upper = 0.0;
    ph.tf_lower = c.duration_lower[0];
    ph.tf_upper = c.duration_upper[0];
    ph.boundary_constraints.push_back(
        pick_initial({0, 1, 2, 3, 4, 5, 6}, vec({r0, terminal.theta, phi0, 0.0, 0.0, c.initial_velocity, c.initial_mass}),
                     xs, "initial_state"));
    ph.boundary_constraints.push_back(pick_final({0, 1, 2, 3, 4, 5},
                                                 vec({terminal.r, terminal.theta, terminal.phi, terminal.w, terminal.u,
                                                      terminal.v}),
                                                 xs.head(6), "terminal_state"));
    ph.boundary_constraints.push_back(
        pick_final({U + 0, U + 1, U + 2}, vec({hold_thrust, deg2rad(c.rough_braking_terminal_pitch_deg), 0.0}),
                   vec({sc[0].control_scale(0), 1.0, 1.0}), "terminal_control"));
    ph.mayer_cost = [](const ocp::PhaseEnd&, const ocp::PhaseEnd& f) { return -f.x(6); };

    const double mean_speed = 0.5 * (c.initial_velocity + terminal.v);
    const double duration = std::clamp(downrange / mean_speed, c.duration_lower[0], c.duration_upper[0]);
    const double m_f = c.initial_mass * std::exp(-(c.initial_velocity - terminal.v) / (k.isp * k.g0));
    ph.guess_initial_state = vec({r0, terminal.theta, phi0, 0.0, 0.0, c.initial_velocity, c.initial_mass});
    ph.guess_final_state = terminal.to_vector();
    ph.guess_final_state(6) = std::max(m_f, k.dry_mass + 2.0);
    ph.guess_control = vec({c.max_thrust(0), 1.3, 0.0});
    ph.guess_t0 = 0.0;
    ph.guess_tf = duration;

    ocp::MultiphaseProblem prob;
    prob.objective_scale = c.initial_mass;
    prob.phases.push_back(ph);
    return prob;
}

RoughBrakingSolve solve_rough_braking(const MissionConfig& config, const dyn::SphericalState& terminal,
                                      double hold_thrust, double downrange, const sqp::SolverOptions& options) {
    const ocp::Transcription tr(build_rough_braking(config, terminal, hold_thrust, downrange));
    RoughBrakingSolve out;
    out.downrange = downrange;
    out.solver = sqp::solve(tr.nlp(), options);
    const auto vals = tr.unpack(out.solver.solution);
    out.phase = to_phase(tr.grids()[0], vals[0]);
    out.converged = out.solver.status == sqp::SolverStatus::converged;
    out.propellant = out.phase.states(0, 6) - out.phase.states(out.phase.grid.n, 6);
    return out;
}

double bang_bang_fraction(const TrajectorySolution& sol, const MissionConfig& c, double tolerance) {
    int at_bound = 0, total = 0;
    for (int p = 0; p < 3; ++p) {
        const double hi = c.max_thrust(p), lo = c.min_thrust(p);
        for (int i = 0; i < sol.phases[p].controls.rows(); ++i) {
            const double T = sol.phases[p].controls(i, 0);
            at_bound += std::abs(T - hi) <= tolerance * hi || std::abs(T - lo) <= tolerance * hi;
            ++total;
        }
    }
    return total ? static_cast<double>(at_bound) / total : 0.0;
}

Eigen::Vector3d thrust_acceleration(const Eigen::VectorXd& state, const Eigen::VectorXd& control) {
    return control(0) / state(6) * dyn::thrust_direction(control(1), control(2));
}

WaypointSet extract_waypoints(const TrajectorySolution& sol, const MissionConfig& c) {
    WaypointSet w;
    const auto ref = site_reference(c);
    for (std::size_t p = 0; p < 3; ++p) {
        const auto& ph = sol.phases[p];
        const Vec x0 = ph.states.row(0).transpose();
        const Vec xf = ph.states.row(ph.grid.n).transpose();
        const Vec u0 = ph.controls.row(0).transpose();
        const Vec uf = ocp::control_at(ph.grid, ph.controls, 1.0);
        auto& wp = w.phases[p];
        if (p < 2) {
            const auto l0 = dyn::spherical_to_local(dyn::SphericalState::from_vector(x0), ref, c.moon);
            const auto lf = dyn::spherical_to_local(dyn::SphericalState::from_vector(xf), ref, c.moon);
            wp.r0 = l0.position;
            wp.v0 = l0.velocity;
            wp.rf = lf.position;
            wp.vf = lf.velocity;
        } else {
            wp.r0 = x0.head<3>();
            wp.v0 = x0.segment<3>(3);
            wp.rf = xf.head<3>();
            wp.vf = xf.segment<3>(3);
        }
        wp.a0 = thrust_acceleration(x0, u0);
        wp.af = thrust_acceleration(xf, uf);
        wp.t0 = ph.t0;
        wp.tf = ph.tf;
        wp.m0 = x0(6);
        wp.mf = xf(6);
    }
    w.rough_braking_end = dyn::SphericalState::from_vector(sol.phases[0].states.row(sol.phases[0].grid.n).transpose());
    w.fine_braking_start = dyn::SphericalState::from_vector(sol.phases[1].states.row(0).transpose());
    w.attitude_hold_thrust = ocp::control_at(sol.phases[0].grid, sol.phases[0].controls, 1.0)(0);
    return w;
}

VerificationReport verify_solution(const TrajectorySolution& sol, const MissionConfig& c, double thrust_factor,
                                   double step) {
    VerificationReport rep;
    const auto sc = default_scaling(c);
    const auto& k = c.moon;
    for (std::size_t p = 0; p < 3; ++p) {
        const auto& ph = sol.phases[p];
        const double t0 = ph.t0, tf = ph.tf;
        auto rhs = [&, p](double t, const Vec& x) -> Vec {
            const double tau = std::clamp(2.0 * (t - t0) / (tf - t0) - 1.0, -1.0, 1.0);
            Vec u = ocp::control_at(ph.grid, ph.controls, tau);
            u(0) *= thrust_factor;
            return p < 2 ? spherical_rhs(x, u, k) : flat_rhs(x, u, k);
        };
        auto& chk = rep.phases[p];
        const Vec x0 = ph.states.row(0).transpose();
        const Vec xf = ph.states.row(ph.grid.n).transpose();
        try {
            const auto traj = dyn::propagate(rhs, x0, tf - t0, step, t0);
            chk.terminal_mismatch = (traj.x.back() - xf).cwiseAbs().cwiseQuotient(sc[p].state_scale);
        } catch (const dyn::DynamicsError&) {
            chk.terminal_mismatch = Vec::Constant(7, kInf);
        }
        chk.max_scaled_mismatch = chk.terminal_mismatch.maxCoeff();
        chk.propellant_collocated = x0(6) - xf(6);
        double q = 0.0;
        for (int i = 0; i < ph.grid.n; ++i) q += ph.grid.weights(i) * ph.controls(i, 0);
        chk.propellant_quadrature = 0.5 * (tf - t0) * q / (k.isp * k.g0);
        rep.max_scaled_mismatch = std::max(rep.max_scaled_mismatch, chk.max_scaled_mismatch);
    }
    rep.eq_violation = sol.solver.eq_violation;
    rep.ineq_violation = sol.solver.ineq_violation;
    rep.ok = rep.max_scaled_mismatch < 1e-3 && rep.eq_violation < 1e-6 && rep.ineq_violation < 1e-6;
    return rep;
}

}  // namespace landing::mission
