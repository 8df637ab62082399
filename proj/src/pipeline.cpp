#include "landing/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace landing::io {

namespace fs = std::filesystem;
using nlohmann::json;
using controllability::ClassificationDataset;
using controllability::ConicBoundary;
using controllability::GuidanceRow;
using controllability::LabeledSample;
using guidance::GuidanceFeatures;
using guidance::RolloutSample;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kTraceColumns{"t_s",   "downrange_m", "altitude_m", "crossrange_m",
                                             "v_mps", "w_mps",       "u_mps",      "mass_kg",
                                             "thrust_N", "alpha_rad", "beta_rad"};
const std::vector<std::string> kDatasetColumns{"S_m",  "H_m",  "w_mps",  "v_mps",       "label",      "s1_s",
                                               "s2_s", "usable", "t_go_star_s", "dm_star_kg", "final_mass_kg"};
const std::vector<std::string> kConicColumns{"a_per_s2", "b_per_s2", "c_per_s2", "d_per_s",
                                             "e_per_s",  "f",        "orientation"};
const std::vector<std::string> kTradeoffColumns{"lambda", "S_m", "v_mps", "w_mps", "margin_sigma", "dm_kg"};

json vec_json(const Eigen::Vector3d& v) { return json::array({v(0), v(1), v(2)}); }

Eigen::Vector3d vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json spherical_json(const dyn::SphericalState& s) {
    return {{"r_m", s.r}, {"theta_rad", s.theta}, {"phi_rad", s.phi}, {"w_mps", s.w},
            {"u_mps", s.u}, {"v_mps", s.v},       {"m_kg", s.m}};
}

dyn::SphericalState spherical_from(const json& j) {
    dyn::SphericalState s;
    s.r = j.at("r_m").get<double>();
    s.theta = j.at("theta_rad").get<double>();
    s.phi = j.at("phi_rad").get<double>();
    s.w = j.at("w_mps").get<double>();
    s.u = j.at("u_mps").get<double>();
    s.v = j.at("v_mps").get<double>();
    s.m = j.at("m_kg").get<double>();
    return s;
}

json features_json(const GuidanceFeatures& x) {
    return {{"S_m", x.S}, {"H_m", x.H}, {"w_mps", x.w}, {"v_mps", x.v}};
}

std::vector<double> trace_row(const RolloutSample& s) {
    const auto [alpha, beta] = guidance::thrust_angles(s.thrust);
    return {s.t,           s.position(0), s.position(1), s.position(2),  s.velocity(0), s.velocity(1),
            s.velocity(2), s.mass,        s.thrust.norm(), alpha, beta};
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    return json::parse(in);
}

class Stages {
public:
    Stages(const PipelineConfig& config, fs::path out, std::ostream* log)
        : c_(config), out_(std::move(out)), log_(log) {}

    StageRecord run(const std::string& name) {
        StageRecord rec;
        rec.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        note("stage " + name);
        if (name == "optimize") {
            rec.files = optimize();
        } else if (name == "dataset") {
            rec.files = dataset();
        } else if (name == "classify") {
            rec.files = classify();
        } else if (name == "refine") {
            rec.files = refine();
        } else {
            rec.files = terminal();
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        note("stage " + name + " done in " + std::to_string(rec.seconds) + " s");
        return rec;
    }

private:
    void note(const std::string& s) const {
        if (log_) *log_ << s << std::endl;
    }

    fs::path require(const std::string& file, const std::string& stage) const {
        const fs::path p = out_ / file;
        if (!fs::exists(p)) {
            throw DependencyError("missing " + p.string() + "; run stage '" + stage + "' first", stage);
        }
        return p;
    }

    mission::WaypointSet load_waypoints() const {
        return waypoints_from_json(read_json(require("waypoints.json", "optimize")).at("waypoints"));
    }

    std::vector<std::string> optimize() {
        const auto& m = c_.mission;
        const auto sol = mission::solve_forward_pass(m, c_.solver);
        note("forward pass: " + sqp::to_string(sol.solver.status) + " after " +
             std::to_string(sol.solver.iterations) + " iterations");
        if (sol.solver.status != sqp::SolverStatus::converged) {
            throw NonConvergenceError("forward pass did not converge: " + sqp::to_string(sol.solver.status));
        }
        const auto w = mission::extract_waypoints(sol, m);
        const auto rep = mission::verify_solution(sol, m);
        const auto ref = mission::site_reference(m);

        Table traj{kTraceColumns, {}};
        for (int p = 0; p < 3; ++p) {
            const auto& ph = sol.phases[static_cast<std::size_t>(p)];
            for (int i = 0; i <= ph.grid.n; ++i) {
                const double tau = ph.grid.nodes(i);
                const Eigen::VectorXd x = ph.states.row(i).transpose();
                const Eigen::VectorXd u =
                    i < ph.grid.n ? Eigen::VectorXd(ph.controls.row(i).transpose()) : ocp::control_at(ph.grid, ph.controls, 1.0);
                RolloutSample s;
                s.t = ph.t0 + 0.5 * (tau + 1.0) * (ph.tf - ph.t0);
                if (p < 2) {
                    const auto l = dyn::spherical_to_local(dyn::SphericalState::from_vector(x), ref, m.moon);
                    s.position = l.position;
                    s.velocity = l.velocity;
                } else {
                    s.position = x.head<3>() + Eigen::Vector3d(w.phases[1].rf.x(), m.terrain_elevation, w.phases[1].rf.z());
                    s.velocity = x.segment<3>(3);
                }
                s.mass = x(6);
                s.thrust = u(0) * dyn::thrust_direction(u(1), u(2));
                traj.rows.push_back(trace_row(s));
            }
        }
        write_table(out_ / "trajectory.csv", traj);

        const auto& p1 = sol.phases[0];
        json phases = json::array();
        for (int p = 0; p < 3; ++p) {
            const auto& chk = rep.phases[static_cast<std::size_t>(p)];
            phases.push_back({{"duration_s", sol.phases[static_cast<std::size_t>(p)].tf - sol.phases[static_cast<std::size_t>(p)].t0},
                              {"propellant_kg", chk.propellant_collocated},
                              {"propellant_quadrature_kg", chk.propellant_quadrature},
                              {"max_scaled_mismatch", chk.max_scaled_mismatch}});
        }
        json j;
        j["waypoints"] = waypoints_to_json(w);
        j["solver"] = {{"status", sqp::to_string(sol.solver.status)},
                       {"iterations", sol.solver.iterations},
                       {"objective", sol.objective},
                       {"eq_violation", sol.solver.eq_violation},
                       {"ineq_violation", sol.solver.ineq_violation},
                       {"kkt_residual", sol.solver.kkt_residual},
                       {"seconds", sol.solve_seconds}};
        j["verification"] = {{"ok", rep.ok}, {"max_scaled_mismatch", rep.max_scaled_mismatch}, {"phases", phases}};
        j["bang_bang_fraction"] = mission::bang_bang_fraction(sol, m);
        j["final_mass_kg"] = sol.final_mass();
        j["propellant_kg"] = sol.propellant();
        j["rough_braking_downrange_m"] = m.moon.radius * (p1.states(p1.grid.n, 2) - p1.states(0, 2));
        write_json(out_ / "waypoints.json", j);
        return {"trajectory.csv", "waypoints.json"};
    }

    std::vector<std::string> dataset() {
        const auto w = load_waypoints();
        const auto setup = rollout_setup(w, c_);
        controllability::DispersionModel model;
        model.mean = nominal_features(w);
        model.covariance = c_.dispersion.std_dev.array().square().matrix().asDiagonal();
        model.count = c_.dispersion.count;
        model.seed = c_.seed;
        const auto samples = controllability::sample_dispersions(model);
        const auto d = controllability::build_datasets(samples, setup, c_.threads);
        note("dataset: " + std::to_string(d.classification.controllable()) + " of " +
             std::to_string(samples.size()) + " controllable");

        Table t{kDatasetColumns, {}};
        Table set{{"sample", "t_go_s", "final_mass_kg"}, {}};
        std::vector<guidance::TgoSample> policy;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& ls = d.classification.samples[i];
            const auto& r = d.rollouts[i];
            const bool ok = r.controllable;
            t.rows.push_back({ls.x.S, ls.x.H, ls.x.w, ls.x.v, static_cast<double>(ls.label), ls.s(0), ls.s(1),
                              ls.usable ? 1.0 : 0.0, ok ? r.t_go_star : kNaN, ok ? r.dm_star : kNaN,
                              ok ? r.final_mass_star : kNaN});
            for (const auto& [tgo, mf] : r.feasible) set.rows.push_back({static_cast<double>(i), tgo, mf});
            if (ok) policy.push_back({ls.x, r.t_go_star});
        }
        write_table(out_ / "dataset.csv", t);
        write_table(out_ / "controllable_set.csv", set);

        json pj;
        try {
            const auto fit = guidance::fit_tgo_policy(policy);
            json terms = json::array();
            for (std::size_t k = 0; k < fit.model.terms(); ++k) {
                terms.push_back({{"monomial", fit.model.monomial_name(k)}, {"coefficient", fit.model.coefficients()(static_cast<Eigen::Index>(k))}});
            }
            pj = {{"fitted", true}, {"samples", policy.size()}, {"rms_s", fit.rms()}, {"degree", fit.model.degree()},
                  {"standardization_mean", std::vector<double>(fit.model.mean().data(), fit.model.mean().data() + fit.model.mean().size())},
                  {"standardization_scale", std::vector<double>(fit.model.scale().data(), fit.model.scale().data() + fit.model.scale().size())},
                  {"terms", terms}};
        } catch (const std::exception& e) {
            pj = {{"fitted", false}, {"samples", policy.size()}, {"reason", e.what()}};
        }
        write_json(out_ / "tgo_policy.json", pj);
        return {"dataset.csv", "controllable_set.csv", "tgo_policy.json"};
    }

    struct LoadedDataset {
        ClassificationDataset classification;
        std::vector<GuidanceRow> guidance;
    };

    LoadedDataset load_dataset() const {
        const Table t = read_table(require("dataset.csv", "dataset"));
        if (t.columns != kDatasetColumns) throw std::runtime_error("dataset.csv: unexpected columns");
        LoadedDataset d;
        for (const auto& r : t.rows) {
            LabeledSample s;
            s.x = {r[0], r[1], r[2], r[3]};
            s.label = static_cast<int>(r[4]);
            s.s = Eigen::Vector2d(r[5], r[6]);
            s.usable = r[7] != 0.0;
            d.classification.samples.push_back(s);
            if (s.label == 1) d.guidance.push_back({s.x, r[8], r[9], r[10]});
        }
        return d;
    }

    std::vector<std::string> classify() {
        const auto d = load_dataset();
        auto opt = c_.classifier;
        opt.seed = c_.seed;
        ConicBoundary b;
        try {
            b = controllability::fit_conic_boundary(d.classification, opt);
        } catch (const controllability::ConvexityError& e) {
            throw NonConvergenceError(std::string("conic fit: ") + e.what());
        }
        const double sigma = controllability::margin_sigma(b, d.classification, c_.refine.metric);
        int usable = 0, correct = 0;
        for (const auto& s : d.classification.samples) {
            if (!s.usable) continue;
            ++usable;
            correct += b.controllable(s.s) == (s.label == 1);
        }
        Table t{kConicColumns, {}};
        std::vector<double> row(b.coefficients.begin(), b.coefficients.end());
        row.push_back(b.orientation);
        t.rows.push_back(row);
        write_table(out_ / "conic.csv", t);
        const double accuracy = usable ? static_cast<double>(correct) / usable : 0.0;
        note("classifier accuracy " + std::to_string(accuracy) + ", sigma " + std::to_string(sigma));
        write_json(out_ / "classification.json",
                   {{"sigma", sigma},
                    {"metric", c_.refine.metric == controllability::MarginMetric::distance ? "distance" : "gradient_ratio"},
                    {"training_accuracy", accuracy},
                    {"samples", d.classification.samples.size()},
                    {"usable", usable},
                    {"excluded", d.classification.excluded()},
                    {"controllable", d.classification.controllable()},
                    {"discriminant", b.discriminant()}});
        return {"conic.csv", "classification.json"};
    }

    std::vector<std::string> refine() {
        const Table ct = read_table(require("conic.csv", "classify"));
        const json cj = read_json(require("classification.json", "classify"));
        const auto d = load_dataset();
        const auto w = load_waypoints();
        const json wj = read_json(require("waypoints.json", "optimize"));
        if (ct.rows.size() != 1 || ct.columns != kConicColumns) throw std::runtime_error("conic.csv: unexpected layout");
        ConicBoundary b;
        for (std::size_t i = 0; i < 6; ++i) b.coefficients[i] = ct.rows[0][i];
        b.orientation = static_cast<int>(ct.rows[0][6]);
        const double sigma = cj.at("sigma").get<double>();

        const auto surrogate = controllability::fit_dm_surrogate(d.guidance);
        const auto nominal = nominal_features(w);
        const auto base = refine_base(c_, nominal, sigma);
        const auto curve =
            controllability::trace_tradeoff(b, surrogate, controllability::lambda_grid(c_.refine.lambda_points), sigma, base);
        Table tt{kTradeoffColumns, {}};
        for (const auto& e : curve.entries) {
            tt.rows.push_back({e.lambda, e.x.S, e.x.v, e.x.w, e.feasible ? e.margin_sigma : kNaN, e.feasible ? e.dm : kNaN});
        }
        write_table(out_ / "tradeoff.csv", tt);

        controllability::RefinedWaypoint wp;
        try {
            wp = controllability::waypoint_at_margin(b, surrogate, c_.refine.target_margin_sigma, sigma, base);
        } catch (const controllability::InfeasibleRefinement& e) {
            throw NonConvergenceError(std::string("waypoint refinement: ") + e.what());
        }
        note("refined waypoint at " + std::to_string(wp.margin_sigma) + " sigma, dm " + std::to_string(wp.dm) + " kg");

        const auto setup = rollout_setup(w, c_);
        const auto fb = controllability::fine_braking_state(wp.x, setup, c_.mission);
        const double center = wj.at("rough_braking_downrange_m").get<double>();
        const double lo = std::max(c_.rough_braking.step, center - c_.rough_braking.halfwidth);
        controllability::RoughBrakingSearch search;
        try {
            search = controllability::rough_braking_line_search(fb, w.attitude_hold_thrust, c_.mission, lo,
                                                                center + c_.rough_braking.halfwidth,
                                                                c_.rough_braking.step, c_.solver);
        } catch (const std::runtime_error& e) {
            throw NonConvergenceError(e.what());
        }
        Table rt{{"downrange_m", "feasible", "propellant_kg"}, {}};
        for (const auto& cand : search.candidates) {
            rt.rows.push_back({cand.downrange, cand.feasible ? 1.0 : 0.0, cand.feasible ? cand.propellant : kNaN});
        }
        write_table(out_ / "rough_braking.csv", rt);

        json j;
        j["target_margin_sigma"] = c_.refine.target_margin_sigma;
        j["nominal"] = features_json(nominal);
        j["nominal_margin_sigma"] = controllability::margin(b, controllability::reduced_coordinates(nominal), c_.refine.metric) / sigma;
        j["nominal_dm_kg"] = surrogate(nominal);
        j["refined"] = features_json(wp.x);
        j["refined"]["margin_sigma"] = wp.margin_sigma;
        j["refined"]["dm_kg"] = wp.dm;
        j["surrogate_rms_kg"] = surrogate.rms();
        j["fine_braking_start"] = spherical_json(search.fine_braking_start);
        j["rough_braking_end"] = spherical_json(search.rough_braking_end);
        j["rough_braking"] = {{"selected_downrange_m", search.selected_downrange},
                              {"propellant_kg", search.selected.propellant},
                              {"iterations", search.selected.solver.iterations}};
        write_json(out_ / "refined.json", j);
        return {"tradeoff.csv", "rough_braking.csv", "refined.json"};
    }

    std::vector<std::string> terminal() {
        const auto w = load_waypoints();
        const auto& p3 = w.phases[2];
        dyn::LocalState x0;
        x0.position = p3.r0;
        x0.velocity = p3.v0;
        x0.mass = p3.m0;
        terminal::TerminalTrajectory r;
        std::string failure;
        try {
            r = terminal::simulate_terminal_sequence(x0, c_.terminal, c_.mission.moon);
        } catch (const terminal::TerminalSequenceError& e) {
            r = e.partial();
            failure = e.what();
        }
        Table t{kTraceColumns, {}};
        for (const auto& s : r.trace()) t.rows.push_back(trace_row(s));
        write_table(out_ / "terminal_trajectory.csv", t);

        json segs = json::array();
        for (const auto& s : r.segments) {
            segs.push_back({{"label", s.label}, {"duration_s", s.duration}, {"propellant_kg", s.propellant}, {"t_go_s", s.t_go}});
        }
        json j{{"segments", segs},
               {"total_propellant_kg", r.total_propellant},
               {"diagnostics", r.diagnostics},
               {"completed", failure.empty()}};
        if (failure.empty()) {
            j["touchdown"] = {{"position_m", vec_json(r.touchdown.position)},
                              {"velocity_mps", vec_json(r.touchdown.velocity)},
                              {"mass_kg", r.touchdown.mass}};
            j["site_m"] = vec_json(r.site);
            j["lateral_error_m"] = r.lateral_error();
        } else {
            j["failure"] = failure;
        }
        write_json(out_ / "terminal.json", j);
        if (!failure.empty()) throw NonConvergenceError("terminal descent: " + failure);
        return {"terminal_trajectory.csv", "terminal.json"};
    }

    const PipelineConfig& c_;
    fs::path out_;
    std::ostream* log_;
};

}  // namespace

json RunManifest::to_json() const {
    json st = json::array();
    for (const auto& s : stages) st.push_back({{"name", s.name}, {"files", s.files}, {"seconds", s.seconds}});
    return {{"config_hash", config_hash}, {"seed", seed}, {"version", version}, {"stages", st}};
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"optimize", "dataset", "classify", "refine", "terminal"};
    return names;
}

json waypoints_to_json(const mission::WaypointSet& w) {
    json phases = json::array();
    for (const auto& p : w.phases) {
        phases.push_back({{"r0_m", vec_json(p.r0)},   {"v0_mps", vec_json(p.v0)}, {"a0_mps2", vec_json(p.a0)},
                          {"rf_m", vec_json(p.rf)},   {"vf_mps", vec_json(p.vf)}, {"af_mps2", vec_json(p.af)},
                          {"t0_s", p.t0},             {"tf_s", p.tf},             {"m0_kg", p.m0},
                          {"mf_kg", p.mf}});
    }
    return {{"phases", phases},
            {"rough_braking_end", spherical_json(w.rough_braking_end)},
            {"fine_braking_start", spherical_json(w.fine_braking_start)},
            {"attitude_hold_thrust_N", w.attitude_hold_thrust}};
}

mission::WaypointSet waypoints_from_json(const json& j) {
    mission::WaypointSet w;
    const auto& phases = j.at("phases");
    if (!phases.is_array() || phases.size() != 3) throw std::runtime_error("waypoints: expected three phases");
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& q = phases[i];
        auto& p = w.phases[i];
        p.r0 = vec_from(q.at("r0_m"));
        p.v0 = vec_from(q.at("v0_mps"));
        p.a0 = vec_from(q.at("a0_mps2"));
        p.rf = vec_from(q.at("rf_m"));
        p.vf = vec_from(q.at("vf_mps"));
        p.af = vec_from(q.at("af_mps2"));
        p.t0 = q.at("t0_s").get<double>();
        p.tf = q.at("tf_s").get<double>();
        p.m0 = q.at("m0_kg").get<double>();
        p.mf = q.at("mf_kg").get<double>();
    }
    w.rough_braking_end = spherical_from(j.at("rough_braking_end"));
    w.fine_braking_start = spherical_from(j.at("fine_braking_start"));
    w.attitude_hold_thrust = j.at("attitude_hold_thrust_N").get<double>();
    return w;
}

controllability::RolloutSetup rollout_setup(const mission::WaypointSet& w, const PipelineConfig& config) {
    const auto& fb = w.phases[1];
    controllability::RolloutSetup s;
    s.target = {fb.rf, fb.vf, fb.af};
    s.a0 = fb.a0;
    s.mass = fb.m0;
    s.range = config.guidance.tgo;
    s.limits = {config.mission.min_thrust(1), config.mission.max_thrust(1)};
    s.options = config.guidance.rollout;
    s.moon = config.mission.moon;
    return s;
}

GuidanceFeatures nominal_features(const mission::WaypointSet& w) {
    const auto& fb = w.phases[1];
    dyn::LocalState x;
    x.position = fb.r0;
    x.velocity = fb.v0;
    x.mass = fb.m0;
    return guidance::features(x, {fb.rf, fb.vf, fb.af});
}

controllability::RefineConfig refine_base(const PipelineConfig& config, const GuidanceFeatures& nominal,
                                          double sigma) {
    const auto& r = config.refine;
    controllability::RefineConfig b;
    b.H = nominal.H;
    b.S_bounds = {nominal.S - r.S_halfwidth, nominal.S + r.S_halfwidth};
    b.v_bounds = {nominal.v - r.v_halfwidth, std::min(config.mission.v_sops, nominal.v + r.v_halfwidth)};
    b.w_bounds = {nominal.w - r.w_halfwidth, nominal.w + r.w_halfwidth};
    b.v_sops = config.mission.v_sops;
    b.dm_max = r.dm_max;
    b.margin_scale = sigma;
    b.metric = r.metric;
    b.step_tolerance = r.step_tolerance;
    return b;
}

RunManifest run_pipeline(const PipelineConfig& config, const std::string& stage, const fs::path& out_dir,
                         std::ostream* log) {
    const auto& names = stage_names();
    std::vector<std::string> todo;
    if (stage == "all") {
        todo = names;
    } else if (std::find(names.begin(), names.end(), stage) != names.end()) {
        todo = {stage};
    } else {
        throw ConfigError("unknown stage '" + stage + "' (expected optimize, dataset, classify, refine, terminal or all)");
    }
    config.validate();
    fs::create_directories(out_dir);
    save_config(config, out_dir / "config.json");

    RunManifest man;
    man.config_hash = config_hash(config);
    man.seed = config.seed;
    Stages stages(config, out_dir, log);
    for (const auto& s : todo) man.stages.push_back(stages.run(s));
    write_json(out_dir / "manifest.json", man.to_json());
    return man;
}

}  // namespace landing::io
