#include "landing/config_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace landing::io {

using nlohmann::json;

namespace {

template <class T>
const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) {
        return "boolean";
    } else if constexpr (std::is_integral_v<T>) {
        return "integer";
    } else if constexpr (std::is_floating_point_v<T>) {
        return "number";
    } else {
        return "string";
    }
}

template <class T>
bool matches(const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v.is_boolean();
    } else if constexpr (std::is_unsigned_v<T>) {
        return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    } else if constexpr (std::is_integral_v<T>) {
        return v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
        return v.is_number();
    } else {
        return v.is_string();
    }
}

// Reads one JSON object, remembering which keys were consumed.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config key '" + label() + "': expected object");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        const json* v = find(key);
        if (!v) return;
        if (!matches<T>(*v)) fail(key, type_name<T>());
        out = v->get<T>();
    }

    template <class T, std::size_t N>
    void get(const std::string& key, std::array<T, N>& out) {
        const json* v = find(key);
        if (!v) return;
        const std::string want = "array of " + std::to_string(N) + " " + type_name<T>() + "s";
        if (!v->is_array() || v->size() != N) fail(key, want);
        for (std::size_t i = 0; i < N; ++i) {
            if (!matches<T>((*v)[i])) fail(key, want);
            out[i] = (*v)[i].get<T>();
        }
    }

    template <int N>
    void get(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
        std::array<double, static_cast<std::size_t>(N)> a{};
        for (int i = 0; i < N; ++i) a[static_cast<std::size_t>(i)] = out(i);
        get(key, a);
        for (int i = 0; i < N; ++i) out(i) = a[static_cast<std::size_t>(i)];
    }

    /// null encodes +infinity
    void get_unbounded(const std::string& key, double& out) {
        const json* v = find(key);
        if (!v) return;
        if (v->is_null()) {
            out = std::numeric_limits<double>::infinity();
        } else if (v->is_number()) {
            out = v->get<double>();
        } else {
            fail(key, "number or null");
        }
    }

    void get_range(const std::string& key, guidance::TgoRange& r) {
        std::array<double, 3> a{r.min, r.max, r.step};
        get(key, a);
        r = {a[0], a[1], a[2]};
    }

    Reader child(const std::string& key) {
        const json* v = find(key);
        static const json empty = json::object();
        return Reader(v ? *v : empty, path_.empty() ? key : path_ + "." + key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError("config key '" + label(k) + "': unknown key");
        }
    }

private:
    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string label(const std::string& key = "") const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }
    [[noreturn]] void fail(const std::string& key, const std::string& want) const {
        throw ConfigError("config key '" + label(key) + "': expected " + want);
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json range_json(const guidance::TgoRange& r) { return json::array({r.min, r.max, r.step}); }

template <int N>
json vector_json(const Eigen::Matrix<double, N, 1>& v) {
    json a = json::array();
    for (int i = 0; i < N; ++i) a.push_back(v(i));
    return a;
}

json unbounded_json(double v) { return std::isinf(v) && v > 0.0 ? json(nullptr) : json(v); }

const char* metric_name(controllability::MarginMetric m) {
    return m == controllability::MarginMetric::distance ? "distance" : "gradient_ratio";
}

void check(bool ok, const std::string& key, const std::string& rule) {
    if (!ok) throw ConfigError("config key '" + key + "': " + rule);
}

bool finite_range(const guidance::TgoRange& r) {
    return r.min > 0.0 && r.max >= r.min && r.step > 0.0 && std::isfinite(r.max);
}

}  // namespace

terminal::TerminalSequenceConfig PipelineConfig::default_terminal() {
    terminal::TerminalSequenceConfig t;
    t.safe_site_offset = Eigen::Vector2d(30.0, 0.0);
    return t;
}

void PipelineConfig::validate() const {
    try {
        mission.moon.validate();
        mission.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config key 'mission': ") + e.what());
    }
    check(threads >= 0, "threads", "must be >= 0");
    check(solver.kkt_tolerance > 0.0, "solver.kkt_tolerance", "must be positive");
    check(solver.constraint_tolerance > 0.0, "solver.constraint_tolerance", "must be positive");
    check(solver.max_iterations > 0, "solver.max_iterations", "must be positive");
    check(solver.threads >= 1, "solver.threads", "must be >= 1");
    check((dispersion.std_dev.array() >= 0.0).all() && dispersion.std_dev.allFinite(), "dispersion.std",
          "entries must be finite and >= 0");
    check(dispersion.count >= 15, "dispersion.count", "must be >= 15");
    check(finite_range(guidance.tgo), "guidance.tgo_s", "needs 0 < min <= max and step > 0");
    check(guidance.rollout.period > 0.0, "guidance.period_s", "must be positive");
    check(guidance.rollout.position_tolerance > 0.0, "guidance.position_tolerance_m", "must be positive");
    check(guidance.rollout.velocity_tolerance > 0.0, "guidance.velocity_tolerance_mps", "must be positive");
    check(classifier.C > 0.0, "classifier.C", "must be positive");
    check(classifier.iterations >= 2, "classifier.iterations", "must be >= 2");
    check(classifier.curvature_floor >= 0.0, "classifier.curvature_floor", "must be >= 0");
    check(refine.S_halfwidth > 0.0, "refine.S_halfwidth_m", "must be positive");
    check(refine.v_halfwidth > 0.0, "refine.v_halfwidth_mps", "must be positive");
    check(refine.w_halfwidth > 0.0, "refine.w_halfwidth_mps", "must be positive");
    check(refine.lambda_points >= 2, "refine.lambda_points", "must be >= 2");
    check(refine.dm_max > 0.0, "refine.dm_max_kg", "must be positive or null");
    check(refine.target_margin_sigma >= 0.0 && std::isfinite(refine.target_margin_sigma),
          "refine.target_margin_sigma", "must be finite and >= 0");
    check(refine.step_tolerance > 0.0 && refine.step_tolerance < 0.25, "refine.step_tolerance", "must lie in (0, 0.25)");
    check(rough_braking.halfwidth >= 0.0, "rough_braking.halfwidth_m", "must be >= 0");
    check(rough_braking.step > 0.0, "rough_braking.step_m", "must be positive");
    try {
        terminal.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config key 'terminal': ") + e.what());
    }
    check(finite_range(terminal.descent_tgo), "terminal.descent_tgo_s", "needs 0 < min <= max and step > 0");
    check(finite_range(terminal.retarget_tgo), "terminal.retarget_tgo_s", "needs 0 < min <= max and step > 0");
    check(finite_range(terminal.handover_tgo), "terminal.handover_tgo_s", "needs 0 < min <= max and step > 0");
}

json to_json(const PipelineConfig& c) {
    const auto& m = c.mission;
    const auto& k = m.moon;
    const auto& t = c.terminal;
    json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["mission"] = {
        {"moon",
         {{"mu_m3ps2", k.mu},
          {"radius_m", k.radius},
          {"omega_radps", k.omega},
          {"g0_mps2", k.g0},
          {"isp_s", k.isp},
          {"engine_max_thrust_N", k.engine_max_thrust},
          {"underperformance", k.underperformance},
          {"g_moon_mps2", k.g_moon},
          {"dry_mass_kg", k.dry_mass}}},
        {"initial_altitude_m", m.initial_altitude},
        {"initial_velocity_mps", m.initial_velocity},
        {"initial_mass_kg", m.initial_mass},
        {"rough_braking_altitude_m", m.rough_braking_altitude},
        {"v_sops_mps", m.v_sops},
        {"fine_braking_altitude_m", m.fine_braking_altitude},
        {"site_latitude_deg", m.site_latitude_deg},
        {"site_longitude_deg", m.site_longitude_deg},
        {"terrain_elevation_m", m.terrain_elevation},
        {"southbound_approach", m.southbound_approach},
        {"collocation", m.collocation},
        {"engines", m.engines},
        {"min_thrust_fraction", m.min_thrust_fraction},
        {"duration_lower_s", m.duration_lower},
        {"duration_upper_s", m.duration_upper},
        {"duration_guess_s", m.duration_guess},
        {"rough_braking_terminal_pitch_deg", m.rough_braking_terminal_pitch_deg},
        {"vertical_terminal_descent", m.vertical_terminal_descent},
        {"attitude_hold", {{"duration_s", m.attitude_hold.duration}, {"step_s", m.attitude_hold.step}}},
    };
    j["solver"] = {{"kkt_tolerance", c.solver.kkt_tolerance},
                   {"constraint_tolerance", c.solver.constraint_tolerance},
                   {"max_iterations", c.solver.max_iterations},
                   {"threads", c.solver.threads}};
    j["dispersion"] = {{"std", vector_json(c.dispersion.std_dev)}, {"count", c.dispersion.count}};
    j["guidance"] = {{"tgo_s", range_json(c.guidance.tgo)},
                     {"period_s", c.guidance.rollout.period},
                     {"position_tolerance_m", c.guidance.rollout.position_tolerance},
                     {"velocity_tolerance_mps", c.guidance.rollout.velocity_tolerance},
                     {"fast_path", c.guidance.rollout.fast_path}};
    j["classifier"] = {{"C", c.classifier.C},
                       {"iterations", c.classifier.iterations},
                       {"convex", c.classifier.convex},
                       {"curvature_floor", c.classifier.curvature_floor}};
    j["refine"] = {{"S_halfwidth_m", c.refine.S_halfwidth},
                   {"v_halfwidth_mps", c.refine.v_halfwidth},
                   {"w_halfwidth_mps", c.refine.w_halfwidth},
                   {"lambda_points", c.refine.lambda_points},
                   {"dm_max_kg", unbounded_json(c.refine.dm_max)},
                   {"target_margin_sigma", c.refine.target_margin_sigma},
                   {"metric", metric_name(c.refine.metric)},
                   {"step_tolerance", c.refine.step_tolerance}};
    j["rough_braking"] = {{"halfwidth_m", c.rough_braking.halfwidth}, {"step_m", c.rough_braking.step}};
    j["terminal"] = {{"first_hover_s", t.first_hover},
                     {"intermediate_altitude_m", t.intermediate_altitude},
                     {"second_hover_max_s", t.second_hover_max},
                     {"hazard_decision_time_s", t.hazard_decision_time},
                     {"safe_site_offset_m", vector_json(Eigen::Vector2d(t.safe_site_offset))},
                     {"retarget_altitude_m", t.retarget_altitude},
                     {"handover_altitude_m", t.handover_altitude},
                     {"handover_velocity_mps", t.handover_velocity},
                     {"descent_velocity_mps", t.descent_velocity},
                     {"rate_gain_per_s", t.rate_gain},
                     {"engines", t.engines},
                     {"min_thrust_fraction", t.min_thrust_fraction},
                     {"period_s", t.period},
                     {"position_tolerance_m", t.position_tolerance},
                     {"velocity_tolerance_mps", t.velocity_tolerance},
                     {"descent_tgo_s", range_json(t.descent_tgo)},
                     {"retarget_tgo_s", range_json(t.retarget_tgo)},
                     {"handover_tgo_s", range_json(t.handover_tgo)}};
    return j;
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    Reader root(j, "");
    root.get("seed", c.seed);
    root.get("threads", c.threads);
    {
        auto& m = c.mission;
        Reader r = root.child("mission");
        {
            Reader k = r.child("moon");
            k.get("mu_m3ps2", m.moon.mu);
            k.get("radius_m", m.moon.radius);
            k.get("omega_radps", m.moon.omega);
            k.get("g0_mps2", m.moon.g0);
            k.get("isp_s", m.moon.isp);
            k.get("engine_max_thrust_N", m.moon.engine_max_thrust);
            k.get("underperformance", m.moon.underperformance);
            k.get("g_moon_mps2", m.moon.g_moon);
            k.get("dry_mass_kg", m.moon.dry_mass);
            k.finish();
        }
        r.get("initial_altitude_m", m.initial_altitude);
        r.get("initial_velocity_mps", m.initial_velocity);
        r.get("initial_mass_kg", m.initial_mass);
        r.get("rough_braking_altitude_m", m.rough_braking_altitude);
        r.get("v_sops_mps", m.v_sops);
        r.get("fine_braking_altitude_m", m.fine_braking_altitude);
        r.get("site_latitude_deg", m.site_latitude_deg);
        r.get("site_longitude_deg", m.site_longitude_deg);
        r.get("terrain_elevation_m", m.terrain_elevation);
        r.get("southbound_approach", m.southbound_approach);
        r.get("collocation", m.collocation);
        r.get("engines", m.engines);
        r.get("min_thrust_fraction", m.min_thrust_fraction);
        r.get("duration_lower_s", m.duration_lower);
        r.get("duration_upper_s", m.duration_upper);
        r.get("duration_guess_s", m.duration_guess);
        r.get("rough_braking_terminal_pitch_deg", m.rough_braking_terminal_pitch_deg);
        r.get("vertical_terminal_descent", m.vertical_terminal_descent);
        {
            Reader a = r.child("attitude_hold");
            a.get("duration_s", m.attitude_hold.duration);
            a.get("step_s", m.attitude_hold.step);
            a.finish();
        }
        m.attitude_hold.alpha = dyn::deg2rad(m.rough_braking_terminal_pitch_deg);
        r.finish();
    }
    {
        Reader r = root.child("solver");
        r.get("kkt_tolerance", c.solver.kkt_tolerance);
        r.get("constraint_tolerance", c.solver.constraint_tolerance);
        r.get("max_iterations", c.solver.max_iterations);
        r.get("threads", c.solver.threads);
        r.finish();
    }
    {
        Reader r = root.child("dispersion");
        r.get("std", c.dispersion.std_dev);
        r.get("count", c.dispersion.count);
        r.finish();
    }
    {
        Reader r = root.child("guidance");
        r.get_range("tgo_s", c.guidance.tgo);
        r.get("period_s", c.guidance.rollout.period);
        r.get("position_tolerance_m", c.guidance.rollout.position_tolerance);
        r.get("velocity_tolerance_mps", c.guidance.rollout.velocity_tolerance);
        r.get("fast_path", c.guidance.rollout.fast_path);
        r.finish();
    }
    {
        Reader r = root.child("classifier");
        r.get("C", c.classifier.C);
        r.get("iterations", c.classifier.iterations);
        r.get("convex", c.classifier.convex);
        r.get("curvature_floor", c.classifier.curvature_floor);
        r.finish();
    }
    {
        Reader r = root.child("refine");
        r.get("S_halfwidth_m", c.refine.S_halfwidth);
        r.get("v_halfwidth_mps", c.refine.v_halfwidth);
        r.get("w_halfwidth_mps", c.refine.w_halfwidth);
        r.get("lambda_points", c.refine.lambda_points);
        r.get_unbounded("dm_max_kg", c.refine.dm_max);
        r.get("target_margin_sigma", c.refine.target_margin_sigma);
        std::string metric = metric_name(c.refine.metric);
        r.get("metric", metric);
        if (metric == "distance") {
            c.refine.metric = controllability::MarginMetric::distance;
        } else if (metric == "gradient_ratio") {
            c.refine.metric = controllability::MarginMetric::gradient_ratio;
        } else {
            throw ConfigError("config key 'refine.metric': expected \"distance\" or \"gradient_ratio\"");
        }
        r.get("step_tolerance", c.refine.step_tolerance);
        r.finish();
    }
    {
        Reader r = root.child("rough_braking");
        r.get("halfwidth_m", c.rough_braking.halfwidth);
        r.get("step_m", c.rough_braking.step);
        r.finish();
    }
    {
        auto& t = c.terminal;
        Reader r = root.child("terminal");
        r.get("first_hover_s", t.first_hover);
        r.get("intermediate_altitude_m", t.intermediate_altitude);
        r.get("second_hover_max_s", t.second_hover_max);
        r.get("hazard_decision_time_s", t.hazard_decision_time);
        Eigen::Matrix<double, 2, 1> off = t.safe_site_offset;
        r.get("safe_site_offset_m", off);
        t.safe_site_offset = off;
        r.get("retarget_altitude_m", t.retarget_altitude);
        r.get("handover_altitude_m", t.handover_altitude);
        r.get("handover_velocity_mps", t.handover_velocity);
        r.get("descent_velocity_mps", t.descent_velocity);
        r.get("rate_gain_per_s", t.rate_gain);
        r.get("engines", t.engines);
        r.get("min_thrust_fraction", t.min_thrust_fraction);
        r.get("period_s", t.period);
        r.get("position_tolerance_m", t.position_tolerance);
        r.get("velocity_tolerance_mps", t.velocity_tolerance);
        r.get_range("descent_tgo_s", t.descent_tgo);
        r.get_range("retarget_tgo_s", t.retarget_tgo);
        r.get_range("handover_tgo_s", t.handover_tgo);
        r.finish();
    }
    root.finish();
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void save_config(const PipelineConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json(config).dump(2) << '\n';
}

std::string config_hash(const PipelineConfig& config) {
    const std::string s = to_json(config).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw std::out_of_range("table has no column " + name);
}

void write_table(const std::filesystem::path& path, const Table& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n' << std::setprecision(17);
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) throw std::logic_error("write_table: ragged row");
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
}

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != t.columns.size()) throw std::runtime_error(path.string() + ": ragged row");
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace landing::io
