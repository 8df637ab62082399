#ifndef LANDING_CONFIG_IO_HPP
#define LANDING_CONFIG_IO_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "landing/controllability.hpp"
#include "landing/descent_mission.hpp"
#include "landing/polynomial_guidance.hpp"
#include "landing/sqp_solver.hpp"
#include "landing/terminal_descent.hpp"

namespace landing::io {

/// Schema or validation failure; the message names the offending key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct DispersionSettings {
    Eigen::Vector4d std_dev{500.0, 500.0, 10.0, 10.0};  // S m, H m, w m/s, v m/s
    int count = 2000;
};

struct GuidanceSettings {
    guidance::TgoRange tgo{50.0, 115.0, 1.0};  // fine braking
    guidance::RolloutOptions rollout;
};

struct RefineSettings {
    double S_halfwidth = 1500.0;  // m, box about the forward-pass waypoint
    double v_halfwidth = 15.0;    // m/s
    double w_halfwidth = 15.0;    // m/s
    int lambda_points = 21;
    double dm_max = std::numeric_limits<double>::infinity();  // kg
    double target_margin_sigma = 3.0;
    controllability::MarginMetric metric = controllability::MarginMetric::distance;
    double step_tolerance = 1e-7;
};

struct RoughBrakingSettings {
    double halfwidth = 15000.0;  // m about the forward-pass rough-braking downrange
    double step = 5000.0;        // m
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    int threads = 0;  // dataset rollouts, 0 = hardware concurrency
    mission::MissionConfig mission;
    sqp::SolverOptions solver;
    DispersionSettings dispersion;
    GuidanceSettings guidance;
    controllability::SvmOptions classifier;
    RefineSettings refine;
    RoughBrakingSettings rough_braking;
    terminal::TerminalSequenceConfig terminal = default_terminal();

    static terminal::TerminalSequenceConfig default_terminal();
    /// Throws ConfigError.
    void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Missing keys take their defaults; unknown keys and type mismatches throw ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& config, const std::filesystem::path& path);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

/// Comma-separated table with a header row of column names carrying units.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const;
};

void write_table(const std::filesystem::path& path, const Table& table);
Table read_table(const std::filesystem::path& path);

}  // namespace landing::io

#endif  // LANDING_CONFIG_IO_HPP
