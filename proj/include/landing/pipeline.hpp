#ifndef LANDING_PIPELINE_HPP
#define LANDING_PIPELINE_HPP

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "landing/config_io.hpp"

namespace landing::io {

inline constexpr const char* kToolkitVersion = "1.0.0";

/// An upstream artifact is missing; the message names the stage that produces it.
class DependencyError : public std::runtime_error {
public:
    DependencyError(const std::string& what, std::string stage)
        : std::runtime_error(what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// A solver, fit or simulation inside a stage did not produce a usable result.
class NonConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageRecord {
    std::string name;
    std::vector<std::string> files;  // relative to the output directory
    double seconds = 0.0;
};

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version = kToolkitVersion;
    std::vector<StageRecord> stages;

    nlohmann::json to_json() const;
};

/// optimize, dataset, classify, refine, terminal
const std::vector<std::string>& stage_names();

/**
 * Runs one stage (or `all`) writing into `out_dir`, which is created if
 * needed. Each stage reads its inputs from the files of earlier stages.
 * Writes manifest.json and config.json next to the stage outputs.
 */
RunManifest run_pipeline(const PipelineConfig& config, const std::string& stage,
                         const std::filesystem::path& out_dir, std::ostream* log = nullptr);

nlohmann::json waypoints_to_json(const mission::WaypointSet& w);
mission::WaypointSet waypoints_from_json(const nlohmann::json& j);

/// Fine-braking guidance problem posed by the forward-pass waypoints.
controllability::RolloutSetup rollout_setup(const mission::WaypointSet& w, const PipelineConfig& config);
/// (S, H, w, v) of the forward-pass fine-braking start.
guidance::GuidanceFeatures nominal_features(const mission::WaypointSet& w);
/// Refinement box about `nominal` with the configured half-widths, v capped at v_sops.
controllability::RefineConfig refine_base(const PipelineConfig& config, const guidance::GuidanceFeatures& nominal,
                                          double sigma);

}  // namespace landing::io

#endif  // LANDING_PIPELINE_HPP
