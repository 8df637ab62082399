#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "landing/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Lunar descent design pipeline"};
    std::string config_path, stage = "all", out = "out";
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    app.add_option("--config", config_path, "JSON configuration (defaults when omitted)");
    app.add_option("--stage", stage, "optimize, dataset, classify, refine, terminal or all");
    app.add_option("--out", out, "output directory");
    app.add_option("--seed", seed, "overrides the configured seed");
    app.add_flag("--verbose,-v", verbose, "progress on stderr");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    using namespace landing::io;
    try {
        PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
        if (seed) config.seed = *seed;
        const auto manifest = run_pipeline(config, stage, out, verbose ? &std::cerr : nullptr);
        std::cout << manifest.to_json().dump(2) << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const NonConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
