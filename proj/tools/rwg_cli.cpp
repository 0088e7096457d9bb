// rwg - command line front end for the random waveguide pipelines
#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "rwg/parallel.hpp"
#include "rwg/pipeline.hpp"

namespace {

// Used when the configuration cannot be loaded: there is no resolved config to embed.
void write_error_summary(const std::string& out_dir, const std::string& command, const std::string& error,
                         int exit_code) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    nlohmann::json s;
    s["command"] = command;
    s["version"] = rwg::kVersion;
    s["status"] = "error";
    s["error"] = error;
    s["exit_code"] = exit_code;
    std::ofstream os(std::filesystem::path(out_dir) / "summary.json");
    if (os) os << s.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mode statistics of electromagnetic waves in random rectangular waveguides"};
    app.set_version_flag("--version", std::string(rwg::kVersion));

    std::string config_path;
    std::string out_dir;
    int threads = -1;
    bool no_assemble = false;
    std::optional<std::uint64_t> seed;
    bool verbose = false;

    app.add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--threads", threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    app.add_flag("--no-assemble", no_assemble, "fail instead of assembling a missing coupling tensor");
    app.add_option("--seed", seed, "Monte Carlo seed (overrides montecarlo.seed)");
    app.add_flag("-v,--verbose", verbose, "debug logging");

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"modes", "enumerate the waveguide modes and write the mode tables"},
        {"moments", "moment matrices, mean free paths and the mean amplitude evolution"},
        {"transport", "transport operator spectrum and the mean power evolution"},
        {"equipartition", "stationary power matrix of the transport operator"},
        {"montecarlo", "ensemble simulation compared with the diffusion limit"},
        {"reproduce-figures", "mean free paths and equipartition data for both reference geometries"},
    };
    app.fallthrough();
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code == 0) return 0;
        std::cerr << app.help();
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    rwg::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = rwg::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (threads >= 0) cfg.threads = threads;
        if (seed) cfg.montecarlo.seed = *seed;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        write_error_summary(out_dir.empty() ? cfg.output_dir : out_dir, command, e.what(), 2);
        return 2;
    }
    rwg::set_num_threads(cfg.threads);

    std::unique_ptr<rwg::Pipeline> pipeline;
    try {
        pipeline = std::make_unique<rwg::Pipeline>(cfg, cfg.output_dir, no_assemble);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        write_error_summary(cfg.output_dir, command, e.what(), 1);
        return 1;
    }

    nlohmann::json result;
    try {
        if (command == "modes")
            result = pipeline->modes();
        else if (command == "moments")
            result = pipeline->moments();
        else if (command == "transport")
            result = pipeline->transport();
        else if (command == "equipartition")
            result = pipeline->equipartition();
        else if (command == "montecarlo")
            result = pipeline->montecarlo();
        else
            result = pipeline->reproduce_figures();
    } catch (const rwg::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        pipeline->write_summary(command, result, e.what());
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        pipeline->write_summary(command, result, e.what());
        return 1;
    }
    pipeline->write_summary(command, result);
    spdlog::info("{}: artifacts written to {}", command, cfg.output_dir);
    return 0;
}
