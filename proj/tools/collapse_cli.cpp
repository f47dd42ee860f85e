// collapse run --experiment NAME --config FILE [--seed N] [--trials N]
//              [--workers N] [--out-dir DIR]
// collapse run --list
// collapse run --validate --config FILE

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "collapse/errors.hpp"
#include "collapse/experiments.hpp"
#include "collapse/run_config.hpp"

using collapse::json;

namespace {

int run(const std::optional<std::string>& experiment, const std::optional<std::string>& config_path,
        const std::optional<std::uint64_t>& seed, const std::optional<std::uint64_t>& trials,
        const std::optional<std::uint64_t>& workers, const std::optional<std::string>& out_dir, bool validate_only)
{
    json config = config_path ? collapse::load_config_file(*config_path) : json::object();
    if (!config.is_object()) throw collapse::ConfigError("config: top level must be an object");
    if (experiment) {
        if (config.contains("experiment") && config["experiment"] != *experiment)
            throw collapse::ConfigError("--experiment " + *experiment + " does not match config experiment " +
                                        config["experiment"].dump());
        config["experiment"] = *experiment;
    }
    if (seed) config["master_seed"] = *seed;
    if (trials) config["trials"] = *trials;
    if (workers) config["workers"] = *workers;
    if (out_dir) config["out_dir"] = *out_dir;

    if (validate_only) {
        const auto issues = collapse::config_violations(config);
        if (issues.empty()) {
            std::cout << "ok\n";
            return 0;
        }
        for (const auto& v : issues) std::cout << v << "\n";
        return 1;
    }

    const json normalized = collapse::normalize_config(config);
    const auto result = collapse::run_experiment(normalized, normalized.at("workers").get<std::size_t>());
    const auto dir = normalized.at("out_dir").get<std::string>();
    collapse::write_outputs(result, dir);

    std::cout << result.name << " digest " << result.config_digest << " seed " << result.master_seed << "\n";
    for (const auto& c : result.checks) {
        char value[40];
        std::snprintf(value, sizeof value, "%.6g", c.value);
        std::cout << (c.passed ? "  pass  " : "  FAIL  ") << c.name << " = " << value << "  (" << c.rule << ")\n";
    }
    std::cout << "wrote " << dir << "/" << result.name << ".{csv,json}\n";
    return result.passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Seeded collapse-model experiments"};
    app.require_subcommand(1);
    auto* cmd = app.add_subcommand("run", "run or validate one experiment");

    std::optional<std::string> experiment, config_path, out_dir;
    std::optional<std::uint64_t> seed, trials, workers;
    bool list = false, validate = false;
    cmd->add_option("--experiment", experiment, "experiment name (see --list)");
    cmd->add_option("--config", config_path, "JSON run config");
    cmd->add_option("--seed", seed, "master seed (overrides config)");
    cmd->add_option("--trials", trials, "trial count (overrides config)");
    cmd->add_option("--workers", workers, "worker threads");
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_flag("--list", list, "print experiment names");
    cmd->add_flag("--validate", validate, "check the config against its schema and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (list) {
        for (const auto& n : collapse::experiment_names()) std::cout << n << "\n";
        return 0;
    }
    try {
        return run(experiment, config_path, seed, trials, workers, out_dir, validate);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
