// Command-line front end: regret | ic-check | bounds | adaptive | oracle-check.
// Exit codes: 0 success, 1 a check failed, 2 configuration error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "icbandit/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 0;
    std::string out;
};

CLI::App* add_command(CLI::App& app, const char* name, const char* help, CommonFlags& flags, bool config_required) {
    auto* cmd = app.add_subcommand(name, help);
    auto* cfg = cmd->add_option("--config", flags.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    if (config_required) cfg->required();
    cmd->add_option("--seed", flags.seed, "master seed, overrides the config");
    cmd->add_option("--jobs", flags.jobs, "worker threads (0 = all cores)")->capture_default_str();
    cmd->add_option("--out", flags.out, "output directory, overrides the config");
    return cmd;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regret and incentive-compatibility experiments for bandit recommenders"};
    app.require_subcommand(1);
    CommonFlags flags;
    auto* regret = add_command(app, "regret", "weighted regrets per replication", flags, true);
    auto* ic = add_command(app, "ic-check", "conditional deviation gains against epsilon bounds", flags, true);
    auto* bounds = add_command(app, "bounds", "epsilon bounds at a point or over a grid", flags, true);
    auto* adaptive = add_command(app, "adaptive", "interval-regret profile", flags, true);
    auto* oracle = add_command(app, "oracle-check", "fast swap regret against the brute-force oracle", flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        auto config = flags.config.empty() ? icbandit::ExperimentConfig{} : icbandit::load_experiment_config(flags.config);
        if (flags.seed) config.seed = *flags.seed;
        if (!flags.out.empty()) config.out = flags.out;

        icbandit::CommandResult result;
        if (regret->parsed())
            result = icbandit::cmd_regret(config, flags.jobs);
        else if (ic->parsed())
            result = icbandit::cmd_ic_check(config, flags.jobs);
        else if (bounds->parsed())
            result = icbandit::cmd_bounds(config);
        else if (adaptive->parsed())
            result = icbandit::cmd_adaptive(config, flags.jobs);
        else if (oracle->parsed())
            result = icbandit::cmd_oracle_check(config, flags.jobs);

        std::cout << result.summary;
        for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
        return result.exit_code;
    } catch (const icbandit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
