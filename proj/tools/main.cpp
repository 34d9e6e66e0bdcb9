#include "commands.hpp"
#include "config.hpp"

#include "CLI11.hpp"
#include "pderm/loss.hpp"

#include <iostream>
#include <stdexcept>

int main(int argc, char** argv) {
    using namespace pderm::cli;

    CLI::App app{"ERM over recursive threshold forecasters for parameter-driven processes"};
    app.require_subcommand(1);

    std::string config_file;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::string out;
    for (const auto& name : commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_file, "INI config file")->required();
        sub->add_option("--seed", seed, "master seed (overrides [erm] seed)");
        sub->add_option("--threads", threads, "worker threads (0 = available parallelism)");
        sub->add_option("--out", out, "output directory (overrides [output] dir)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << error_line("usage", e.what()) << "\n";
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    const auto* sub = app.get_subcommands().front();
    Overrides ov;
    if (sub->count("--seed") > 0) ov.seed = seed;
    if (sub->count("--out") > 0) ov.out = out;

    try {
        const auto cfg = resolve(load_config(config_file), command, ov);
        return run_command(command, cfg, threads, std::cerr);
    } catch (const ConfigError& e) {
        std::cerr << error_line("config", e.what()) << "\n";
        return 2;
    } catch (const pderm::PairingError& e) {
        std::cerr << error_line("pairing", e.what()) << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << error_line("invalid", e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << error_line("runtime", e.what()) << "\n";
        return 3;
    }
}
