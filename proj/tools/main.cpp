#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "json.hpp"

namespace {

using namespace swe::cli;

/// Short aliases for the most used keys; every key is also reachable as
/// --section.key.
const std::vector<std::pair<std::string, std::string>> kAliases = {
    {"-d,--dim", "grid.dim"},           {"--length", "grid.length"},        {"--cells", "grid.cells"},
    {"--dt", "grid.dt"},                {"--horizon", "grid.horizon"},      {"--cov", "noise.model"},
    {"--beta", "noise.beta"},           {"--width", "noise.s"},             {"--mass,--c", "noise.c"},
    {"--hurst", "noise.hurst"},         {"--sigma", "equation.sigma"},      {"--replicas", "run.replicas"},
    {"--radii", "ergodicity.radii"},    {"--functional", "ergodicity.functional"},
    {"--mollifier", "picard.mollifier"}, {"--depth", "picard.depth"},       {"--epsilon", "malliavin.epsilon"},
    {"--probe-step", "malliavin.probe_step"}, {"--probe-cell", "malliavin.probe_cell"},
    {"--poincare", "malliavin.poincare"},
};

std::string usage() {
    std::string out = "usage: swe <subcommand> [--config PATH] [--seed U64] [--threads N] [--out DIR] "
                      "[--dump-kernels] [overrides]\nsubcommands:";
    for (const auto& s : subcommand_names()) out += " " + s;
    return out + "\nrun 'swe <subcommand> --help' for the override flags\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void report_violations(const std::vector<std::string>& violations) {
    nlohmann::ordered_json j = {{"error", "invalid configuration"}, {"violations", violations}};
    std::cerr << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << usage();
        return 2;
    }
    const std::string first = argv[1];
    if (first == "-h" || first == "--help") {
        std::cout << usage();
        return 0;
    }
    const auto command = parse_subcommand(first);
    if (!command) {
        std::cerr << "unknown subcommand '" << first << "'\n" << usage();
        return 2;
    }

    CLI::App app{"Monte-Carlo stochastic wave equation experiments", "swe " + first};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
    bool dump_kernels = false;
    std::vector<std::pair<std::string, std::string>> overrides;

    app.add_option("--config", config_path, "Sectioned key = value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--threads", threads, "Worker threads (0 = available parallelism)");
    app.add_option("--out", out, "Output directory");
    app.add_flag("--dump-kernels", dump_kernels, "Also write the discretised kernel(s) at T");
    for (const auto& [flag, key] : kAliases) {
        app.add_option_function<std::string>(
            flag, [&overrides, key = key](const std::string& v) { overrides.emplace_back(key, v); },
            "Override " + key);
    }
    for (const auto& key : config_keys()) {
        app.add_option_function<std::string>(
               "--" + key, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
               "Override " + key)
            ->group("Config keys");
    }

    try {
        app.parse(argc - 1, argv + 1);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    ExperimentConfig config;
    try {
        config = read_config(config_path.empty() ? std::string() : read_file(config_path));
    } catch (const ConfigError& e) {
        report_violations(e.violations);
        return 2;
    } catch (const std::exception& e) {
        report_violations({e.what()});
        return 2;
    }
    std::vector<std::string> violations;
    for (const auto& [key, value] : overrides) {
        try {
            set_value(config, key, value);
        } catch (const std::exception& e) {
            violations.push_back(e.what());
        }
    }
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    if (out) config.output = *out;
    if (violations.empty()) violations = validate_config(config, *command);
    if (!violations.empty()) {
        report_violations(violations);
        return 2;
    }

    RunOptions options;
    options.dump_kernels = dump_kernels;
    for (int i = 0; i < argc; ++i) options.invocation += (i ? " " : "") + std::string(argv[i]);
    return run(config, *command, options);
}
