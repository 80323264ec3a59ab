// lepton: command-line front end.
//
//   lepton <command> [--config FILE] [--<key> VALUE ...]
//
// Keys are those of the config file; flags override the file, and
// LEPTON_OUTPUT_DIR overrides output_dir from the file.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>

#include "lepton/cli.hpp"

int main(int argc, char** argv) {
    using namespace lepton;
    CLI::App app{"Verification and evolution toolkit for the conservative lepton field equations"};
    std::string command, config_path;
    bool quiet = false;
    app.add_option("command", command, "verify | residual | gauge-check | evolve | mms");
    app.add_option("--config", config_path, "flat key = value configuration file");
    app.add_flag("-q,--quiet", quiet, "do not print the report");
    std::map<std::string, std::string> flags;
    for (const auto& key : config_keys())
        if (key != "command") app.add_option("--" + key, flags[key], "config key '" + key + "'");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfigError;
    }

    RunConfig rc;
    try {
        if (!config_path.empty()) parse_config_file(rc, config_path);
        if (const char* env = std::getenv("LEPTON_OUTPUT_DIR"); env && *env) set_key(rc, "output_dir", env);
        if (!command.empty()) set_key(rc, "command", command);
        for (const auto& key : config_keys())
            if (key != "command" && app.count("--" + key) > 0) set_key(rc, key, flags[key]);
    } catch (const ConfigError& e) {
        std::cerr << "lepton: configuration error: " << e.what() << '\n';
        return kExitConfigError;
    }

    const CommandResult r = run_command(rc);
    if (!quiet) std::cout << r.report.dump(2) << '\n';
    if (r.exit_code == kExitConfigError)
        std::cerr << "lepton: configuration error: " << r.report["failures"][0]["message"].get<std::string>() << '\n';
    else if (r.exit_code == kExitRuntimeAbort)
        std::cerr << "lepton: run aborted\n";
    return r.exit_code;
}
