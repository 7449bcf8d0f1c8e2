#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "trapcert/errors.hpp"
#include "trapcert/report.hpp"

using namespace trapcert;

namespace {

struct Command {
    CLI::App* app = nullptr;
    std::string config;
    std::string target;
};

void add_overrides(CLI::App* app, Overrides& o) {
    app->add_option("--k", o.K, "Number of retained levels K");
    app->add_option("--rtol", o.rtol, "Relative convergence tolerance");
    app->add_option("--tau", o.tau, "Active-channel threshold");
}

int execute(const Command& cmd, RunMode expected, const Overrides& overrides) {
    RunConfig config;
    try {
        config = load_run_config(cmd.config);
        if (config.mode != expected)
            throw TrapError(ErrorKind::MalformedSpec, "config mode '" + std::string(to_string(config.mode)) +
                                                          "' does not match subcommand '" + cmd.app->get_name() +
                                                          "'");
        apply_overrides(config, overrides);
    } catch (const TrapError& e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return kExitError;
    }
    for (const auto& w : config.warnings) std::cerr << "warning: " << w << "\n";
    const auto result = run(config, cmd.target);
    for (const auto& m : result.messages) (result.exit_code == kExitError ? std::cerr : std::cout) << m << "\n";
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certify variance bounds for confined quantum systems"};
    app.require_subcommand(1);
    Overrides overrides;

    Command certify, sweep, magnetic, spectro;
    certify.app = app.add_subcommand("certify", "Solve and certify a 1D trap");
    sweep.app = app.add_subcommand("sweep", "Certify a parameter sweep into a CSV table");
    magnetic.app = app.add_subcommand("magnetic", "Certify a 2D trap in a magnetic field");
    spectro.app = app.add_subcommand("spectro", "Check measured gaps against a measured density");
    for (Command* c : {&certify, &sweep, &magnetic, &spectro}) {
        c->app->add_option("--config", c->config, "Config file")->required()->check(CLI::ExistingFile);
        add_overrides(c->app, overrides);
    }
    for (Command* c : {&certify, &magnetic, &spectro})
        c->app->add_option("--out", c->target, "Output directory")->required();
    sweep.app->add_option("--csv", sweep.target, "Output CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitError;
    }

    if (*certify.app) return execute(certify, RunMode::Certify1D, overrides);
    if (*sweep.app) return execute(sweep, RunMode::Sweep1D, overrides);
    if (*magnetic.app) return execute(magnetic, RunMode::Certify2D, overrides);
    return execute(spectro, RunMode::Spectro, overrides);
}
