#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flatstab/errors.hpp"
#include "flatstab/io.hpp"
#include "flatstab/scenario.hpp"

namespace {

std::string default_out_dir() {
    if (const char* env = std::getenv("FLATSTAB_OUT")) return env;
    return "out";
}

int run_config(const std::string& config, const std::string& out_dir, int jobs, bool verbose,
               bool oracle) {
    const flatstab::Scenario scenario = flatstab::load_scenario(config);
    flatstab::RunOptions options;
    options.jobs = jobs;
    options.verbose = verbose;
    options.oracle = oracle;
    const flatstab::ScenarioResult result = flatstab::run_scenario(scenario, options);
    for (const flatstab::Assertion& a : result.assertions) {
        std::cout << "[assert] " << a.name << ": " << (a.pass ? "PASS" : "FAIL") << " (" << a.detail
                  << ")\n";
    }
    for (const std::string& path : flatstab::write_bundle(result, out_dir)) {
        std::cout << "wrote " << path << "\n";
    }
    std::cout << (result.pass ? "PASS" : "FAIL") << " " << result.name << "\n";
    return result.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flat-norm stability toolkit"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir = default_out_dir();
    int jobs = 1;
    bool verbose = false;

    CLI::App* run = app.add_subcommand("run", "run a scenario and write its bundle");
    run->add_option("config", config, "scenario config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory for bundles");
    run->add_option("--jobs", jobs, "worker threads for the selection sweep")
        ->check(CLI::PositiveNumber);
    run->add_flag("--verbose", verbose, "print per-cell progress");

    CLI::App* oracle = app.add_subcommand("oracle", "run a scenario with flat-norm re-checks");
    oracle->add_option("config", config, "scenario config (JSON)")->required();
    oracle->add_option("--out", out_dir, "output directory for bundles");
    oracle->add_option("--jobs", jobs, "worker threads for the selection sweep")
        ->check(CLI::PositiveNumber);
    oracle->add_flag("--verbose", verbose, "print per-cell progress");

    std::string bundle;
    std::string what;
    std::string plot_out;
    CLI::App* plot = app.add_subcommand("plot", "extract plot-ready data from a bundle");
    plot->add_option("bundle", bundle, "bundle directory written by run")->required();
    plot->add_option("--what", what, "profile, spectrum, or lambda-sweep")->required();
    plot->add_option("--out", plot_out, "output file (default <bundle>/plot-<what>.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_config(config, out_dir, jobs, verbose, false);
        if (oracle->parsed()) return run_config(config, out_dir, jobs, verbose, true);
        const std::string data = flatstab::emit_plotdata(bundle, what);
        if (plot_out.empty()) {
            plot_out = (std::filesystem::path(bundle) / ("plot-" + what + ".csv")).string();
        }
        flatstab::write_text_file(plot_out, data);
        std::cout << "wrote " << plot_out << "\n";
        return 0;
    } catch (const flatstab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
