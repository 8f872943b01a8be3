// Command-line front end: run experiments, method x attack matrices,
// verification suites, and chart regeneration from emitted CSVs.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bdtd/experiment.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfigError = 2;

std::string output_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("BDTD_OUT")) return env;
    return "runs";
}

// Re-parses a matrix CSV (round, series...) and redraws its chart.
int replot(const std::string& csv_path, const std::string& svg_path) {
    std::ifstream in(csv_path);
    if (!in) {
        std::cerr << "cannot open " << csv_path << "\n";
        return kExitConfigError;
    }
    std::string header;
    std::getline(in, header);
    std::vector<std::string> names;
    {
        std::stringstream ss(header);
        std::string col;
        std::getline(ss, col, ',');  // round
        while (std::getline(ss, col, ',')) names.push_back(col);
    }
    std::vector<std::vector<double>> series(names.size());
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        for (auto& s : series) {
            std::getline(ss, cell, ',');
            s.push_back(std::stod(cell));
        }
    }
    bdtd::write_svg_chart(svg_path, csv_path, names, series);
    std::cout << "wrote " << svg_path << "\n";
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Byzantine-tolerant decentralized TD-learning simulator"};
    app.require_subcommand(1);

    std::string config_path, out_flag, suite, csv_path, svg_path;
    std::vector<std::string> methods = {"trimmed_mean", "fedavg",  "krum",
                                        "coordinate_median", "fltrust", "scclip"};
    std::vector<std::string> attacks = {"gaussian", "krum_attack", "trim_attack"};
    std::uint64_t verify_seed = 1;
    bool use_default_figure = false;

    auto* run = app.add_subcommand("run", "run one experiment config over all its seeds");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("-o,--out", out_flag, "output root (default $BDTD_OUT or ./runs)");

    auto* matrix = app.add_subcommand("matrix", "method x attack grid with charts");
    matrix->add_option("config", config_path, "base experiment config file");
    matrix->add_flag("--figure-defaults", use_default_figure,
                     "use the built-in grid-spread figure configuration");
    matrix->add_option("--methods", methods, "aggregation rules to compare");
    matrix->add_option("--attacks", attacks, "attacks to run");
    matrix->add_option("-o,--out", out_flag, "output root");

    auto* verify = app.add_subcommand("verify", "run a named property suite");
    verify->add_option("suite", suite,
                       "hull | contraction | product_bound | impossibility | oracle")
        ->required();
    verify->add_option("--seed", verify_seed, "suite seed");

    auto* plot = app.add_subcommand("plot", "regenerate an SVG chart from a metrics CSV");
    plot->add_option("csv", csv_path, "input CSV")->required();
    plot->add_option("svg", svg_path, "output SVG")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto config = bdtd::ExperimentConfig::from_file(config_path);
            const auto result = bdtd::run_experiment(config, output_root(out_flag));
            std::cout << "run dir: " << result.run_dir << "\n"
                      << "seeds: " << result.num_seeds << "\n"
                      << "final MSBE: " << result.final_msbe << "\n"
                      << "final CE:   " << result.final_ce << "\n";
            return kExitPass;
        }
        if (matrix->parsed()) {
            bdtd::ExperimentConfig base;
            if (use_default_figure) {
                base = bdtd::default_figure_config();
            } else if (!config_path.empty()) {
                base = bdtd::ExperimentConfig::from_file(config_path);
            } else {
                std::cerr << "matrix needs a config file or --figure-defaults\n";
                return kExitConfigError;
            }
            const auto result = bdtd::run_matrix(base, methods, attacks, output_root(out_flag));
            std::cout << "matrix dir: " << result.out_dir << "\n";
            std::cout << "reference (fedavg, no attack): MSBE=" << result.reference.final_msbe
                      << " CE=" << result.reference.final_ce << "\n";
            for (const auto& [attack, row] : result.results)
                for (const auto& [method, cell] : row)
                    std::cout << attack << " / " << method << ": MSBE=" << cell.final_msbe
                              << " CE=" << cell.final_ce << "\n";
            return kExitPass;
        }
        if (verify->parsed()) {
            const auto report = bdtd::verify_suite(suite, verify_seed);
            std::cout << report.suite << ": " << (report.pass ? "PASS" : "FAIL") << " ("
                      << report.violations << " violations / " << report.trials
                      << " trials)\n"
                      << report.details << "\n";
            return report.pass ? kExitPass : kExitFail;
        }
        if (plot->parsed()) return replot(csv_path, svg_path);
    } catch (const bdtd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
    return kExitConfigError;
}
