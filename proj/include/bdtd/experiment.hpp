#pragma once

#include <map>
#include <string>
#include <vector>

#include "bdtd/config.hpp"
#include "bdtd/metrics.hpp"

namespace bdtd {

struct ExperimentResult {
    std::string run_dir;
    int num_seeds = 0;
    std::vector<double> msbe_mean;  // per round, averaged over seeds
    std::vector<double> ce_mean;
    double final_msbe = 0.0;
    double final_ce = 0.0;
};

/// Runs every seed of the config, optionally persisting traces, per-seed
/// metric CSVs, the seed-averaged series and a manifest. A completed run
/// directory is never overwritten; reruns get fresh suffixed ids.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_root,
                                bool write_outputs = true, bool write_traces = true);

struct MatrixCell {
    double final_msbe = 0.0;
    double final_ce = 0.0;
};

struct MatrixResult {
    // results[attack][method]
    std::map<std::string, std::map<std::string, MatrixCell>> results;
    MatrixCell reference;  // fedavg with no Byzantine agents
    std::string out_dir;
};

/// Method x attack grid over a shared environment, with a fedavg-without-
/// attack reference line; emits one MSBE and one CE chart per attack plus
/// the underlying CSVs.
MatrixResult run_matrix(const ExperimentConfig& base, const std::vector<std::string>& methods,
                        const std::vector<std::string>& attacks, const std::string& out_root);

struct VerifyReport {
    std::string suite;
    long trials = 0;
    long violations = 0;
    bool pass = false;
    std::string details;
};

/// Named randomized/analytic property suites with pinned trial counts:
/// hull | contraction | product_bound | impossibility | oracle.
VerifyReport verify_suite(const std::string& name, std::uint64_t seed = 1,
                          bool parallel = true);

/// The grid-spread configuration behind the qualitative figure reproduction.
ExperimentConfig default_figure_config();

/// Minimal SVG line chart; one polyline per named series, log10 y-axis.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& series);

}  // namespace bdtd
