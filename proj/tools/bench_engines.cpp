// Compares the serial and OpenMP consensus/update engines on the same
// workload and checks that their results match bitwise.
#include <chrono>
#include <cstring>
#include <iostream>

#include "bdtd/config.hpp"
#include "bdtd/experiment.hpp"
#include "bdtd/metrics.hpp"
#include "bdtd/protocol.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    long horizon = 2000;
    if (argc > 1) horizon = std::stol(argv[1]);

    auto config = bdtd::default_figure_config();
    config.horizon = horizon;

    const auto mdp = config.build_mdp();
    const auto features = config.build_features(mdp);
    const auto policy = bdtd::JointPolicy::uniform(mdp);
    const double radius = config.resolve_radius(mdp, features);
    const auto roster = config.build_roster(features, 1);

    auto opts = config.build_options(radius, 1);
    opts.record_rounds = false;

    std::cout << "workload: " << mdp.state_count() << " states, " << config.num_agents
              << " agents, dim " << features.dim() << ", horizon " << horizon << "\n";

    opts.parallel = false;
    auto t0 = Clock::now();
    const auto serial = bdtd::run_bdtd(mdp, policy, features, roster, config.rule, config.attack,
                                       config.schedule, opts);
    const double t_serial = seconds_since(t0);

    opts.parallel = true;
    t0 = Clock::now();
    const auto parallel = bdtd::run_bdtd(mdp, policy, features, roster, config.rule, config.attack,
                                         config.schedule, opts);
    const double t_parallel = seconds_since(t0);

    bool identical = serial.final_params.size() == parallel.final_params.size();
    for (std::size_t i = 0; identical && i < serial.final_params.size(); ++i)
        identical = std::memcmp(serial.final_params[i].data(), parallel.final_params[i].data(),
                                sizeof(double) * serial.final_params[i].size()) == 0;

    std::cout << "serial:   " << t_serial << " s\n"
              << "parallel: " << t_parallel << " s\n"
              << "speedup:  " << t_serial / t_parallel << "x\n"
              << "bitwise identical results: " << (identical ? "yes" : "NO") << "\n";
    return identical ? 0 : 1;
}
