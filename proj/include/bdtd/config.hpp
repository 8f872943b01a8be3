#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bdtd/adversary.hpp"
#include "bdtd/aggregation.hpp"
#include "bdtd/features.hpp"
#include "bdtd/mdp.hpp"
#include "bdtd/protocol.hpp"

namespace bdtd {

/// Parsed experiment configuration. Unknown keys in the source file are
/// errors; the hash is stable under key reordering.
struct ExperimentConfig {
    std::string name = "experiment";

    // environment
    std::string env_type;  // "random_mdp" | "grid_spread"
    int state_count = 0;
    int num_agents = 0;
    int actions_per_agent = 2;
    int grid_size = 0;
    int num_landmarks = 0;
    double collision_penalty = -0.1;
    double shaping_scale = 0.02;
    double r_max = 1.0;
    double discount = 0.9;
    std::uint64_t env_seed = 0;

    // roster
    int f = 0;
    std::vector<int> byzantine;
    bool include_self = true;
    double init_scale = 0.0;  // >0: initial parameters uniform in [-s, s], per run seed

    // rule / attack
    AggregationRule rule;
    AttackModel attack;

    // features
    std::string feature_mode = "scalar";  // "scalar" | "random" | "tabular"
    int feature_dim = 1;
    std::uint64_t feature_seed = 0;

    // schedule / projection
    StepSchedule schedule;
    double radius = 0.0;  // 0: auto via default_radius (scalar mode only)
    std::string projection = "coordinate";  // "coordinate" | "l2" | "none"

    long horizon = 1000;
    int initial_state = 0;
    std::vector<std::uint64_t> seeds;
    bool parallel = false;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    std::string to_json_text() const;

    // FNV-1a over the canonical (key-sorted) serialization.
    std::uint64_t hash() const;

    NetworkedMdp build_mdp() const;
    FeatureMap build_features(const NetworkedMdp& mdp) const;
    double resolve_radius(const NetworkedMdp& mdp, const FeatureMap& features) const;
    RosterConfig build_roster(const FeatureMap& features, std::uint64_t seed) const;
    RunOptions build_options(double radius, std::uint64_t seed) const;
};

}  // namespace bdtd
