#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "bdtd/adversary.hpp"
#include "bdtd/aggregation.hpp"
#include "bdtd/features.hpp"
#include "bdtd/mdp.hpp"

namespace bdtd {

enum class StepSizeKind { Harmonic, Constant };

struct StepSchedule {
    StepSizeKind kind = StepSizeKind::Harmonic;
    double eta0 = 1.0;

    double at(long k) const {
        if (kind == StepSizeKind::Constant) return eta0;
        return k >= 1 ? eta0 / static_cast<double>(k) : eta0;
    }
};

/// Agent roster for one run: n agents, declared Byzantine bound f, the actual
/// Byzantine set (|F| <= f), and initial parameters for every agent.
struct RosterConfig {
    int n = 0;
    int f = 0;
    std::vector<int> byzantine;
    std::vector<Eigen::VectorXd> init_params;
    bool include_self = true;  // agent's own value joins its aggregation multiset
};

struct RunOptions {
    long horizon = 1000;
    double radius = 1.0;
    ProjectionMode projection_mode = ProjectionMode::Coordinate;
    bool apply_projection = true;
    std::uint64_t seed = 0;
    bool parallel = false;
    int initial_state = 0;
    bool record_rounds = true;  // keep the full per-round history in the trace
};

struct RoundRecord {
    int state = 0;
    long long joint_action = 0;
    int next_state = 0;
    std::vector<double> rewards;                // all agents
    std::vector<Eigen::VectorXd> params;        // w^i_k before the round's update
    std::vector<Eigen::VectorXd> consensus;     // post-aggregation values
    std::vector<double> deltas;                 // per-agent TD errors
};

struct ExclusionEvent {
    long round;
    int receiver;
    int sender;
};

struct RunTrace {
    int n = 0;
    int f = 0;
    int dim = 0;
    std::vector<int> byzantine;
    std::uint64_t seed = 0;
    double gamma = 0.0;
    std::vector<RoundRecord> rounds;
    std::vector<Eigen::VectorXd> final_params;  // all agents, end of run
    std::vector<ExclusionEvent> exclusions;

    std::vector<int> normal_agents() const;
};

/// One receiver's local knowledge of the roster: which senders it has
/// permanently removed and its decremented (n, f).
struct LocalView {
    int local_n = 0;
    int local_f = 0;
    std::vector<char> removed;  // indexed by sender id
};

/// Drops values outside the projection ball, permanently removing their
/// senders from this receiver's view and decrementing its local (n, f).
std::vector<Eigen::VectorXd> exclusion_filter(
    const std::vector<std::pair<int, Eigen::VectorXd>>& received, double radius,
    ProjectionMode mode, LocalView& view, std::vector<int>* removed_now = nullptr);

/// Synchronous-round engine: every agent emits its parameter (Byzantine
/// agents emit attack-crafted values), each agent aggregates its received
/// multiset, all agents share one environment step, then each agent applies
/// the projected TD update. Fully deterministic given the seed, in both
/// serial and parallel execution.
RunTrace run_bdtd(const NetworkedMdp& mdp, const JointPolicy& policy, const FeatureMap& features,
                  const RosterConfig& roster, const AggregationRule& rule,
                  const AttackModel& attack, const StepSchedule& schedule,
                  const RunOptions& opts);

double step_size(StepSizeKind kind, long k, double eta0);

}  // namespace bdtd
