#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bdtd/rng.hpp"

namespace bdtd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TransitionEntry {
    int next;
    double prob;
};

/// Finite networked multi-agent MDP: global state space, per-agent action
/// sets, a joint-action transition kernel and deterministic per-agent
/// rewards. Immutable after construction; safe to share across threads.
class NetworkedMdp {
  public:
    static constexpr long long kJointActionCap = 1'000'000;
    static constexpr long long kStateCap = 1'000'000;

    // Rewards indexed either per (agent, state, joint action) or, when the
    // reward does not depend on the action, per (agent, state).
    NetworkedMdp(int state_count, std::vector<int> action_counts,
                 std::vector<std::vector<TransitionEntry>> kernel,
                 std::vector<double> rewards, bool state_only_rewards,
                 double discount, double r_max);

    int num_agents() const { return static_cast<int>(action_counts_.size()); }
    int state_count() const { return state_count_; }
    double discount() const { return discount_; }
    double r_max() const { return r_max_; }
    int action_count(int agent) const { return action_counts_[agent]; }
    long long joint_action_count() const { return joint_action_count_; }
    bool state_only_rewards() const { return state_only_rewards_; }

    // Mixed-radix joint-action index, agent 0 fastest.
    long long encode_action(std::span<const int> actions) const;
    std::vector<int> decode_action(long long joint) const;

    double reward(int agent, int state, long long joint_action) const {
        if (state_only_rewards_)
            return rewards_[static_cast<std::size_t>(agent) * state_count_ + state];
        return rewards_[(static_cast<std::size_t>(agent) * state_count_ + state) *
                            joint_action_count_ +
                        joint_action];
    }

    const std::vector<TransitionEntry>& row(int state, long long joint_action) const {
        return kernel_[static_cast<std::size_t>(state) * joint_action_count_ + joint_action];
    }

    // Copy with every reward replaced by a per-agent constant; used by the
    // impossibility constructions where r^i(s,a) = value[i].
    NetworkedMdp with_constant_agent_rewards(std::span<const double> values) const;

    std::string to_json() const;
    static NetworkedMdp from_json(const std::string& text);

  private:
    int state_count_;
    std::vector<int> action_counts_;
    long long joint_action_count_;
    std::vector<std::vector<TransitionEntry>> kernel_;
    std::vector<double> rewards_;
    bool state_only_rewards_;
    double discount_;
    double r_max_;
};

/// Product policy: each agent draws its own action conditioned on the
/// global state, joint probability is the product over agents.
class JointPolicy {
  public:
    // probs[agent][state][action]
    explicit JointPolicy(std::vector<std::vector<std::vector<double>>> probs);

    static JointPolicy uniform(const NetworkedMdp& mdp);

    int num_agents() const { return static_cast<int>(probs_.size()); }
    int state_count() const { return probs_.empty() ? 0 : static_cast<int>(probs_[0].size()); }

    double prob(int agent, int state, int action) const { return probs_[agent][state][action]; }

    double joint_prob(const NetworkedMdp& mdp, int state, long long joint_action) const;

    const std::vector<double>& local(int agent, int state) const { return probs_[agent][state]; }

  private:
    std::vector<std::vector<std::vector<double>>> probs_;
};

/// P_pi(s, s') = sum_a pi(a|s) P(s, a, s').
Eigen::MatrixXd induced_chain(const NetworkedMdp& mdp, const JointPolicy& policy);

/// Power iteration for the invariant distribution. Throws if the chain does
/// not settle within max_iter (periodic or reducible chain).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P, double tol = 1e-10,
                                        long max_iter = 1'000'000);

/// Solves (I - gamma P_pi) V = r_bar for the alpha-weighted reward mix.
Eigen::VectorXd exact_value_function(const NetworkedMdp& mdp, const JointPolicy& policy,
                                     std::span<const double> weights);

struct StepResult {
    std::vector<int> actions;
    long long joint_action;
    int next_state;
    std::vector<double> rewards;
};

StepResult sample_step(const NetworkedMdp& mdp, const JointPolicy& policy, int state, Rng& rng);

struct GridSpreadOptions {
    double shaping_scale = 0.02;  // per-agent reward offset, keeps rewards heterogeneous
    long long state_cap = NetworkedMdp::kStateCap;
    double discount = 0.9;
};

/// Cooperative-navigation gridworld: the global state is the tuple of agent
/// cells, each agent picks one of {stay,left,right,down,up}, rewards are the
/// negated nearest-agent distance to each landmark plus collision penalties.
NetworkedMdp make_grid_spread_env(int grid_size, int num_agents, int num_landmarks,
                                  double collision_penalty, std::uint64_t seed,
                                  const GridSpreadOptions& opts = {});

/// Random fixture MDP with strictly positive transition rows.
NetworkedMdp make_random_mdp(int state_count, int num_agents, int actions_per_agent,
                             std::uint64_t seed, double r_max = 1.0, double discount = 0.9);

}  // namespace bdtd
