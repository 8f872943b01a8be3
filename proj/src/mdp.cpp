#include "bdtd/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <nlohmann/json.hpp>

namespace bdtd {

using json = nlohmann::json;

NetworkedMdp::NetworkedMdp(int state_count, std::vector<int> action_counts,
                           std::vector<std::vector<TransitionEntry>> kernel,
                           std::vector<double> rewards, bool state_only_rewards,
                           double discount, double r_max)
    : state_count_(state_count),
      action_counts_(std::move(action_counts)),
      kernel_(std::move(kernel)),
      rewards_(std::move(rewards)),
      state_only_rewards_(state_only_rewards),
      discount_(discount),
      r_max_(r_max) {
    if (state_count_ <= 0) throw ConfigError("state_count must be positive");
    if (action_counts_.empty()) throw ConfigError("need at least one agent");
    if (!(discount_ > 0.0 && discount_ < 1.0)) throw ConfigError("discount must be in (0,1)");
    joint_action_count_ = 1;
    for (int ac : action_counts_) {
        if (ac <= 0) throw ConfigError("action counts must be positive");
        joint_action_count_ *= ac;
        if (joint_action_count_ > kJointActionCap)
            throw ConfigError("joint action count exceeds cap");
    }
    if (kernel_.size() != static_cast<std::size_t>(state_count_) * joint_action_count_)
        throw ConfigError("kernel size mismatch");
    for (const auto& row : kernel_) {
        double sum = 0.0;
        for (const auto& e : row) {
            if (e.next < 0 || e.next >= state_count_) throw ConfigError("bad next state");
            if (e.prob < 0.0 || e.prob > 1.0 + 1e-12) throw ConfigError("bad probability");
            sum += e.prob;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("transition row does not sum to 1");
    }
    const std::size_t expected =
        state_only_rewards_
            ? static_cast<std::size_t>(num_agents()) * state_count_
            : static_cast<std::size_t>(num_agents()) * state_count_ * joint_action_count_;
    if (rewards_.size() != expected) throw ConfigError("reward table size mismatch");
    for (double r : rewards_)
        if (std::abs(r) > r_max_ + 1e-12) throw ConfigError("reward exceeds r_max");
}

long long NetworkedMdp::encode_action(std::span<const int> actions) const {
    if (actions.size() != action_counts_.size()) throw ConfigError("action arity mismatch");
    long long idx = 0;
    long long stride = 1;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (actions[i] < 0 || actions[i] >= action_counts_[i])
            throw ConfigError("action index out of range");
        idx += actions[i] * stride;
        stride *= action_counts_[i];
    }
    return idx;
}

std::vector<int> NetworkedMdp::decode_action(long long joint) const {
    std::vector<int> actions(action_counts_.size());
    for (std::size_t i = 0; i < action_counts_.size(); ++i) {
        actions[i] = static_cast<int>(joint % action_counts_[i]);
        joint /= action_counts_[i];
    }
    return actions;
}

NetworkedMdp NetworkedMdp::with_constant_agent_rewards(std::span<const double> values) const {
    if (values.size() != action_counts_.size()) throw ConfigError("one reward per agent required");
    std::vector<double> rewards(static_cast<std::size_t>(num_agents()) * state_count_);
    double r_max = 0.0;
    for (int i = 0; i < num_agents(); ++i) {
        r_max = std::max(r_max, std::abs(values[i]));
        for (int s = 0; s < state_count_; ++s)
            rewards[static_cast<std::size_t>(i) * state_count_ + s] = values[i];
    }
    return NetworkedMdp(state_count_, action_counts_, kernel_, std::move(rewards),
                        /*state_only_rewards=*/true, discount_, r_max);
}

std::string NetworkedMdp::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["state_count"] = state_count_;
    j["action_counts"] = action_counts_;
    j["discount"] = discount_;
    j["r_max"] = r_max_;
    j["reward_mode"] = state_only_rewards_ ? "state" : "state_action";
    j["rewards"] = rewards_;
    json kernel = json::array();
    for (const auto& row : kernel_) {
        json jr = json::array();
        for (const auto& e : row) jr.push_back(json::array({e.next, e.prob}));
        kernel.push_back(std::move(jr));
    }
    j["kernel"] = std::move(kernel);
    return j.dump();
}

NetworkedMdp NetworkedMdp::from_json(const std::string& text) {
    json j = json::parse(text);
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw ConfigError("unsupported MDP schema version");
    std::vector<std::vector<TransitionEntry>> kernel;
    for (const auto& jr : j.at("kernel")) {
        std::vector<TransitionEntry> row;
        for (const auto& e : jr)
            row.push_back({e.at(0).get<int>(), e.at(1).get<double>()});
        kernel.push_back(std::move(row));
    }
    return NetworkedMdp(j.at("state_count").get<int>(),
                        j.at("action_counts").get<std::vector<int>>(), std::move(kernel),
                        j.at("rewards").get<std::vector<double>>(),
                        j.at("reward_mode").get<std::string>() == "state",
                        j.at("discount").get<double>(), j.at("r_max").get<double>());
}

JointPolicy::JointPolicy(std::vector<std::vector<std::vector<double>>> probs)
    : probs_(std::move(probs)) {
    for (const auto& agent : probs_)
        for (const auto& dist : agent) {
            double sum = std::accumulate(dist.begin(), dist.end(), 0.0);
            if (std::abs(sum - 1.0) > 1e-12)
                throw ConfigError("policy distribution does not sum to 1");
            for (double p : dist)
                if (p < 0.0) throw ConfigError("negative policy probability");
        }
}

JointPolicy JointPolicy::uniform(const NetworkedMdp& mdp) {
    std::vector<std::vector<std::vector<double>>> probs(mdp.num_agents());
    for (int i = 0; i < mdp.num_agents(); ++i) {
        const int ac = mdp.action_count(i);
        probs[i].assign(mdp.state_count(), std::vector<double>(ac, 1.0 / ac));
    }
    return JointPolicy(std::move(probs));
}

double JointPolicy::joint_prob(const NetworkedMdp& mdp, int state, long long joint_action) const {
    const auto actions = mdp.decode_action(joint_action);
    double p = 1.0;
    for (int i = 0; i < mdp.num_agents(); ++i) p *= probs_[i][state][actions[i]];
    return p;
}

Eigen::MatrixXd induced_chain(const NetworkedMdp& mdp, const JointPolicy& policy) {
    if (policy.num_agents() != mdp.num_agents() || policy.state_count() != mdp.state_count())
        throw ConfigError("policy dimensions do not match mdp");
    const int S = mdp.state_count();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
    for (int s = 0; s < S; ++s) {
        for (long long a = 0; a < mdp.joint_action_count(); ++a) {
            const double pa = policy.joint_prob(mdp, s, a);
            if (pa == 0.0) continue;
            for (const auto& e : mdp.row(s, a)) P(s, e.next) += pa * e.prob;
        }
        if (std::abs(P.row(s).sum() - 1.0) > 1e-10)
            throw ConfigError("induced chain row does not sum to 1");
    }
    return P;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P, double tol, long max_iter) {
    const int n = static_cast<int>(P.rows());
    for (int i = 0; i < n; ++i)
        if (std::abs(P.row(i).sum() - 1.0) > 1e-10)
            throw ConfigError("matrix is not row-stochastic");
    Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(n, 1.0 / n);
    for (long it = 0; it < max_iter; ++it) {
        Eigen::RowVectorXd next = d * P;
        next /= next.sum();
        if ((next * P - next).cwiseAbs().maxCoeff() <= tol) return next.transpose();
        d = next;
    }
    throw std::runtime_error(
        "stationary_distribution did not converge: chain is likely periodic or reducible");
}

Eigen::VectorXd exact_value_function(const NetworkedMdp& mdp, const JointPolicy& policy,
                                     std::span<const double> weights) {
    if (weights.size() != static_cast<std::size_t>(mdp.num_agents()))
        throw ConfigError("one weight per agent required");
    double sum = 0.0;
    for (double w : weights) {
        if (w < -1e-12) throw ConfigError("weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("weights must sum to 1");

    const int S = mdp.state_count();
    const Eigen::MatrixXd P = induced_chain(mdp, policy);
    Eigen::VectorXd r_bar = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s)
        for (long long a = 0; a < mdp.joint_action_count(); ++a) {
            const double pa = policy.joint_prob(mdp, s, a);
            if (pa == 0.0) continue;
            double mix = 0.0;
            for (int i = 0; i < mdp.num_agents(); ++i)
                mix += weights[i] * mdp.reward(i, s, a);
            r_bar(s) += pa * mix;
        }
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - mdp.discount() * P;
    Eigen::VectorXd V = A.partialPivLu().solve(r_bar);
    if ((A * V - r_bar).cwiseAbs().maxCoeff() > 1e-10)
        throw std::runtime_error("value-function solve residual too large");
    return V;
}

StepResult sample_step(const NetworkedMdp& mdp, const JointPolicy& policy, int state, Rng& rng) {
    if (state < 0 || state >= mdp.state_count()) throw ConfigError("state index out of range");
    StepResult out;
    out.actions.resize(mdp.num_agents());
    for (int i = 0; i < mdp.num_agents(); ++i)
        out.actions[i] = rng.categorical(policy.local(i, state));
    out.joint_action = mdp.encode_action(out.actions);
    const auto& row = mdp.row(state, out.joint_action);
    std::vector<double> probs(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) probs[k] = row[k].prob;
    out.next_state = row[rng.categorical(probs)].next;
    out.rewards.resize(mdp.num_agents());
    for (int i = 0; i < mdp.num_agents(); ++i)
        out.rewards[i] = mdp.reward(i, state, out.joint_action);
    return out;
}

namespace {

long long ipow(long long base, int exp) {
    long long v = 1;
    for (int i = 0; i < exp; ++i) v *= base;
    return v;
}

}  // namespace

NetworkedMdp make_grid_spread_env(int grid_size, int num_agents, int num_landmarks,
                                  double collision_penalty, std::uint64_t seed,
                                  const GridSpreadOptions& opts) {
    if (grid_size < 2) throw ConfigError("grid_size must be at least 2");
    if (num_agents < 1) throw ConfigError("num_agents must be at least 1");
    if (num_landmarks < 1) throw ConfigError("num_landmarks must be at least 1");
    const long long cells = static_cast<long long>(grid_size) * grid_size;
    long long states = 1;
    for (int i = 0; i < num_agents; ++i) {
        states *= cells;
        if (states > opts.state_cap) throw ConfigError("grid state space exceeds cap");
    }
    const int S = static_cast<int>(states);
    const int kActions = 5;  // stay, left, right, down, up
    const long long joint_actions = ipow(kActions, num_agents);
    if (joint_actions > NetworkedMdp::kJointActionCap)
        throw ConfigError("grid joint action space exceeds cap");

    // Landmark cells drawn once from the seed.
    Rng rng(substream(seed, 0x6c616e64));  // "land"
    std::vector<int> landmarks(num_landmarks);
    for (int& lm : landmarks) lm = static_cast<int>(rng.uniform() * cells) % cells;

    auto cell_of = [&](int state, int agent) {
        for (int i = 0; i < agent; ++i) state /= static_cast<int>(cells);
        return state % static_cast<int>(cells);
    };
    auto manhattan = [&](int c1, int c2) {
        const int x1 = c1 % grid_size, y1 = c1 / grid_size;
        const int x2 = c2 % grid_size, y2 = c2 / grid_size;
        return std::abs(x1 - x2) + std::abs(y1 - y2);
    };
    auto move = [&](int cell, int action) {
        int x = cell % grid_size, y = cell / grid_size;
        switch (action) {
            case 1: x = std::max(0, x - 1); break;
            case 2: x = std::min(grid_size - 1, x + 1); break;
            case 3: y = std::max(0, y - 1); break;
            case 4: y = std::min(grid_size - 1, y + 1); break;
            default: break;
        }
        return y * grid_size + x;
    };

    std::vector<std::vector<TransitionEntry>> kernel(
        static_cast<std::size_t>(S) * joint_actions);
    for (int s = 0; s < S; ++s) {
        std::vector<int> cells_now(num_agents);
        for (int i = 0; i < num_agents; ++i) cells_now[i] = cell_of(s, i);
        for (long long a = 0; a < joint_actions; ++a) {
            long long aa = a;
            long long next = 0;
            long long stride = 1;
            for (int i = 0; i < num_agents; ++i) {
                const int act = static_cast<int>(aa % kActions);
                aa /= kActions;
                next += static_cast<long long>(move(cells_now[i], act)) * stride;
                stride *= cells;
            }
            kernel[static_cast<std::size_t>(s) * joint_actions + a] = {
                {static_cast<int>(next), 1.0}};
        }
    }

    // Shared term: negated distance from the nearest agent to each landmark.
    // Per-agent terms: collision penalty for co-located agents and a small
    // deterministic shaping offset so rewards differ across agents.
    std::vector<double> rewards(static_cast<std::size_t>(num_agents) * S);
    double max_abs = 0.0;
    for (int s = 0; s < S; ++s) {
        std::vector<int> cells_now(num_agents);
        for (int i = 0; i < num_agents; ++i) cells_now[i] = cell_of(s, i);
        double coverage = 0.0;
        for (int lm : landmarks) {
            int best = 2 * grid_size;
            for (int i = 0; i < num_agents; ++i)
                best = std::min(best, manhattan(cells_now[i], lm));
            coverage -= best;
        }
        for (int i = 0; i < num_agents; ++i) {
            double r = coverage + opts.shaping_scale * (i + 1);
            for (int j = 0; j < num_agents; ++j)
                if (j != i && cells_now[j] == cells_now[i]) r += collision_penalty;
            rewards[static_cast<std::size_t>(i) * S + s] = r;
            max_abs = std::max(max_abs, std::abs(r));
        }
    }

    return NetworkedMdp(S, std::vector<int>(num_agents, kActions), std::move(kernel),
                        std::move(rewards), /*state_only_rewards=*/true, opts.discount,
                        max_abs);
}

NetworkedMdp make_random_mdp(int state_count, int num_agents, int actions_per_agent,
                             std::uint64_t seed, double r_max, double discount) {
    if (state_count <= 0 || num_agents <= 0 || actions_per_agent <= 0)
        throw ConfigError("sizes must be positive");
    long long joint = 1;
    for (int i = 0; i < num_agents; ++i) {
        joint *= actions_per_agent;
        if (joint > NetworkedMdp::kJointActionCap)
            throw ConfigError("joint action count exceeds cap");
    }
    Rng rng(seed);
    std::vector<std::vector<TransitionEntry>> kernel(
        static_cast<std::size_t>(state_count) * joint);
    for (auto& row : kernel) {
        // Exponential draws normalized to a Dirichlet(1) row; entries are
        // strictly positive, so the induced chain is irreducible and aperiodic.
        std::vector<double> g(state_count);
        double sum = 0.0;
        for (double& x : g) {
            x = -std::log(1.0 - rng.uniform()) + 1e-6;
            sum += x;
        }
        row.resize(state_count);
        double acc = 0.0;
        for (int s = 0; s < state_count - 1; ++s) {
            row[s] = {s, g[s] / sum};
            acc += row[s].prob;
        }
        row[state_count - 1] = {state_count - 1, 1.0 - acc};
    }
    std::vector<double> rewards(static_cast<std::size_t>(num_agents) * state_count * joint);
    for (double& r : rewards) r = rng.uniform(-r_max, r_max);
    return NetworkedMdp(state_count, std::vector<int>(num_agents, actions_per_agent),
                        std::move(kernel), std::move(rewards), /*state_only_rewards=*/false,
                        discount, r_max);
}

}  // namespace bdtd
