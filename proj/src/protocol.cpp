#include "bdtd/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <omp.h>

namespace bdtd {

namespace {

constexpr std::uint64_t kEnvStream = 0x656e76;     // "env"
constexpr std::uint64_t kAttackStream = 0x61746b;  // "atk"
constexpr std::uint64_t kAggStream = 0x616767;     // "agg"

}  // namespace

std::vector<int> RunTrace::normal_agents() const {
    std::vector<int> out;
    for (int i = 0; i < n; ++i)
        if (std::find(byzantine.begin(), byzantine.end(), i) == byzantine.end())
            out.push_back(i);
    return out;
}

double step_size(StepSizeKind kind, long k, double eta0) {
    return StepSchedule{kind, eta0}.at(k);
}

std::vector<Eigen::VectorXd> exclusion_filter(
    const std::vector<std::pair<int, Eigen::VectorXd>>& received, double radius,
    ProjectionMode mode, LocalView& view, std::vector<int>* removed_now) {
    std::vector<Eigen::VectorXd> kept;
    kept.reserve(received.size());
    for (const auto& [sender, value] : received) {
        if (view.removed[sender]) continue;
        if (!inside_ball(value, radius, mode)) {
            view.removed[sender] = 1;
            view.local_n -= 1;
            view.local_f = std::max(0, view.local_f - 1);
            if (removed_now) removed_now->push_back(sender);
            continue;
        }
        kept.push_back(value);
    }
    return kept;
}

RunTrace run_bdtd(const NetworkedMdp& mdp, const JointPolicy& policy, const FeatureMap& features,
                  const RosterConfig& roster, const AggregationRule& rule,
                  const AttackModel& attack, const StepSchedule& schedule,
                  const RunOptions& opts) {
    const int n = roster.n;
    const int f = roster.f;
    if (n < 3 * f + 1) throw ConfigError("roster violates n >= 3f+1");
    if (static_cast<int>(roster.byzantine.size()) > f)
        throw ConfigError("more Byzantine agents than the declared bound f");
    if (mdp.num_agents() != n) throw ConfigError("roster size does not match mdp agents");
    if (features.state_count() != mdp.state_count())
        throw ConfigError("feature table does not match mdp states");
    if (static_cast<int>(roster.init_params.size()) != n)
        throw ConfigError("one initial parameter per agent required");
    const int d = features.dim();
    for (const auto& w : roster.init_params)
        if (w.size() != d) throw ConfigError("initial parameter dimension mismatch");
    if (opts.radius <= 0.0) throw ConfigError("projection radius must be positive");

    std::vector<char> is_byz(n, 0);
    for (int b : roster.byzantine) {
        if (b < 0 || b >= n) throw ConfigError("byzantine id out of range");
        is_byz[b] = 1;
    }

    const double gamma = mdp.discount();
    const std::uint64_t env_seed = substream(opts.seed, kEnvStream);
    const std::uint64_t atk_seed = substream(opts.seed, kAttackStream);
    const std::uint64_t agg_seed = substream(opts.seed, kAggStream);
    Rng env_rng(env_seed);

    // Every agent keeps an honestly-updated parameter; for Byzantine agents it
    // only matters as the value an idle (attack = none) adversary would send.
    std::vector<Eigen::VectorXd> params = roster.init_params;
    std::vector<LocalView> views(n);
    for (auto& v : views) v = LocalView{n, f, std::vector<char>(n, 0)};

    RunTrace trace;
    trace.n = n;
    trace.f = f;
    trace.dim = d;
    trace.byzantine = roster.byzantine;
    trace.seed = opts.seed;
    trace.gamma = gamma;
    if (opts.record_rounds) trace.rounds.reserve(opts.horizon);

    const double krum_lambda_max =
        attack.krum_lambda_max > 0.0 ? attack.krum_lambda_max : 10.0 * opts.radius;

    int state = opts.initial_state;
    std::vector<Eigen::VectorXd> consensus(n);
    std::vector<double> deltas(n, 0.0);

    for (long k = 0; k < opts.horizon; ++k) {
        // Crafted values for the round; one per Byzantine agent.
        std::vector<Eigen::VectorXd> crafted;
        if (!roster.byzantine.empty() &&
            (attack.kind == AttackKind::TrimAttack || attack.kind == AttackKind::KrumAttack)) {
            std::vector<Eigen::VectorXd> benign;
            for (int i = 0; i < n; ++i)
                if (!is_byz[i]) benign.push_back(params[i]);
            Rng craft_rng(substream(atk_seed, static_cast<std::uint64_t>(k)));
            const int q = static_cast<int>(roster.byzantine.size());
            if (attack.kind == AttackKind::TrimAttack)
                crafted = trim_attack(benign, q, craft_rng, attack.trim_band_sigma);
            else
                crafted = krum_attack(benign, q, attack.krum_subset_size, krum_lambda_max,
                                      attack.krum_search_steps);
        }

        // Message for (sender, receiver); Byzantine sends may differ per neighbor.
        auto message = [&](int sender, int receiver) -> Eigen::VectorXd {
            if (!is_byz[sender] || attack.kind == AttackKind::None) return params[sender];
            switch (attack.kind) {
                case AttackKind::FixedValue:
                    return Eigen::VectorXd::Constant(d, attack.fixed_value);
                case AttackKind::Gaussian: {
                    const std::uint64_t s = attack.broadcast
                                                ? substream(atk_seed, k, sender)
                                                : substream(atk_seed, k, sender, receiver + 1);
                    Rng r(s);
                    return gaussian_attack(r, d);
                }
                default: {
                    // Trim/Krum attacks are crafted per round; colluding replicas.
                    int slot = 0;
                    for (int b : roster.byzantine) {
                        if (b == sender) break;
                        ++slot;
                    }
                    return crafted[slot];
                }
            }
        };

        if (opts.record_rounds) {
            trace.rounds.emplace_back();
            trace.rounds.back().params = params;
        }

        // Consensus update, independent per receiver.
        std::vector<std::vector<int>> removed_per_receiver(n);
#pragma omp parallel for schedule(static) if (opts.parallel)
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<int, Eigen::VectorXd>> received;
            received.reserve(n - 1);
            for (int j = 0; j < n; ++j)
                if (j != i) received.emplace_back(j, message(j, i));
            std::vector<Eigen::VectorXd> kept =
                opts.apply_projection
                    ? exclusion_filter(received, opts.radius, opts.projection_mode, views[i],
                                       &removed_per_receiver[i])
                    : [&] {
                          std::vector<Eigen::VectorXd> all;
                          for (auto& [s, v] : received) all.push_back(std::move(v));
                          return all;
                      }();
            std::vector<Eigen::VectorXd> multiset;
            if (roster.include_self) multiset.push_back(params[i]);
            multiset.insert(multiset.end(), kept.begin(), kept.end());
            Rng agg_rng(substream(agg_seed, static_cast<std::uint64_t>(k),
                                  static_cast<std::uint64_t>(i)));
            consensus[i] =
                aggregate(rule, params[i], multiset, kept, views[i].local_f, agg_rng);
        }
        for (int i = 0; i < n; ++i)
            for (int s : removed_per_receiver[i]) trace.exclusions.push_back({k, i, s});

        // One shared environment step; all agents sample honestly.
        const StepResult step = sample_step(mdp, policy, state, env_rng);

        // Projected TD update.
        const Eigen::VectorXd phi_s = features.row(state);
        const Eigen::VectorXd phi_next = features.row(step.next_state);
        const double eta = schedule.at(k);
#pragma omp parallel for schedule(static) if (opts.parallel)
        for (int i = 0; i < n; ++i) {
            deltas[i] = td_error(step.rewards[i], params[i], phi_s, phi_next, gamma);
            Eigen::VectorXd updated = consensus[i] + eta * deltas[i] * phi_s;
            if (opts.apply_projection)
                updated = project_ball(updated, opts.radius, opts.projection_mode);
            if (!updated.allFinite())
                throw std::runtime_error("NaN parameter at round " + std::to_string(k) +
                                         ", agent " + std::to_string(i));
            params[i] = std::move(updated);
        }

        if (opts.record_rounds) {
            RoundRecord& rec = trace.rounds.back();
            rec.state = state;
            rec.joint_action = step.joint_action;
            rec.next_state = step.next_state;
            rec.rewards = step.rewards;
            rec.consensus = consensus;
            rec.deltas = deltas;
        }
        state = step.next_state;
    }

    trace.final_params = params;
    return trace;
}

}  // namespace bdtd
