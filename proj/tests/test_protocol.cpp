#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "bdtd/metrics.hpp"
#include "bdtd/protocol.hpp"

using namespace bdtd;

namespace {

RosterConfig make_roster(int n, int f, std::vector<int> byz, int dim, double init_scale = 0.0,
                         std::uint64_t seed = 0) {
    RosterConfig r;
    r.n = n;
    r.f = f;
    r.byzantine = std::move(byz);
    r.init_params.assign(n, Eigen::VectorXd::Zero(dim));
    if (init_scale > 0.0) {
        Rng rng(seed);
        for (auto& w : r.init_params)
            for (int c = 0; c < dim; ++c) w(c) = rng.uniform(-init_scale, init_scale);
    }
    return r;
}

bool traces_equal(const RunTrace& a, const RunTrace& b) {
    if (a.rounds.size() != b.rounds.size()) return false;
    for (std::size_t k = 0; k < a.rounds.size(); ++k) {
        const auto& ra = a.rounds[k];
        const auto& rb = b.rounds[k];
        if (ra.state != rb.state || ra.joint_action != rb.joint_action ||
            ra.next_state != rb.next_state || ra.rewards != rb.rewards ||
            ra.deltas != rb.deltas)
            return false;
        for (std::size_t i = 0; i < ra.params.size(); ++i) {
            if (std::memcmp(ra.params[i].data(), rb.params[i].data(),
                            sizeof(double) * ra.params[i].size()) != 0)
                return false;
            if (std::memcmp(ra.consensus[i].data(), rb.consensus[i].data(),
                            sizeof(double) * ra.consensus[i].size()) != 0)
                return false;
        }
    }
    for (std::size_t i = 0; i < a.final_params.size(); ++i)
        if (std::memcmp(a.final_params[i].data(), b.final_params[i].data(),
                        sizeof(double) * a.final_params[i].size()) != 0)
            return false;
    return true;
}

}  // namespace

TEST_CASE("step size schedules") {
    CHECK(step_size(StepSizeKind::Harmonic, 4, 1.0) == doctest::Approx(0.25));
    CHECK(step_size(StepSizeKind::Harmonic, 0, 0.7) == doctest::Approx(0.7));
    for (long k : {1L, 10L, 12345L})
        CHECK(step_size(StepSizeKind::Constant, k, 0.1) == doctest::Approx(0.1));

    // divergence/convergence sanity of the harmonic schedule
    double sum = 0.0, sumsq = 0.0;
    for (long k = 1; k <= 1000000; ++k) {
        sum += 1.0 / k;
        sumsq += 1.0 / (static_cast<double>(k) * k);
    }
    CHECK(sum == doctest::Approx(14.392726722865).epsilon(1e-6));
    CHECK(sumsq < M_PI * M_PI / 6.0);
}

TEST_CASE("exclusion filter keeps in-ball values untouched") {
    LocalView view{4, 1, std::vector<char>(4, 0)};
    std::vector<std::pair<int, Eigen::VectorXd>> received;
    for (int j = 1; j < 4; ++j)
        received.emplace_back(j, Eigen::VectorXd::Constant(1, 0.5 * j));
    auto kept = exclusion_filter(received, 2.0, ProjectionMode::Coordinate, view);
    CHECK(kept.size() == 3);
    CHECK(view.local_n == 4);
    CHECK(view.local_f == 1);
    CHECK(std::count(view.removed.begin(), view.removed.end(), 1) == 0);
}

TEST_CASE("exclusion filter permanently removes out-of-ball senders") {
    LocalView view{4, 1, std::vector<char>(4, 0)};
    std::vector<std::pair<int, Eigen::VectorXd>> received = {
        {1, Eigen::VectorXd::Constant(1, 0.1)},
        {2, Eigen::VectorXd::Constant(1, 4.0)},  // 2R with R = 2
        {3, Eigen::VectorXd::Constant(1, -0.1)},
    };
    std::vector<int> removed_now;
    auto kept = exclusion_filter(received, 2.0, ProjectionMode::Coordinate, view, &removed_now);
    CHECK(kept.size() == 2);
    CHECK(view.local_n == 3);
    CHECK(view.local_f == 0);
    CHECK(removed_now == std::vector<int>{2});

    // later rounds: the sender stays excluded even with in-ball values
    received[1].second = Eigen::VectorXd::Constant(1, 0.0);
    auto kept2 = exclusion_filter(received, 2.0, ProjectionMode::Coordinate, view);
    CHECK(kept2.size() == 2);
    CHECK(view.local_n == 3);
}

TEST_CASE("exclusion filter clamps local f at zero") {
    LocalView view{4, 0, std::vector<char>(4, 0)};
    std::vector<std::pair<int, Eigen::VectorXd>> received = {
        {1, Eigen::VectorXd::Constant(1, 100.0)}};
    exclusion_filter(received, 2.0, ProjectionMode::Coordinate, view);
    CHECK(view.local_f == 0);
    CHECK(view.local_n == 3);
}

TEST_CASE("removals preserve the trimmed-mean precondition from n >= 3f+1") {
    // exhaustive over roster sizes up to 13 and any number of removals <= f:
    // each removal decrements both local n and local f
    for (int n = 4; n <= 13; ++n) {
        const int f = (n - 1) / 3;
        for (int removed = 0; removed <= f; ++removed) {
            const int local_n = n - removed;
            const int local_f = f - removed;
            // multiset size with self: local_n; rule needs local_n > 2 local_f
            CHECK(local_n > 2 * local_f);
        }
    }
}

TEST_CASE("symmetric fault-free run keeps all agents identical") {
    // single state, identical rewards and initial parameters
    auto mdp = make_random_mdp(1, 3, 2, 5);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::constant_scalar(1, 1.0);
    auto roster = make_roster(3, 0, {}, 1);

    AggregationRule rule{.kind = RuleKind::FedAvg};
    AttackModel none;
    StepSchedule sched{StepSizeKind::Harmonic, 1.0};
    RunOptions opts;
    opts.horizon = 50;
    opts.radius = 100.0;
    opts.seed = 3;

    // identical reward tables make the agents exactly interchangeable
    auto flat = mdp.with_constant_agent_rewards(std::vector<double>{0.5, 0.5, 0.5});
    auto trace = run_bdtd(flat, policy, features, roster, rule, none, sched, opts);
    for (const auto& rec : trace.rounds)
        for (int i = 1; i < 3; ++i)
            CHECK(rec.params[i] == rec.params[0]);
}

TEST_CASE("q=0 run is bit-identical to a fault-free run") {
    auto mdp = make_random_mdp(4, 4, 2, 11);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::random_scalar(4, 2);
    auto roster = make_roster(4, 1, {}, 1, 1.0, 7);  // f=1 declared, nobody Byzantine

    AggregationRule rule{.kind = RuleKind::TrimmedMean, .trim_f = 1};
    StepSchedule sched{StepSizeKind::Harmonic, 1.0};
    RunOptions opts;
    opts.horizon = 300;
    opts.radius = 50.0;
    opts.seed = 9;

    AttackModel none;
    AttackModel gaussian;
    gaussian.kind = AttackKind::Gaussian;

    auto a = run_bdtd(mdp, policy, features, roster, rule, none, sched, opts);
    auto b = run_bdtd(mdp, policy, features, roster, rule, gaussian, sched, opts);
    CHECK(traces_equal(a, b));
}

TEST_CASE("environment trajectory is independent of the attack") {
    auto mdp = make_random_mdp(5, 4, 2, 21);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::random_scalar(5, 3);
    auto roster = make_roster(4, 1, {3}, 1, 1.0, 13);

    AggregationRule rule{.kind = RuleKind::TrimmedMean, .trim_f = 1};
    StepSchedule sched{StepSizeKind::Harmonic, 1.0};
    RunOptions opts;
    opts.horizon = 400;
    opts.radius = 50.0;
    opts.seed = 17;

    AttackModel none;
    AttackModel gaussian;
    gaussian.kind = AttackKind::Gaussian;
    AttackModel trim;
    trim.kind = AttackKind::TrimAttack;

    auto a = run_bdtd(mdp, policy, features, roster, rule, none, sched, opts);
    for (const auto& attack : {gaussian, trim}) {
        auto b = run_bdtd(mdp, policy, features, roster, rule, attack, sched, opts);
        for (std::size_t k = 0; k < a.rounds.size(); ++k) {
            CHECK(a.rounds[k].state == b.rounds[k].state);
            CHECK(a.rounds[k].joint_action == b.rounds[k].joint_action);
            CHECK(a.rounds[k].rewards == b.rounds[k].rewards);
        }
    }
}

TEST_CASE("identical config and seed reproduce the trace exactly") {
    auto mdp = make_random_mdp(4, 4, 2, 31);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::random_unit(4, 2, 4);
    auto roster = make_roster(4, 1, {0}, 2, 0.5, 19);

    AggregationRule rule{.kind = RuleKind::TrimmedMean, .trim_f = 1};
    AttackModel gaussian;
    gaussian.kind = AttackKind::Gaussian;
    StepSchedule sched{StepSizeKind::Constant, 0.05};
    RunOptions opts;
    opts.horizon = 200;
    opts.radius = 10.0;
    opts.seed = 23;

    auto a = run_bdtd(mdp, policy, features, roster, rule, gaussian, sched, opts);
    auto b = run_bdtd(mdp, policy, features, roster, rule, gaussian, sched, opts);
    CHECK(traces_equal(a, b));

    opts.seed = 24;
    auto c = run_bdtd(mdp, policy, features, roster, rule, gaussian, sched, opts);
    CHECK_FALSE(traces_equal(a, c));
}

TEST_CASE("serial and parallel execution are bitwise identical") {
    auto mdp = make_random_mdp(5, 7, 2, 41);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::random_unit(5, 3, 6);
    auto roster = make_roster(7, 2, {5, 6}, 3, 1.0, 29);

    StepSchedule sched{StepSizeKind::Constant, 0.1};
    RunOptions opts;
    opts.horizon = 250;
    opts.radius = 20.0;
    opts.seed = 37;

    for (auto rule_kind : {RuleKind::TrimmedMean, RuleKind::FedAvg, RuleKind::Krum,
                           RuleKind::CoordinateMedian, RuleKind::FlTrust, RuleKind::ScClip}) {
        AggregationRule rule;
        rule.kind = rule_kind;
        rule.trim_f = 2;
        rule.scclip_tau = 1.0;
        AttackModel gaussian;
        gaussian.kind = AttackKind::Gaussian;

        opts.parallel = false;
        auto serial = run_bdtd(mdp, policy, features, roster, rule, gaussian, sched, opts);
        opts.parallel = true;
        auto parallel = run_bdtd(mdp, policy, features, roster, rule, gaussian, sched, opts);
        CHECK(traces_equal(serial, parallel));
    }
}

TEST_CASE("normal parameters stay inside the projection ball") {
    auto mdp = make_random_mdp(4, 4, 2, 51);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::random_unit(4, 2, 8);
    auto roster = make_roster(4, 1, {2}, 2, 0.9, 31);

    AggregationRule rule{.kind = RuleKind::TrimmedMean, .trim_f = 1};
    AttackModel gaussian;
    gaussian.kind = AttackKind::Gaussian;
    StepSchedule sched{StepSizeKind::Constant, 0.5};
    RunOptions opts;
    opts.horizon = 300;
    opts.radius = 1.0;
    opts.seed = 43;

    auto trace = run_bdtd(mdp, policy, features, roster, rule, gaussian, sched, opts);
    for (std::size_t k = 1; k < trace.rounds.size(); ++k)
        for (int i : trace.normal_agents())
            CHECK(inside_ball(trace.rounds[k].params[i], opts.radius, opts.projection_mode));
    for (int i : trace.normal_agents())
        CHECK(inside_ball(trace.final_params[i], opts.radius, opts.projection_mode));
}

TEST_CASE("fixed-value attack delivers the constant to every receiver") {
    auto mdp = make_random_mdp(3, 4, 2, 61);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::constant_scalar(3, 1.0);
    auto roster = make_roster(4, 1, {3}, 1);  // everyone starts at 0

    AggregationRule rule{.kind = RuleKind::FedAvg};
    AttackModel fixed;
    fixed.kind = AttackKind::FixedValue;
    fixed.fixed_value = 0.8;
    StepSchedule sched{StepSizeKind::Constant, 0.0};  // freeze TD updates
    RunOptions opts;
    opts.horizon = 3;
    opts.radius = 10.0;
    opts.seed = 47;

    auto trace = run_bdtd(mdp, policy, features, roster, rule, fixed, sched, opts);
    // round 0: benign receivers average {0, 0, 0, 0.8}
    for (int i = 0; i < 3; ++i)
        CHECK(trace.rounds[0].consensus[i](0) == doctest::Approx(0.2));
    // the Byzantine agent aggregates honest values only
    CHECK(trace.rounds[0].consensus[3](0) == doctest::Approx(0.0));
}

TEST_CASE("broadcast flag controls per-neighbor consistency of gaussian sends") {
    auto mdp = make_random_mdp(3, 4, 2, 71);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::constant_scalar(3, 1.0);
    auto roster = make_roster(4, 1, {3}, 1);

    AggregationRule rule{.kind = RuleKind::FedAvg};
    StepSchedule sched{StepSizeKind::Constant, 0.0};
    RunOptions opts;
    opts.horizon = 1;
    opts.radius = 100.0;
    opts.seed = 53;

    AttackModel per_neighbor;
    per_neighbor.kind = AttackKind::Gaussian;
    per_neighbor.broadcast = false;
    auto a = run_bdtd(mdp, policy, features, roster, rule, per_neighbor, sched, opts);
    // receivers saw different draws: fedavg outputs differ between benign agents
    CHECK(a.rounds[0].consensus[0](0) != a.rounds[0].consensus[1](0));

    AttackModel broadcast = per_neighbor;
    broadcast.broadcast = true;
    auto b = run_bdtd(mdp, policy, features, roster, rule, broadcast, sched, opts);
    CHECK(b.rounds[0].consensus[0](0) == b.rounds[0].consensus[1](0));
    CHECK(b.rounds[0].consensus[0](0) == b.rounds[0].consensus[2](0));
}

TEST_CASE("consensus trend: deviation shrinks by two orders of rounds") {
    auto mdp = make_random_mdp(5, 10, 2, 81);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::random_scalar(5, 9);
    auto roster = make_roster(10, 2, {8, 9}, 1, 1.0, 59);

    AggregationRule rule{.kind = RuleKind::TrimmedMean, .trim_f = 2};
    AttackModel gaussian;
    gaussian.kind = AttackKind::Gaussian;
    StepSchedule sched{StepSizeKind::Harmonic, 1.0};
    RunOptions opts;
    opts.horizon = 2000;
    opts.radius = default_radius(mdp.r_max(), features.phi_min(), mdp.discount());
    opts.seed = 61;

    auto trace = run_bdtd(mdp, policy, features, roster, rule, gaussian, sched, opts);
    auto max_dev = [&](long k) {
        const auto normals = trace.normal_agents();
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(1);
        for (int i : normals) mean += trace.rounds[k].params[i];
        mean /= static_cast<double>(normals.size());
        double dev = 0.0;
        for (int i : normals)
            dev = std::max(dev, (trace.rounds[k].params[i] - mean).cwiseAbs().maxCoeff());
        return dev;
    };
    CHECK(max_dev(1999) < max_dev(99));
}

TEST_CASE("roster validation") {
    auto mdp = make_random_mdp(3, 4, 2, 91);
    auto policy = JointPolicy::uniform(mdp);
    auto features = FeatureMap::constant_scalar(3, 1.0);
    AggregationRule rule{.kind = RuleKind::TrimmedMean, .trim_f = 1};
    AttackModel none;
    StepSchedule sched;
    RunOptions opts;
    opts.radius = 1.0;

    auto bad_f = make_roster(4, 2, {}, 1);  // 4 < 3*2+1
    CHECK_THROWS_AS(run_bdtd(mdp, policy, features, bad_f, rule, none, sched, opts), ConfigError);

    auto too_many = make_roster(4, 1, {2, 3}, 1);
    CHECK_THROWS_AS(run_bdtd(mdp, policy, features, too_many, rule, none, sched, opts),
                    ConfigError);

    auto bad_dim = make_roster(4, 1, {3}, 2);
    CHECK_THROWS_AS(run_bdtd(mdp, policy, features, bad_dim, rule, none, sched, opts),
                    ConfigError);
}
