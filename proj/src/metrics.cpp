#include "bdtd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace bdtd {

double sbe(const std::vector<Eigen::VectorXd>& normal_params, const Eigen::VectorXd& phi_s,
           const Eigen::VectorXd& phi_next, std::span<const double> normal_rewards,
           double gamma) {
    if (normal_params.empty()) throw ConfigError("sbe requires at least one normal agent");
    if (normal_params.size() != normal_rewards.size())
        throw ConfigError("params/rewards size mismatch");
    double r_bar = 0.0;
    for (double r : normal_rewards) r_bar += r;
    r_bar /= static_cast<double>(normal_rewards.size());
    double acc = 0.0;
    for (const auto& w : normal_params) {
        const double resid = r_bar + gamma * phi_next.dot(w) - phi_s.dot(w);
        acc += resid * resid;
    }
    return acc / static_cast<double>(normal_params.size());
}

double consensus_error(const std::vector<Eigen::VectorXd>& normal_params) {
    if (normal_params.empty()) throw ConfigError("consensus_error requires agents");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(normal_params[0].size());
    for (const auto& w : normal_params) mean += w;
    mean /= static_cast<double>(normal_params.size());
    double acc = 0.0;
    for (const auto& w : normal_params) acc += (w - mean).squaredNorm();
    return acc / static_cast<double>(normal_params.size());
}

MetricSeries metric_series(const RunTrace& trace, const FeatureMap& features) {
    MetricSeries out;
    const std::vector<int> normals = trace.normal_agents();
    out.sbe.reserve(trace.rounds.size());
    out.msbe.reserve(trace.rounds.size());
    out.ce.reserve(trace.rounds.size());
    double running = 0.0;
    std::vector<Eigen::VectorXd> params(normals.size());
    std::vector<double> rewards(normals.size());
    for (std::size_t k = 0; k < trace.rounds.size(); ++k) {
        const RoundRecord& rec = trace.rounds[k];
        for (std::size_t j = 0; j < normals.size(); ++j) {
            params[j] = rec.params[normals[j]];
            rewards[j] = rec.rewards[normals[j]];
        }
        const double s = sbe(params, features.row(rec.state), features.row(rec.next_state),
                             rewards, trace.gamma);
        running += s;
        out.sbe.push_back(s);
        out.msbe.push_back(running / static_cast<double>(k + 1));
        out.ce.push_back(consensus_error(params));
    }
    return out;
}

namespace {

void check_simplex(std::span<const double> weights, int n) {
    if (weights.size() != static_cast<std::size_t>(n))
        throw ConfigError("one weight per agent required");
    double sum = 0.0;
    for (double w : weights) {
        if (w < -1e-12) throw ConfigError("weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("weights must sum to 1");
}

Eigen::VectorXd mixed_reward_by_state(const NetworkedMdp& mdp, const JointPolicy& policy,
                                      std::span<const double> weights) {
    const int S = mdp.state_count();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s)
        for (long long a = 0; a < mdp.joint_action_count(); ++a) {
            const double pa = policy.joint_prob(mdp, s, a);
            if (pa == 0.0) continue;
            double mix = 0.0;
            for (int i = 0; i < mdp.num_agents(); ++i)
                mix += weights[i] * mdp.reward(i, s, a);
            r(s) += pa * mix;
        }
    return r;
}

}  // namespace

Eigen::VectorXd weighted_fixed_point(const NetworkedMdp& mdp, const JointPolicy& policy,
                                     const FeatureMap& features,
                                     std::span<const double> weights) {
    check_simplex(weights, mdp.num_agents());
    const Eigen::MatrixXd P = induced_chain(mdp, policy);
    const Eigen::VectorXd d_pi = stationary_distribution(P);
    const Eigen::VectorXd r = mixed_reward_by_state(mdp, policy, weights);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(features.dim());
    for (int s = 0; s < mdp.state_count(); ++s) w += d_pi(s) * r(s) * features.row(s);
    return w;
}

Eigen::VectorXd lstd_fixed_point(const NetworkedMdp& mdp, const JointPolicy& policy,
                                 const FeatureMap& features, std::span<const double> weights) {
    check_simplex(weights, mdp.num_agents());
    const Eigen::MatrixXd P = induced_chain(mdp, policy);
    const Eigen::VectorXd d_pi = stationary_distribution(P);
    const Eigen::VectorXd r = mixed_reward_by_state(mdp, policy, weights);
    const int d = features.dim();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    for (int s = 0; s < mdp.state_count(); ++s) {
        const Eigen::VectorXd phi = features.row(s);
        Eigen::VectorXd expected_next = Eigen::VectorXd::Zero(d);
        for (int sp = 0; sp < mdp.state_count(); ++sp)
            expected_next += P(s, sp) * features.row(sp);
        A += d_pi(s) * phi * (phi - mdp.discount() * expected_next).transpose();
        b += d_pi(s) * r(s) * phi;
    }
    Eigen::VectorXd w = A.fullPivLu().solve(b);
    if ((A * w - b).cwiseAbs().maxCoeff() > 1e-10)
        throw std::runtime_error("lstd fixed-point solve residual too large (singular A?)");
    return w;
}

double delta_metric(const Eigen::MatrixXd& X) {
    const int n = static_cast<int>(X.rows());
    for (int i = 0; i < n; ++i)
        if (std::abs(X.row(i).sum() - 1.0) > 1e-10)
            throw ConfigError("delta_metric: matrix is not row-stochastic");
    double best = 0.0;
    for (int j = 0; j < X.cols(); ++j)
        best = std::max(best, X.col(j).maxCoeff() - X.col(j).minCoeff());
    return best;
}

double lambda_metric(const Eigen::MatrixXd& X) {
    const int n = static_cast<int>(X.rows());
    for (int i = 0; i < n; ++i)
        if (std::abs(X.row(i).sum() - 1.0) > 1e-10)
            throw ConfigError("lambda_metric: matrix is not row-stochastic");
    double min_overlap = std::numeric_limits<double>::infinity();
    for (int i1 = 0; i1 < n; ++i1)
        for (int i2 = 0; i2 < n; ++i2) {
            const double overlap = X.row(i1).cwiseMin(X.row(i2)).sum();
            min_overlap = std::min(min_overlap, overlap);
        }
    return 1.0 - min_overlap;
}

ProductBoundReport verify_product_bound(const std::vector<Eigen::MatrixXd>& matrices,
                                        double tol) {
    if (matrices.empty()) throw ConfigError("verify_product_bound: empty input");
    Eigen::MatrixXd product = matrices[0];
    double lambda_product = lambda_metric(matrices[0]);
    for (std::size_t i = 1; i < matrices.size(); ++i) {
        if (matrices[i].rows() != product.rows())
            throw ConfigError("verify_product_bound: size mismatch");
        lambda_product *= lambda_metric(matrices[i]);
        product = product * matrices[i];
    }
    ProductBoundReport rep;
    rep.delta_of_product = delta_metric(product);
    rep.lambda_product = lambda_product;
    rep.slack = lambda_product - rep.delta_of_product;
    rep.pass = rep.delta_of_product <= lambda_product + tol;

    const int n = static_cast<int>(product.rows());
    const Eigen::RowVectorXd col_mean = product.colwise().mean();
    const Eigen::MatrixXd centered = product.rowwise() - col_mean;
    rep.norm_lhs = centered.jacobiSvd().singularValues()(0);
    rep.norm_rhs = n * rep.delta_of_product;
    rep.norm_pass = rep.norm_lhs <= rep.norm_rhs + tol;
    return rep;
}

Theorem1Report impossibility_theorem1(int n, const FeatureMap& features,
                                      const NetworkedMdp& base_mdp, const JointPolicy& policy,
                                      std::uint64_t seed) {
    if (n < 3) throw ConfigError("theorem 1 construction needs n >= 3");
    if (base_mdp.num_agents() != n) throw ConfigError("base mdp must have n agents");

    std::vector<double> agent_rewards(n);
    for (int i = 0; i < n; ++i) agent_rewards[i] = i + 1;  // r^i = i, agents 1..n
    const NetworkedMdp mdp = base_mdp.with_constant_agent_rewards(agent_rewards);

    Theorem1Report rep;
    std::vector<double> alpha1(n, 0.0), alpha2(n, 0.0);
    for (int i = 1; i < n; ++i) alpha1[i] = 1.0 / (n - 1);      // execution 1: drop agent 1
    for (int i = 0; i < n - 1; ++i) alpha2[i] = 1.0 / (n - 1);  // execution 2: drop agent n
    rep.w1 = weighted_fixed_point(mdp, policy, features, alpha1);
    rep.w2 = weighted_fixed_point(mdp, policy, features, alpha2);
    rep.gap = rep.w1 - rep.w2;

    const Eigen::MatrixXd P = induced_chain(mdp, policy);
    const Eigen::VectorXd d_pi = stationary_distribution(P);
    rep.expected_gap = features.table().transpose() * d_pi;
    rep.applicable = rep.expected_gap.cwiseAbs().maxCoeff() > 1e-12;
    rep.gap_ok = rep.applicable && (rep.gap - rep.expected_gap).cwiseAbs().maxCoeff() <= 1e-10;

    // Indistinguishability: replay the protocol for both executions with the
    // Byzantine agent behaving correctly; middle agents must trace identically.
    const int f = n >= 4 ? 1 : 0;
    RosterConfig roster;
    roster.n = n;
    roster.f = f;
    roster.init_params.assign(n, Eigen::VectorXd::Zero(features.dim()));
    RunOptions opts;
    opts.horizon = 200;
    opts.seed = seed;
    opts.radius = features.scalar_mode() && features.phi_min() > 0.0
                      ? default_radius(mdp.r_max(), features.phi_min(), mdp.discount())
                      : 10.0 * n;
    AggregationRule rule{.kind = RuleKind::TrimmedMean, .trim_f = f};
    AttackModel idle;  // attack = none: Byzantine sends its true parameter

    RosterConfig roster1 = roster, roster2 = roster;
    if (f == 1) {
        roster1.byzantine = {0};
        roster2.byzantine = {n - 1};
    }
    StepSchedule schedule{StepSizeKind::Harmonic, 1.0};
    const RunTrace t1 = run_bdtd(mdp, policy, features, roster1, rule, idle, schedule, opts);
    const RunTrace t2 = run_bdtd(mdp, policy, features, roster2, rule, idle, schedule, opts);
    rep.traces_match = true;
    for (std::size_t k = 0; k < t1.rounds.size() && rep.traces_match; ++k)
        for (int i = 1; i < n - 1; ++i) {
            const auto& a = t1.rounds[k].params[i];
            const auto& b = t2.rounds[k].params[i];
            if (std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) != 0) {
                rep.traces_match = false;
                break;
            }
        }
    return rep;
}

Theorem2Report impossibility_theorem2(int n, int f, int q) {
    if (f <= 0 || q <= 0 || q > f || n < 3 * f + 1)
        throw ConfigError("theorem 2 construction needs n >= 3f+1 and 0 < q <= f");
    Theorem2Report rep;
    rep.n = n;
    rep.f = f;
    rep.q = q;
    rep.normal_count = n - q;  // case 1: agents n-q+1..n are Byzantine

    // Rewards, agents 1-based: r_i = i for i <= f and i >= n-q+1, else f+1.
    std::vector<double> r(rep.normal_count);
    for (int i = 1; i <= rep.normal_count; ++i) r[i - 1] = (i <= f) ? i : f + 1;
    const double target = f + 1;

    // alpha_i can be positive in some feasible simplex point iff r_i hits the
    // target exactly or some other normal agent sits on the opposite side.
    rep.forced_zero.assign(rep.normal_count, 1);
    for (int i = 0; i < rep.normal_count; ++i) {
        if (r[i] == target) {
            rep.forced_zero[i] = 0;
            continue;
        }
        for (int j = 0; j < rep.normal_count; ++j)
            if ((r[i] - target) * (r[j] - target) < 0.0) {
                rep.forced_zero[i] = 0;
                break;
            }
    }
    rep.max_positive_support =
        static_cast<int>(std::count(rep.forced_zero.begin(), rep.forced_zero.end(), 0));

    bool low_ids_zero = true;
    for (int i = 0; i < std::min(f, rep.normal_count); ++i)
        if (!rep.forced_zero[i]) low_ids_zero = false;
    rep.pass = low_ids_zero && rep.max_positive_support == rep.normal_count - f;
    return rep;
}

}  // namespace bdtd
