#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "bdtd/features.hpp"
#include "bdtd/mdp.hpp"
#include "bdtd/protocol.hpp"

namespace bdtd {

/// Empirical squared Bellman error of one sample, averaged over the normal
/// agents: mean_i (r_bar + gamma phi(s')^T w^i - phi(s)^T w^i)^2 with r_bar
/// the uniform mean of the normal agents' rewards.
double sbe(const std::vector<Eigen::VectorXd>& normal_params, const Eigen::VectorXd& phi_s,
           const Eigen::VectorXd& phi_next, std::span<const double> normal_rewards,
           double gamma);

/// Mean squared deviation of the parameters from their average.
double consensus_error(const std::vector<Eigen::VectorXd>& normal_params);

struct MetricSeries {
    std::vector<double> sbe;   // per round
    std::vector<double> msbe;  // running mean of sbe
    std::vector<double> ce;    // per round
};

MetricSeries metric_series(const RunTrace& trace, const FeatureMap& features);

/// E_{s~d, a~pi}[phi(s) sum_i alpha_i r^i(s,a)], the paper-style weighted
/// fixed point. `weights` is indexed by agent id; excluded agents carry 0.
Eigen::VectorXd weighted_fixed_point(const NetworkedMdp& mdp, const JointPolicy& policy,
                                     const FeatureMap& features,
                                     std::span<const double> weights);

/// Standard projected-Bellman solution A^{-1} b with
/// A = E[phi(s)(phi(s) - gamma phi(s'))^T], b = E[phi(s) r_alpha(s)].
/// Kept separate from weighted_fixed_point; used as the convergence oracle.
Eigen::VectorXd lstd_fixed_point(const NetworkedMdp& mdp, const JointPolicy& policy,
                                 const FeatureMap& features, std::span<const double> weights);

/// Row-similarity metrics for row-stochastic matrices.
double delta_metric(const Eigen::MatrixXd& X);
double lambda_metric(const Eigen::MatrixXd& X);

struct ProductBoundReport {
    double delta_of_product = 0.0;
    double lambda_product = 0.0;
    double slack = 0.0;  // lambda_product - delta_of_product
    bool pass = false;
    double norm_lhs = 0.0;  // ||X - 1 x_bar|| for the product
    double norm_rhs = 0.0;  // n * delta(X)
    bool norm_pass = false;
};

ProductBoundReport verify_product_bound(const std::vector<Eigen::MatrixXd>& matrices,
                                        double tol = 1e-10);

struct Theorem1Report {
    Eigen::VectorXd w1;            // execution 1: agent 0 Byzantine
    Eigen::VectorXd w2;            // execution 2: agent n-1 Byzantine
    Eigen::VectorXd gap;           // w1 - w2
    Eigen::VectorXd expected_gap;  // E_{d_pi}[phi(s)]
    bool gap_ok = false;
    bool traces_match = false;  // middle agents identical across executions
    bool applicable = true;     // false when E[phi] = 0
};

/// Builds the two executions with rewards r^i = i (1-based), computes both
/// fixed points and the gap, and replays the protocol twice with the
/// Byzantine agent behaving correctly to check indistinguishability.
Theorem1Report impossibility_theorem1(int n, const FeatureMap& features,
                                      const NetworkedMdp& base_mdp, const JointPolicy& policy,
                                      std::uint64_t seed);

struct Theorem2Report {
    int n = 0, f = 0, q = 0;
    int normal_count = 0;            // |N| = n - q in case 1
    std::vector<char> forced_zero;   // per normal agent (1-based id i <= f)
    int max_positive_support = 0;
    bool pass = false;  // forced_zero holds for all i <= f and support == |N| - f
};

/// Case-1/Case-2 reward schedule feasibility analysis for the weighted
/// evaluation constraint sum_i alpha_i r^i = f+1 over the simplex.
Theorem2Report impossibility_theorem2(int n, int f, int q);

}  // namespace bdtd
