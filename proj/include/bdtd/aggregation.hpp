#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "bdtd/rng.hpp"

namespace bdtd {

struct AggregationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RuleKind { TrimmedMean, FedAvg, Krum, CoordinateMedian, FlTrust, ScClip };

RuleKind rule_kind_from_string(const std::string& name);
std::string to_string(RuleKind kind);

struct AggregationRule {
    RuleKind kind = RuleKind::TrimmedMean;
    int trim_f = 0;
    int krum_subset_size = -1;  // -1: n - f per the reference description
    double scclip_tau = 1.0;
    std::vector<double> fedavg_weights;  // empty: uniform
};

/// Sort ascending (ties broken uniformly at random), drop the largest f and
/// smallest f, return the mean of the remaining n - 2f values.
double trimmed_mean(std::vector<double> values, int f, Rng& rng);

/// Coordinate-wise lift of the scalar rule.
Eigen::VectorXd trimmed_mean_vec(const std::vector<Eigen::VectorXd>& values, int f, Rng& rng);

Eigen::VectorXd fedavg(const std::vector<Eigen::VectorXd>& values,
                       std::span<const double> weights = {});

Eigen::VectorXd krum(const std::vector<Eigen::VectorXd>& values, int subset_size);

Eigen::VectorXd coordinate_median(const std::vector<Eigen::VectorXd>& values);

Eigen::VectorXd fltrust(const Eigen::VectorXd& own, const std::vector<Eigen::VectorXd>& received);

Eigen::VectorXd scclip(const Eigen::VectorXd& own, const std::vector<Eigen::VectorXd>& received,
                       double tau);

/// Dispatch on the rule kind. `multiset` is the full input collection for the
/// symmetric rules; the reference-based rules (FLTrust, SCCLIP) use `own` as
/// the anchor and `others` as the received values.
Eigen::VectorXd aggregate(const AggregationRule& rule, const Eigen::VectorXd& own,
                          const std::vector<Eigen::VectorXd>& multiset,
                          const std::vector<Eigen::VectorXd>& others, int local_f, Rng& rng);

}  // namespace bdtd
