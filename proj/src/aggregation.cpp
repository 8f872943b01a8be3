#include "bdtd/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bdtd {

RuleKind rule_kind_from_string(const std::string& name) {
    if (name == "trimmed_mean") return RuleKind::TrimmedMean;
    if (name == "fedavg") return RuleKind::FedAvg;
    if (name == "krum") return RuleKind::Krum;
    if (name == "coordinate_median") return RuleKind::CoordinateMedian;
    if (name == "fltrust") return RuleKind::FlTrust;
    if (name == "scclip") return RuleKind::ScClip;
    throw AggregationError("unknown aggregation rule: " + name);
}

std::string to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::TrimmedMean: return "trimmed_mean";
        case RuleKind::FedAvg: return "fedavg";
        case RuleKind::Krum: return "krum";
        case RuleKind::CoordinateMedian: return "coordinate_median";
        case RuleKind::FlTrust: return "fltrust";
        case RuleKind::ScClip: return "scclip";
    }
    return "?";
}

double trimmed_mean(std::vector<double> values, int f, Rng& rng) {
    const int n = static_cast<int>(values.size());
    if (f < 0) throw AggregationError("trim count must be nonnegative");
    if (n <= 2 * f) throw AggregationError("trimmed mean requires n > 2f");
    // Random priorities realize the uniform tie order; equal values are
    // interchangeable in the mean but the definition calls for it.
    std::vector<std::pair<double, double>> keyed(n);
    for (int i = 0; i < n; ++i) keyed[i] = {values[i], rng.uniform()};
    std::sort(keyed.begin(), keyed.end());
    double sum = 0.0;
    for (int i = f; i < n - f; ++i) sum += keyed[i].first;
    return sum / (n - 2 * f);
}

Eigen::VectorXd trimmed_mean_vec(const std::vector<Eigen::VectorXd>& values, int f, Rng& rng) {
    if (values.empty()) throw AggregationError("empty input");
    const int n = static_cast<int>(values.size());
    if (n <= 2 * f) throw AggregationError("trimmed mean requires n > 2f");
    const auto d = values[0].size();
    Eigen::VectorXd out(d);
    std::vector<double> coord(n);
    for (Eigen::Index c = 0; c < d; ++c) {
        for (int i = 0; i < n; ++i) {
            if (values[i].size() != d) throw AggregationError("dimension mismatch");
            coord[i] = values[i](c);
        }
        out(c) = trimmed_mean(coord, f, rng);
    }
    return out;
}

Eigen::VectorXd fedavg(const std::vector<Eigen::VectorXd>& values,
                       std::span<const double> weights) {
    if (values.empty()) throw AggregationError("empty input");
    const int n = static_cast<int>(values.size());
    std::vector<double> uniform;
    if (weights.empty()) {
        uniform.assign(n, 1.0 / n);
        weights = uniform;
    }
    if (weights.size() != static_cast<std::size_t>(n))
        throw AggregationError("weight/value length mismatch");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw AggregationError("weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw AggregationError("weights must sum to 1");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(values[0].size());
    for (int i = 0; i < n; ++i) out += weights[i] * values[i];
    return out;
}

Eigen::VectorXd krum(const std::vector<Eigen::VectorXd>& values, int subset_size) {
    const int n = static_cast<int>(values.size());
    if (n < 2) throw AggregationError("krum requires at least 2 values");
    subset_size = std::clamp(subset_size, 1, n - 1);
    double best_score = std::numeric_limits<double>::infinity();
    int best = 0;
    std::vector<double> dists(n - 1);
    for (int j = 0; j < n; ++j) {
        int k = 0;
        for (int i = 0; i < n; ++i)
            if (i != j) dists[k++] = (values[i] - values[j]).squaredNorm();
        std::partial_sort(dists.begin(), dists.begin() + subset_size, dists.end());
        double score = 0.0;
        for (int i = 0; i < subset_size; ++i) score += dists[i];
        if (score < best_score) {  // strict: ties keep the lowest index
            best_score = score;
            best = j;
        }
    }
    return values[best];
}

Eigen::VectorXd coordinate_median(const std::vector<Eigen::VectorXd>& values) {
    if (values.empty()) throw AggregationError("empty input");
    const int n = static_cast<int>(values.size());
    const auto d = values[0].size();
    Eigen::VectorXd out(d);
    std::vector<double> coord(n);
    for (Eigen::Index c = 0; c < d; ++c) {
        for (int i = 0; i < n; ++i) coord[i] = values[i](c);
        std::sort(coord.begin(), coord.end());
        out(c) = (n % 2 == 1) ? coord[n / 2] : 0.5 * (coord[n / 2 - 1] + coord[n / 2]);
    }
    return out;
}

Eigen::VectorXd fltrust(const Eigen::VectorXd& own, const std::vector<Eigen::VectorXd>& received) {
    const double own_norm = own.norm();
    if (own_norm == 0.0) return own;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(own.size());
    double trust_sum = 0.0;
    for (const auto& v : received) {
        const double vn = v.norm();
        if (vn == 0.0) continue;
        const double trust = std::max(0.0, own.dot(v) / (own_norm * vn));
        if (trust == 0.0) continue;
        acc += trust * (v * (own_norm / vn));
        trust_sum += trust;
    }
    if (trust_sum == 0.0) return own;
    return acc / trust_sum;
}

Eigen::VectorXd scclip(const Eigen::VectorXd& own, const std::vector<Eigen::VectorXd>& received,
                       double tau) {
    if (tau <= 0.0) throw AggregationError("scclip threshold must be positive");
    if (received.empty()) return own;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(own.size());
    for (const auto& v : received) {
        Eigen::VectorXd diff = v - own;
        const double norm = diff.norm();
        if (norm > tau) diff *= tau / norm;
        acc += diff;
    }
    return own + acc / static_cast<double>(received.size());
}

Eigen::VectorXd aggregate(const AggregationRule& rule, const Eigen::VectorXd& own,
                          const std::vector<Eigen::VectorXd>& multiset,
                          const std::vector<Eigen::VectorXd>& others, int local_f, Rng& rng) {
    switch (rule.kind) {
        case RuleKind::TrimmedMean:
            return trimmed_mean_vec(multiset, local_f, rng);
        case RuleKind::FedAvg:
            return fedavg(multiset, rule.fedavg_weights.empty()
                                        ? std::span<const double>{}
                                        : std::span<const double>(rule.fedavg_weights));
        case RuleKind::Krum: {
            const int n = static_cast<int>(multiset.size());
            const int subset = rule.krum_subset_size > 0 ? rule.krum_subset_size : n - local_f;
            return krum(multiset, subset);
        }
        case RuleKind::CoordinateMedian:
            return coordinate_median(multiset);
        case RuleKind::FlTrust:
            return fltrust(own, others);
        case RuleKind::ScClip:
            return scclip(own, others, rule.scclip_tau);
    }
    throw AggregationError("unreachable rule kind");
}

}  // namespace bdtd
