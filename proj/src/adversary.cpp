#include "bdtd/adversary.hpp"

#include <algorithm>
#include <cmath>

#include "bdtd/aggregation.hpp"
#include "bdtd/mdp.hpp"

namespace bdtd {

AttackKind attack_kind_from_string(const std::string& name) {
    if (name == "none") return AttackKind::None;
    if (name == "gaussian") return AttackKind::Gaussian;
    if (name == "krum_attack") return AttackKind::KrumAttack;
    if (name == "trim_attack") return AttackKind::TrimAttack;
    if (name == "fixed_value") return AttackKind::FixedValue;
    throw ConfigError("unknown attack kind: " + name);
}

std::string to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::None: return "none";
        case AttackKind::Gaussian: return "gaussian";
        case AttackKind::KrumAttack: return "krum_attack";
        case AttackKind::TrimAttack: return "trim_attack";
        case AttackKind::FixedValue: return "fixed_value";
    }
    return "?";
}

Eigen::VectorXd gaussian_attack(Rng& rng, int dim) {
    if (dim < 1) throw ConfigError("dimension must be positive");
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = rng.normal();
    return v;
}

std::vector<Eigen::VectorXd> trim_attack(const std::vector<Eigen::VectorXd>& benign, int f,
                                         Rng& rng, double band_sigma) {
    if (benign.empty()) throw ConfigError("trim attack needs at least one benign vector");
    if (f == 0) return {};
    const auto d = benign[0].size();
    const int n = static_cast<int>(benign.size());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& v : benign) mean += v;
    mean /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd lo = benign[0], hi = benign[0];
    for (const auto& v : benign) {
        var += (v - mean).cwiseAbs2();
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    var /= n;

    std::vector<Eigen::VectorXd> crafted(f, Eigen::VectorXd(d));
    for (int j = 0; j < f; ++j) {
        for (Eigen::Index c = 0; c < d; ++c) {
            double sigma = std::sqrt(var(c));
            if (sigma == 0.0) sigma = 1.0;
            const double u = rng.uniform(0.0, 1.0) * band_sigma * sigma;
            // Push the trimmed range away from the benign mean.
            crafted[j](c) = mean(c) >= 0.0 ? lo(c) - u : hi(c) + u;
        }
    }
    return crafted;
}

namespace {

bool crafted_selected(const std::vector<Eigen::VectorXd>& benign,
                      const Eigen::VectorXd& crafted, int f, int subset_size) {
    std::vector<Eigen::VectorXd> all = benign;
    for (int j = 0; j < f; ++j) all.push_back(crafted);
    const int n = static_cast<int>(all.size());
    const int subset = subset_size > 0 ? subset_size : n - f;
    const Eigen::VectorXd pick = krum(all, subset);
    // Crafted copies are identical; selection is by value.
    return (pick - crafted).norm() == 0.0 &&
           std::none_of(benign.begin(), benign.end(),
                        [&](const Eigen::VectorXd& b) { return (b - crafted).norm() == 0.0; });
}

}  // namespace

std::vector<Eigen::VectorXd> krum_attack(const std::vector<Eigen::VectorXd>& benign, int f,
                                         int krum_subset_size, double lambda_max,
                                         int search_steps) {
    if (f == 0) return {};
    if (benign.size() < 2) throw ConfigError("krum attack needs at least 2 benign vectors");
    const auto d = benign[0].size();

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& v : benign) mean += v;
    mean /= static_cast<double>(benign.size());
    Eigen::VectorXd direction(d);
    for (Eigen::Index c = 0; c < d; ++c) direction(c) = mean(c) >= 0.0 ? 1.0 : -1.0;

    auto candidate = [&](double lambda) -> Eigen::VectorXd {
        return mean - lambda * direction;
    };

    // Find a feasible scale, then bisect toward the largest one.
    double feasible = -1.0;
    double infeasible = -1.0;
    if (crafted_selected(benign, candidate(lambda_max), f, krum_subset_size)) {
        feasible = lambda_max;
    } else {
        infeasible = lambda_max;
        double probe = lambda_max / 2.0;
        for (int i = 0; i < search_steps && feasible < 0.0; ++i, probe /= 2.0) {
            if (crafted_selected(benign, candidate(probe), f, krum_subset_size))
                feasible = probe;
            else
                infeasible = probe;
        }
        if (feasible >= 0.0) {
            for (int i = 0; i < search_steps; ++i) {
                const double mid = 0.5 * (feasible + infeasible);
                if (crafted_selected(benign, candidate(mid), f, krum_subset_size))
                    feasible = mid;
                else
                    infeasible = mid;
            }
        }
    }
    const double lambda = feasible >= 0.0 ? feasible : lambda_max / 2.0;
    return std::vector<Eigen::VectorXd>(f, candidate(lambda));
}

}  // namespace bdtd
