#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bdtd/rng.hpp"

namespace bdtd {

enum class AttackKind { None, Gaussian, KrumAttack, TrimAttack, FixedValue };

AttackKind attack_kind_from_string(const std::string& name);
std::string to_string(AttackKind kind);

struct AttackModel {
    AttackKind kind = AttackKind::None;
    bool broadcast = false;  // same crafted value to every neighbor in a round
    double fixed_value = 0.0;
    double trim_band_sigma = 4.0;
    double krum_lambda_max = 0.0;  // 0: derived as 10 * R by the protocol
    int krum_search_steps = 30;
    int krum_subset_size = -1;  // the deployed Krum's subset, -1: n - f
};

Eigen::VectorXd gaussian_attack(Rng& rng, int dim);

/// Craft f vectors placed per coordinate just outside the benign range on the
/// side opposite the benign mean's sign, within a band of width
/// band_sigma * std (std defaults to 1 when the benign values agree).
std::vector<Eigen::VectorXd> trim_attack(const std::vector<Eigen::VectorXd>& benign, int f,
                                         Rng& rng, double band_sigma = 4.0);

/// Craft f identical vectors w_base - lambda * sign(mean) with lambda found by
/// bisection as the largest scale for which the deployed Krum rule still
/// selects a crafted vector.
std::vector<Eigen::VectorXd> krum_attack(const std::vector<Eigen::VectorXd>& benign, int f,
                                         int krum_subset_size, double lambda_max,
                                         int search_steps = 30);

}  // namespace bdtd
