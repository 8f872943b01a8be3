#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "bdtd/mdp.hpp"

namespace bdtd {

/// Per-state feature table phi(s) in R^d with ||phi(s)|| <= 1 and a
/// full-rank feature matrix, both checked at construction.
class FeatureMap {
  public:
    explicit FeatureMap(Eigen::MatrixXd table);

    static FeatureMap constant_scalar(int state_count, double value);
    static FeatureMap tabular(int state_count);
    static FeatureMap random_unit(int state_count, int dim, std::uint64_t seed);
    // Scalar features uniform in [lo, hi]; keeps phi_min bounded away from 0.
    static FeatureMap random_scalar(int state_count, std::uint64_t seed, double lo = 0.5,
                                    double hi = 1.0);

    int dim() const { return static_cast<int>(table_.cols()); }
    int state_count() const { return static_cast<int>(table_.rows()); }
    Eigen::VectorXd row(int state) const { return table_.row(state).transpose(); }
    const Eigen::MatrixXd& table() const { return table_; }

    bool scalar_mode() const { return dim() == 1; }
    // min_s |phi(s)|; only meaningful in scalar mode.
    double phi_min() const { return phi_min_; }

    std::string to_json() const;
    static FeatureMap from_json(const std::string& text);

  private:
    Eigen::MatrixXd table_;
    double phi_min_ = 0.0;
};

double td_error(double reward, const Eigen::VectorXd& w, const Eigen::VectorXd& phi_s,
                const Eigen::VectorXd& phi_next, double gamma);

/// R = 2 r_max / (phi_min (1-gamma)^{3/2}); scalar mode only.
double default_radius(double r_max, double phi_min, double gamma);

enum class ProjectionMode { L2, Coordinate };

Eigen::VectorXd project_ball(const Eigen::VectorXd& w, double radius, ProjectionMode mode);

bool inside_ball(const Eigen::VectorXd& w, double radius, ProjectionMode mode);

}  // namespace bdtd
