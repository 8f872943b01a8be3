#include "bdtd/features.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace bdtd {

using json = nlohmann::json;

FeatureMap::FeatureMap(Eigen::MatrixXd table) : table_(std::move(table)) {
    const int S = static_cast<int>(table_.rows());
    const int d = static_cast<int>(table_.cols());
    if (S <= 0 || d <= 0) throw ConfigError("feature table must be non-empty");
    for (int s = 0; s < S; ++s)
        if (table_.row(s).norm() > 1.0 + 1e-12)
            throw ConfigError("feature norm exceeds 1");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(table_);
    if (qr.rank() < d) throw ConfigError("feature matrix is rank-deficient");
    if (d == 1) {
        phi_min_ = std::numeric_limits<double>::infinity();
        for (int s = 0; s < S; ++s) phi_min_ = std::min(phi_min_, std::abs(table_(s, 0)));
    }
}

FeatureMap FeatureMap::constant_scalar(int state_count, double value) {
    return FeatureMap(Eigen::MatrixXd::Constant(state_count, 1, value));
}

FeatureMap FeatureMap::tabular(int state_count) {
    return FeatureMap(Eigen::MatrixXd::Identity(state_count, state_count));
}

FeatureMap FeatureMap::random_unit(int state_count, int dim, std::uint64_t seed) {
    if (state_count < dim) throw ConfigError("need at least dim states for full rank");
    for (int attempt = 0; attempt < 16; ++attempt) {
        Rng rng(substream(seed, 0x66656174, attempt));  // "feat"
        Eigen::MatrixXd table(state_count, dim);
        for (int s = 0; s < state_count; ++s) {
            for (int j = 0; j < dim; ++j) table(s, j) = rng.normal();
            table.row(s).normalize();
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(table);
        if (qr.rank() == dim) return FeatureMap(std::move(table));
    }
    throw std::runtime_error("failed to draw full-rank random features");
}

FeatureMap FeatureMap::random_scalar(int state_count, std::uint64_t seed, double lo, double hi) {
    if (lo <= 0.0 || hi > 1.0 || lo > hi) throw ConfigError("scalar range must be in (0, 1]");
    Rng rng(substream(seed, 0x73666561));  // "sfea"
    Eigen::MatrixXd table(state_count, 1);
    for (int s = 0; s < state_count; ++s) table(s, 0) = rng.uniform(lo, hi);
    return FeatureMap(std::move(table));
}

std::string FeatureMap::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["dim"] = dim();
    j["state_count"] = state_count();
    std::vector<double> flat(table_.data(), table_.data() + table_.size());
    j["table_colmajor"] = flat;
    return j.dump();
}

FeatureMap FeatureMap::from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("schema_version").get<int>() != 1)
        throw ConfigError("unsupported feature schema version");
    const int S = j.at("state_count").get<int>();
    const int d = j.at("dim").get<int>();
    auto flat = j.at("table_colmajor").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(S) * d)
        throw ConfigError("feature table size mismatch");
    Eigen::MatrixXd table = Eigen::Map<Eigen::MatrixXd>(flat.data(), S, d);
    return FeatureMap(std::move(table));
}

double td_error(double reward, const Eigen::VectorXd& w, const Eigen::VectorXd& phi_s,
                const Eigen::VectorXd& phi_next, double gamma) {
    if (w.size() != phi_s.size() || w.size() != phi_next.size())
        throw ConfigError("td_error dimension mismatch");
    return reward + gamma * phi_next.dot(w) - phi_s.dot(w);
}

double default_radius(double r_max, double phi_min, double gamma) {
    if (phi_min <= 0.0)
        throw ConfigError("projection radius undefined: phi_min must be positive");
    return 2.0 * r_max / (phi_min * std::pow(1.0 - gamma, 1.5));
}

Eigen::VectorXd project_ball(const Eigen::VectorXd& w, double radius, ProjectionMode mode) {
    if (radius <= 0.0) throw ConfigError("projection radius must be positive");
    if (mode == ProjectionMode::L2) {
        const double norm = w.norm();
        if (norm <= radius) return w;
        return w * (radius / norm);
    }
    return w.cwiseMax(-radius).cwiseMin(radius);
}

bool inside_ball(const Eigen::VectorXd& w, double radius, ProjectionMode mode) {
    if (!w.allFinite()) return false;
    if (mode == ProjectionMode::L2) return w.norm() <= radius + 1e-12;
    return w.cwiseAbs().maxCoeff() <= radius + 1e-12;
}

}  // namespace bdtd
