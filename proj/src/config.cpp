#include "bdtd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bdtd {

using json = nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key))
            throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    check_keys(j, {"schema_version", "name", "environment", "roster", "rule", "attack",
                   "features", "step_size", "radius", "projection", "horizon",
                   "initial_state", "seeds", "parallel"},
               "config");
    if (get_or<int>(j, "schema_version", -1) != 1)
        throw ConfigError("config schema_version must be 1");

    ExperimentConfig c;
    c.name = get_or<std::string>(j, "name", "experiment");

    const json& env = j.at("environment");
    c.env_type = env.at("type").get<std::string>();
    if (c.env_type == "random_mdp") {
        check_keys(env, {"type", "state_count", "num_agents", "actions_per_agent", "seed",
                         "r_max", "discount"},
                   "environment");
        c.state_count = env.at("state_count").get<int>();
        c.num_agents = env.at("num_agents").get<int>();
        c.actions_per_agent = get_or<int>(env, "actions_per_agent", 2);
        c.r_max = get_or<double>(env, "r_max", 1.0);
    } else if (c.env_type == "grid_spread") {
        check_keys(env, {"type", "grid_size", "num_agents", "num_landmarks",
                         "collision_penalty", "shaping_scale", "seed", "discount"},
                   "environment");
        c.grid_size = env.at("grid_size").get<int>();
        c.num_agents = env.at("num_agents").get<int>();
        c.num_landmarks = env.at("num_landmarks").get<int>();
        c.collision_penalty = get_or<double>(env, "collision_penalty", -0.1);
        c.shaping_scale = get_or<double>(env, "shaping_scale", 0.02);
    } else {
        throw ConfigError("unknown environment type: " + c.env_type);
    }
    c.discount = get_or<double>(env, "discount", 0.9);
    c.env_seed = get_or<std::uint64_t>(env, "seed", 0);

    const json& roster = j.at("roster");
    check_keys(roster, {"f", "byzantine", "include_self", "init_scale"}, "roster");
    c.f = roster.at("f").get<int>();
    c.byzantine = get_or<std::vector<int>>(roster, "byzantine", {});
    c.include_self = get_or<bool>(roster, "include_self", true);
    c.init_scale = get_or<double>(roster, "init_scale", 0.0);
    if (c.num_agents < 3 * c.f + 1) throw ConfigError("config violates n >= 3f+1");
    if (static_cast<int>(c.byzantine.size()) > c.f)
        throw ConfigError("byzantine set larger than f");

    const json& rule = j.at("rule");
    check_keys(rule, {"kind", "f", "krum_subset_size", "scclip_tau", "fedavg_weights"}, "rule");
    c.rule.kind = rule_kind_from_string(rule.at("kind").get<std::string>());
    c.rule.trim_f = get_or<int>(rule, "f", c.f);
    c.rule.krum_subset_size = get_or<int>(rule, "krum_subset_size", -1);
    c.rule.scclip_tau = get_or<double>(rule, "scclip_tau", 0.0);
    c.rule.fedavg_weights = get_or<std::vector<double>>(rule, "fedavg_weights", {});

    const json& attack = j.at("attack");
    check_keys(attack, {"kind", "broadcast", "fixed_value", "trim_band_sigma",
                        "krum_lambda_max", "krum_search_steps", "krum_subset_size"},
               "attack");
    c.attack.kind = attack_kind_from_string(attack.at("kind").get<std::string>());
    c.attack.broadcast = get_or<bool>(attack, "broadcast", false);
    c.attack.fixed_value = get_or<double>(attack, "fixed_value", 0.0);
    c.attack.trim_band_sigma = get_or<double>(attack, "trim_band_sigma", 4.0);
    c.attack.krum_lambda_max = get_or<double>(attack, "krum_lambda_max", 0.0);
    c.attack.krum_search_steps = get_or<int>(attack, "krum_search_steps", 30);
    c.attack.krum_subset_size = get_or<int>(attack, "krum_subset_size", -1);

    const json& feat = j.at("features");
    check_keys(feat, {"mode", "dim", "seed"}, "features");
    c.feature_mode = feat.at("mode").get<std::string>();
    c.feature_dim = get_or<int>(feat, "dim", 1);
    c.feature_seed = get_or<std::uint64_t>(feat, "seed", 0);
    if (c.feature_mode != "scalar" && c.feature_mode != "random" && c.feature_mode != "tabular")
        throw ConfigError("unknown feature mode: " + c.feature_mode);

    const json& step = j.at("step_size");
    check_keys(step, {"kind", "eta0"}, "step_size");
    const std::string sk = step.at("kind").get<std::string>();
    if (sk == "harmonic")
        c.schedule.kind = StepSizeKind::Harmonic;
    else if (sk == "constant")
        c.schedule.kind = StepSizeKind::Constant;
    else
        throw ConfigError("unknown step_size kind: " + sk);
    c.schedule.eta0 = get_or<double>(step, "eta0", 1.0);

    if (j.contains("radius")) {
        if (j["radius"].is_string()) {
            if (j["radius"].get<std::string>() != "auto")
                throw ConfigError("radius must be a number or \"auto\"");
            c.radius = 0.0;
        } else {
            c.radius = j["radius"].get<double>();
        }
    }
    c.projection = get_or<std::string>(j, "projection", "coordinate");
    if (c.projection != "coordinate" && c.projection != "l2" && c.projection != "none")
        throw ConfigError("unknown projection mode: " + c.projection);

    c.horizon = j.at("horizon").get<long>();
    if (c.horizon < 1) throw ConfigError("horizon must be >= 1");
    c.initial_state = get_or<int>(j, "initial_state", 0);
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) throw ConfigError("at least one seed required");
    c.parallel = get_or<bool>(j, "parallel", false);
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["schema_version"] = 1;
    j["name"] = name;
    json env;
    env["type"] = env_type;
    env["seed"] = env_seed;
    env["discount"] = discount;
    if (env_type == "random_mdp") {
        env["state_count"] = state_count;
        env["num_agents"] = num_agents;
        env["actions_per_agent"] = actions_per_agent;
        env["r_max"] = r_max;
    } else {
        env["grid_size"] = grid_size;
        env["num_agents"] = num_agents;
        env["num_landmarks"] = num_landmarks;
        env["collision_penalty"] = collision_penalty;
        env["shaping_scale"] = shaping_scale;
    }
    j["environment"] = env;
    j["roster"] = {{"f", f},
                   {"byzantine", byzantine},
                   {"include_self", include_self},
                   {"init_scale", init_scale}};
    j["rule"] = {{"kind", to_string(rule.kind)},
                 {"f", rule.trim_f},
                 {"krum_subset_size", rule.krum_subset_size},
                 {"scclip_tau", rule.scclip_tau},
                 {"fedavg_weights", rule.fedavg_weights}};
    j["attack"] = {{"kind", to_string(attack.kind)},
                   {"broadcast", attack.broadcast},
                   {"fixed_value", attack.fixed_value},
                   {"trim_band_sigma", attack.trim_band_sigma},
                   {"krum_lambda_max", attack.krum_lambda_max},
                   {"krum_search_steps", attack.krum_search_steps},
                   {"krum_subset_size", attack.krum_subset_size}};
    j["features"] = {{"mode", feature_mode}, {"dim", feature_dim}, {"seed", feature_seed}};
    j["step_size"] = {{"kind", schedule.kind == StepSizeKind::Harmonic ? "harmonic" : "constant"},
                      {"eta0", schedule.eta0}};
    if (radius > 0.0)
        j["radius"] = radius;
    else
        j["radius"] = "auto";
    j["projection"] = projection;
    j["horizon"] = horizon;
    j["initial_state"] = initial_state;
    j["seeds"] = seeds;
    j["parallel"] = parallel;
    return j.dump(2);
}

std::uint64_t ExperimentConfig::hash() const {
    // nlohmann::json keeps object keys sorted, so dump() is canonical.
    const std::string canonical = json::parse(to_json_text()).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

NetworkedMdp ExperimentConfig::build_mdp() const {
    if (env_type == "random_mdp")
        return make_random_mdp(state_count, num_agents, actions_per_agent, env_seed, r_max,
                               discount);
    GridSpreadOptions opts;
    opts.shaping_scale = shaping_scale;
    opts.discount = discount;
    return make_grid_spread_env(grid_size, num_agents, num_landmarks, collision_penalty,
                                env_seed, opts);
}

FeatureMap ExperimentConfig::build_features(const NetworkedMdp& mdp) const {
    if (feature_mode == "scalar") return FeatureMap::random_scalar(mdp.state_count(), feature_seed);
    if (feature_mode == "tabular") return FeatureMap::tabular(mdp.state_count());
    return FeatureMap::random_unit(mdp.state_count(), feature_dim, feature_seed);
}

double ExperimentConfig::resolve_radius(const NetworkedMdp& mdp,
                                        const FeatureMap& features) const {
    if (radius > 0.0) return radius;
    if (!features.scalar_mode())
        throw ConfigError("radius \"auto\" requires scalar features");
    return default_radius(mdp.r_max(), features.phi_min(), mdp.discount());
}

RosterConfig ExperimentConfig::build_roster(const FeatureMap& features,
                                            std::uint64_t seed) const {
    RosterConfig r;
    r.n = num_agents;
    r.f = f;
    r.byzantine = byzantine;
    r.include_self = include_self;
    r.init_params.assign(num_agents, Eigen::VectorXd::Zero(features.dim()));
    if (init_scale > 0.0) {
        Rng rng(substream(seed, 0x696e6974));  // "init"
        for (auto& w : r.init_params)
            for (Eigen::Index c = 0; c < w.size(); ++c)
                w(c) = rng.uniform(-init_scale, init_scale);
    }
    return r;
}

RunOptions ExperimentConfig::build_options(double resolved_radius, std::uint64_t seed) const {
    RunOptions o;
    o.horizon = horizon;
    o.radius = resolved_radius;
    o.projection_mode = projection == "l2" ? ProjectionMode::L2 : ProjectionMode::Coordinate;
    o.apply_projection = projection != "none";
    o.seed = seed;
    o.parallel = parallel;
    o.initial_state = initial_state;
    return o;
}

}  // namespace bdtd
