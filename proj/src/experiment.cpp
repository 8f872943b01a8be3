#include "bdtd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>
#include <omp.h>

namespace bdtd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(8) << std::setfill('0') << (h & 0xffffffffULL);
    return os.str();
}

fs::path fresh_run_dir(const std::string& out_root, const std::string& base_name) {
    fs::create_directories(out_root);
    fs::path dir = fs::path(out_root) / base_name;
    for (int k = 1; fs::exists(dir); ++k)
        dir = fs::path(out_root) / (base_name + "-" + std::to_string(k));
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

AggregationRule resolved_rule(const ExperimentConfig& config, double radius) {
    AggregationRule rule = config.rule;
    if (rule.kind == RuleKind::ScClip && rule.scclip_tau <= 0.0)
        rule.scclip_tau = radius / 10.0;
    return rule;
}

RunTrace run_one_seed(const ExperimentConfig& config, const NetworkedMdp& mdp,
                      const JointPolicy& policy, const FeatureMap& features, double radius,
                      std::uint64_t seed) {
    const RosterConfig roster = config.build_roster(features, seed);
    const RunOptions opts = config.build_options(radius, seed);
    return run_bdtd(mdp, policy, features, roster, resolved_rule(config, radius),
                    config.attack, config.schedule, opts);
}

void write_trace_csv(const fs::path& path, const RunTrace& trace, const FeatureMap& features) {
    std::ofstream out(path);
    out << std::setprecision(17);
    out << "round,agent";
    for (int c = 0; c < trace.dim; ++c) out << ",w" << c;
    out << ",delta,ce_contrib\n";
    const auto normals = trace.normal_agents();
    for (std::size_t k = 0; k < trace.rounds.size(); ++k) {
        const RoundRecord& rec = trace.rounds[k];
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(trace.dim);
        for (int i : normals) mean += rec.params[i];
        mean /= static_cast<double>(normals.size());
        for (int i : normals) {
            out << k << ',' << i;
            for (int c = 0; c < trace.dim; ++c) out << ',' << rec.params[i](c);
            out << ',' << rec.deltas[i] << ','
                << (rec.params[i] - mean).squaredNorm() / normals.size() << '\n';
        }
    }
    (void)features;
}

void write_metrics_csv(const fs::path& path, const MetricSeries& series) {
    std::ofstream out(path);
    out << std::setprecision(17);
    out << "round,sbe,msbe,ce\n";
    for (std::size_t k = 0; k < series.sbe.size(); ++k)
        out << k << ',' << series.sbe[k] << ',' << series.msbe[k] << ',' << series.ce[k]
            << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_root,
                                bool write_outputs, bool write_traces) {
    const NetworkedMdp mdp = config.build_mdp();
    const JointPolicy policy = JointPolicy::uniform(mdp);
    const FeatureMap features = config.build_features(mdp);
    const double radius = config.resolve_radius(mdp, features);

    const int S = static_cast<int>(config.seeds.size());
    std::vector<MetricSeries> all(S);
    std::vector<RunTrace> traces(write_traces ? S : 0);
#pragma omp parallel for schedule(dynamic) if (config.parallel)
    for (int i = 0; i < S; ++i) {
        ExperimentConfig per_seed = config;
        per_seed.parallel = false;  // seed-level parallelism only
        RunTrace trace =
            run_one_seed(per_seed, mdp, policy, features, radius, config.seeds[i]);
        all[i] = metric_series(trace, features);
        if (write_traces) traces[i] = std::move(trace);
    }

    ExperimentResult res;
    res.num_seeds = S;
    const std::size_t T = all[0].msbe.size();
    res.msbe_mean.assign(T, 0.0);
    res.ce_mean.assign(T, 0.0);
    for (const auto& series : all)
        for (std::size_t k = 0; k < T; ++k) {
            res.msbe_mean[k] += series.msbe[k] / S;
            res.ce_mean[k] += series.ce[k] / S;
        }
    res.final_msbe = res.msbe_mean.back();
    res.final_ce = res.ce_mean.back();

    if (write_outputs) {
        const std::string base = config.name + "-" + hash_hex(config.hash());
        const fs::path dir = fresh_run_dir(out_root, base);
        res.run_dir = dir.string();
        json manifest;
        manifest["schema_version"] = 1;
        manifest["config"] = json::parse(config.to_json_text());
        manifest["config_hash"] = config.hash();
        manifest["seeds"] = config.seeds;
        manifest["num_seeds"] = S;
        write_text(dir / "manifest.json", manifest.dump(2));
        for (int i = 0; i < S; ++i) {
            const std::string tag = "seed" + std::to_string(config.seeds[i]);
            write_metrics_csv(dir / ("metrics_" + tag + ".csv"), all[i]);
            if (write_traces)
                write_trace_csv(dir / ("trace_" + tag + ".csv"), traces[i], features);
        }
        std::ofstream avg(dir / "metrics_mean.csv");
        avg << std::setprecision(17) << "round,msbe_mean,ce_mean\n";
        for (std::size_t k = 0; k < T; ++k)
            avg << k << ',' << res.msbe_mean[k] << ',' << res.ce_mean[k] << '\n';
    }
    return res;
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& series) {
    const int W = 760, H = 480, ML = 70, MR = 160, MT = 40, MB = 50;
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                            "#9467bd", "#8c564b", "#555555"};
    double lo = 1e300, hi = -1e300;
    std::size_t len = 0;
    for (const auto& s : series)
        for (double v : s) {
            const double lv = std::log10(std::max(v, 1e-16));
            lo = std::min(lo, lv);
            hi = std::max(hi, lv);
        }
    for (const auto& s : series) len = std::max(len, s.size());
    if (hi <= lo) hi = lo + 1.0;

    std::ofstream out(path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";
    // axes
    out << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='"
        << H - MB << "' stroke='black'/>\n";
    out << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    for (int g = 0; g <= 4; ++g) {
        const double lv = lo + (hi - lo) * g / 4.0;
        const double y = (H - MB) - (H - MB - MT) * g / 4.0;
        out << "<text x='" << ML - 8 << "' y='" << y + 4
            << "' text-anchor='end' font-size='11'>1e" << std::fixed << std::setprecision(1)
            << lv << "</text>\n";
    }
    out << "<text x='" << (ML + W - MR) / 2 << "' y='" << H - 14
        << "' text-anchor='middle' font-size='12'>round</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        out << "<polyline fill='none' stroke='" << colors[s % 7] << "' stroke-width='1.5' points='";
        for (std::size_t k = 0; k < series[s].size(); ++k) {
            const double x =
                ML + (W - MR - ML) * (len > 1 ? static_cast<double>(k) / (len - 1) : 0.0);
            const double lv = std::log10(std::max(series[s][k], 1e-16));
            const double y = (H - MB) - (H - MB - MT) * (lv - lo) / (hi - lo);
            out << x << ',' << y << ' ';
        }
        out << "'/>\n";
        out << "<text x='" << W - MR + 10 << "' y='" << MT + 16 * (s + 1) << "' fill='"
            << colors[s % 7] << "' font-size='12'>" << names[s] << "</text>\n";
    }
    out << "</svg>\n";
}

MatrixResult run_matrix(const ExperimentConfig& base, const std::vector<std::string>& methods,
                        const std::vector<std::string>& attacks, const std::string& out_root) {
    MatrixResult result;
    const fs::path dir = fresh_run_dir(out_root, base.name + "-matrix");
    result.out_dir = dir.string();

    // Reference: fedavg with no Byzantine agents.
    ExperimentConfig ref = base;
    ref.name = base.name + "-reference";
    ref.rule = AggregationRule{.kind = RuleKind::FedAvg};
    ref.attack = AttackModel{};
    ref.byzantine.clear();
    const ExperimentResult ref_run = run_experiment(ref, dir.string(), true, false);
    result.reference = {ref_run.final_msbe, ref_run.final_ce};

    for (const auto& attack_name : attacks) {
        std::vector<std::string> names;
        std::vector<std::vector<double>> msbe_lines, ce_lines;
        for (const auto& method : methods) {
            ExperimentConfig cfg = base;
            cfg.name = base.name + "-" + method + "-" + attack_name;
            cfg.rule.kind = rule_kind_from_string(method);
            cfg.attack = base.attack;
            cfg.attack.kind = attack_kind_from_string(attack_name);
            const ExperimentResult run = run_experiment(cfg, dir.string(), true, false);
            result.results[attack_name][method] = {run.final_msbe, run.final_ce};
            names.push_back(method);
            msbe_lines.push_back(run.msbe_mean);
            ce_lines.push_back(run.ce_mean);
        }
        names.push_back("fedavg w/o attack");
        msbe_lines.push_back(ref_run.msbe_mean);
        ce_lines.push_back(ref_run.ce_mean);

        for (const auto& [metric, lines] :
             {std::pair{std::string("msbe"), &msbe_lines}, {std::string("ce"), &ce_lines}}) {
            const std::string stem = metric + "_" + attack_name;
            std::ofstream csv(dir / (stem + ".csv"));
            csv << std::setprecision(17) << "round";
            for (const auto& nm : names) csv << ',' << nm;
            csv << '\n';
            for (std::size_t k = 0; k < (*lines)[0].size(); ++k) {
                csv << k;
                for (const auto& line : *lines) csv << ',' << line[k];
                csv << '\n';
            }
            write_svg_chart((dir / (stem + ".svg")).string(),
                            metric + " under " + attack_name + " attack", names, *lines);
        }
    }
    return result;
}

ExperimentConfig default_figure_config() {
    ExperimentConfig c;
    c.name = "grid-spread";
    c.env_type = "grid_spread";
    c.grid_size = 2;
    c.num_agents = 4;
    c.num_landmarks = 2;
    c.collision_penalty = -0.1;
    // Per-agent reward offsets keep the honest parameters spread out enough
    // that value-poisoning attacks scaled to the honest spread have teeth.
    c.shaping_scale = 0.2;
    c.discount = 0.8;
    c.env_seed = 7;
    c.f = 1;
    c.byzantine = {3};
    c.rule = AggregationRule{.kind = RuleKind::TrimmedMean, .trim_f = 1};
    c.attack.kind = AttackKind::TrimAttack;
    c.feature_mode = "tabular";
    c.feature_seed = 11;
    c.schedule = StepSchedule{StepSizeKind::Constant, 0.1};
    c.radius = 2000.0;
    c.projection = "coordinate";
    c.horizon = 10000;
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    c.parallel = true;
    return c;
}

namespace {

VerifyReport verify_hull(std::uint64_t seed, bool parallel) {
    const long trials = 100000;
    long violations = 0;
    const int sizes[] = {7, 10, 13};
#pragma omp parallel for schedule(static) reduction(+ : violations) if (parallel)
    for (long t = 0; t < trials; ++t) {
        Rng rng(substream(seed, 0x68756c6c, t));  // "hull"
        const int n = sizes[static_cast<int>(rng.uniform() * 3) % 3];
        const int f = (n - 1) / 3;
        std::vector<double> values;
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < n - f; ++i) {
            const double v = rng.uniform(-1e3, 1e3);
            values.push_back(v);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (int i = 0; i < f; ++i) values.push_back(rng.uniform(-1e9, 1e9));
        const double out = trimmed_mean(values, f, rng);
        if (out < lo - 1e-9 || out > hi + 1e-9) ++violations;
    }
    return {"hull", trials, violations, violations == 0,
            "trimmed-mean output within honest [min, max]"};
}

VerifyReport verify_contraction(std::uint64_t seed, bool parallel) {
    const long trials = 100000;
    long violations = 0;
#pragma omp parallel for schedule(static) reduction(+ : violations) if (parallel)
    for (long t = 0; t < trials; ++t) {
        Rng rng(substream(seed, 0x636f6e74, t));  // "cont"
        const int m = 2 + static_cast<int>(rng.uniform() * 11);
        const double radius = rng.uniform(0.1, 5.0);
        Eigen::VectorXd w(m), p(m);
        for (int i = 0; i < m; ++i) w(i) = rng.uniform(-3.0 * radius, 3.0 * radius);
        for (int i = 0; i < m; ++i) p(i) = std::clamp(w(i), -radius, radius);
        const auto dev = [](const Eigen::VectorXd& v) {
            return (v.array() - v.mean()).matrix().norm();
        };
        if (dev(p) > dev(w) + 1e-12) ++violations;
    }
    return {"contraction", trials, violations, violations == 0,
            "coordinate clamp never increases consensus deviation"};
}

VerifyReport verify_product_bound_suite(std::uint64_t seed, bool parallel) {
    const long trials = 10000;
    long violations = 0;
#pragma omp parallel for schedule(static) reduction(+ : violations) if (parallel)
    for (long t = 0; t < trials; ++t) {
        Rng rng(substream(seed, 0x70726f64, t));  // "prod"
        const int size = 2 + static_cast<int>(rng.uniform() * 5);
        const int m = 1 + static_cast<int>(rng.uniform() * 8);
        std::vector<Eigen::MatrixXd> mats;
        for (int i = 0; i < m; ++i) {
            Eigen::MatrixXd X(size, size);
            for (int r = 0; r < size; ++r) {
                double sum = 0.0;
                for (int c = 0; c < size; ++c) {
                    X(r, c) = -std::log(1.0 - rng.uniform()) + 1e-9;
                    sum += X(r, c);
                }
                X.row(r) /= sum;
            }
            mats.push_back(std::move(X));
        }
        const ProductBoundReport rep = verify_product_bound(mats, 1e-10);
        if (!rep.pass || !rep.norm_pass) ++violations;
    }
    return {"product_bound", trials, violations, violations == 0,
            "delta(product) <= prod lambda and ||X - 1 x_bar|| <= n delta(X)"};
}

VerifyReport verify_impossibility(std::uint64_t seed, bool) {
    std::ostringstream details;
    long violations = 0;
    long trials = 0;
    for (int n : {4, 7, 10}) {
        ++trials;
        const NetworkedMdp base = make_random_mdp(4, n, 1, substream(seed, 0x7468316d, n));
        const JointPolicy policy = JointPolicy::uniform(base);
        const FeatureMap phi = FeatureMap::constant_scalar(4, 1.0);
        const Theorem1Report rep = impossibility_theorem1(n, phi, base, policy, seed);
        const double w1_expected = (n * (n + 1.0) - 2.0) / (2.0 * (n - 1.0));
        const double w2_expected = n / 2.0;
        const bool ok = rep.gap_ok && rep.traces_match &&
                        std::abs(rep.w1(0) - w1_expected) <= 1e-10 &&
                        std::abs(rep.w2(0) - w2_expected) <= 1e-10;
        if (!ok) ++violations;
        details << "theorem1 n=" << n << ": w1=" << rep.w1(0) << " w2=" << rep.w2(0)
                << " gap=" << rep.gap(0) << (ok ? " ok" : " VIOLATION") << "; ";
    }
    for (auto [n, f, q] : {std::tuple{7, 2, 2}, {10, 3, 3}, {4, 1, 1}}) {
        ++trials;
        const Theorem2Report rep = impossibility_theorem2(n, f, q);
        if (!rep.pass) ++violations;
        details << "theorem2 (" << n << ',' << f << ',' << q
                << "): support=" << rep.max_positive_support
                << (rep.pass ? " ok" : " VIOLATION") << "; ";
    }
    return {"impossibility", trials, violations, violations == 0, details.str()};
}

VerifyReport verify_oracle(std::uint64_t seed, bool) {
    std::ostringstream details;
    long violations = 0;

    // Tabular features reproduce the exact value function via the linear solve.
    const NetworkedMdp mdp = make_random_mdp(3, 1, 2, substream(seed, 0x6f72636c), 1.0, 0.5);
    const JointPolicy policy = JointPolicy::uniform(mdp);
    const std::vector<double> alpha = {1.0};
    const Eigen::VectorXd v_exact = exact_value_function(mdp, policy, alpha);
    const Eigen::VectorXd v_lstd =
        lstd_fixed_point(mdp, policy, FeatureMap::tabular(3), alpha);
    const double tab_err = (v_exact - v_lstd).cwiseAbs().maxCoeff();
    if (tab_err > 1e-6) ++violations;
    details << "tabular lstd vs exact: " << tab_err << "; ";

    // Single-agent TD(0) with harmonic steps approaches the lstd fixed point.
    const FeatureMap phi = FeatureMap::random_scalar(3, seed, 0.9, 1.0);
    const Eigen::VectorXd w_star = lstd_fixed_point(mdp, policy, phi, alpha);
    double w_avg = 0.0;
    const int num_seeds = 5;
    for (int s = 0; s < num_seeds; ++s) {
        RosterConfig roster;
        roster.n = 1;
        roster.f = 0;
        roster.init_params = {Eigen::VectorXd::Zero(1)};
        RunOptions opts;
        opts.horizon = 100000;
        opts.radius = default_radius(mdp.r_max(), phi.phi_min(), mdp.discount());
        opts.seed = substream(seed, 0x74643073, s);  // "td0s"
        opts.record_rounds = false;
        AggregationRule rule{.kind = RuleKind::FedAvg};
        const RunTrace trace = run_bdtd(mdp, policy, phi, roster, rule, AttackModel{},
                                        StepSchedule{StepSizeKind::Harmonic, 4.0}, opts);
        w_avg += trace.final_params[0](0) / num_seeds;
    }
    const double td_err = std::abs(w_avg - w_star(0));
    if (td_err > 1e-2) ++violations;
    details << "td(0) limit vs lstd: " << td_err;
    return {"oracle", 2, violations, violations == 0, details.str()};
}

}  // namespace

VerifyReport verify_suite(const std::string& name, std::uint64_t seed, bool parallel) {
    if (name == "hull") return verify_hull(seed, parallel);
    if (name == "contraction") return verify_contraction(seed, parallel);
    if (name == "product_bound") return verify_product_bound_suite(seed, parallel);
    if (name == "impossibility") return verify_impossibility(seed, parallel);
    if (name == "oracle") return verify_oracle(seed, parallel);
    throw ConfigError("unknown verify suite: " + name);
}

}  // namespace bdtd
