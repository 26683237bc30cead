// Batch front-end: parses configs, dispatches the experiments, emits the
// CSV/JSON artifacts, and runs the validation suites.
//
// Exit codes: 0 success, 1 an asserted inequality or tolerance failed,
// 2 usage or configuration error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrs/dp.hpp"
#include "qrs/experiments.hpp"
#include "qrs/io.hpp"
#include "qrs/oracle.hpp"

namespace fs = std::filesystem;
using namespace qrs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationFailure = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int paths = -1;
    int steps = -1;
    double lambda2 = -1.0;
    double mu1 = -1.0;
    double mu2 = -1.0;
    double beta = -1.0;
    bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "master seed")->each([&](const std::string&) {
        args.has_seed = true;
    });
    cmd->add_option("--paths", args.paths, "number of sample paths");
    cmd->add_option("--steps", args.steps, "steps per trajectory");
    cmd->add_option("--lambda2", args.lambda2, "time-slice length");
    cmd->add_option("--mu1", args.mu1, "running-cost weight");
    cmd->add_option("--mu2", args.mu2, "terminal weight");
    cmd->add_option("--beta", args.beta, "uncertainty magnitude for the beta family");
}

Matrix2 observable_by_name(const std::string& name) {
    if (name == "sigma_z") return sigma_z();
    if (name == "sigma_y") return sigma_y();
    if (name == "sigma_x") return sigma_x();
    throw InvalidInputError("config: unknown observable '" + name + "'");
}

// Flags override config-file values, which override the per-figure defaults.
ExperimentConfig resolve_config(const ExperimentConfig& defaults, const CommonArgs& args) {
    ExperimentConfig cfg = defaults;
    if (!args.config_path.empty()) {
        json j = load_json_file(args.config_path);
        if (j.contains("lambda2")) cfg.lambda2 = j["lambda2"].get<double>();
        if (j.contains("steps")) cfg.steps = j["steps"].get<int>();
        if (j.contains("paths")) cfg.paths = j["paths"].get<int>();
        if (j.contains("mu1")) cfg.risk.mu1 = j["mu1"].get<double>();
        if (j.contains("mu2")) cfg.risk.mu2 = j["mu2"].get<double>();
        if (j.contains("seed")) cfg.master_seed = j["seed"].get<std::uint64_t>();
        if (j.contains("model")) {
            const std::string kind = j["model"].get<std::string>();
            cfg.kind = kind == "dispersive"    ? ModelKind::dispersive
                       : kind == "spontaneous" ? ModelKind::spontaneous
                                               : ModelKind::custom;
            cfg.model = model_from_json(j, cfg.lambda2);
            cfg.x_e = cfg.kind == ModelKind::spontaneous ? sigma_y() : sigma_z();
        }
        if (j.contains("observable"))
            cfg.x_e = observable_by_name(j["observable"].get<std::string>());
    }
    if (args.lambda2 > 0.0 && args.lambda2 != cfg.lambda2) {
        cfg.lambda2 = args.lambda2;
        // rebuild the ensemble at the new slice length
        if (cfg.kind != ModelKind::custom) {
            cfg.model.ensemble =
                make_ensemble(cfg.kind, cfg.model.ensemble.values, std::sqrt(cfg.lambda2));
        } else {
            throw InvalidInputError("--lambda2 cannot rebuild a custom model; edit the config");
        }
    }
    if (args.steps >= 0) cfg.steps = args.steps;
    if (args.paths >= 0) cfg.paths = args.paths;
    if (args.mu1 >= 0.0) cfg.risk.mu1 = args.mu1;
    if (args.mu2 >= 0.0) cfg.risk.mu2 = args.mu2;
    if (args.has_seed) cfg.master_seed = args.seed;
    cfg.out_dir = args.out_dir;
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    return cfg;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::vector<double> collect(const std::vector<ErrorMetrics>& ms, bool rs) {
    std::vector<double> v;
    v.reserve(ms.size());
    for (const auto& m : ms) v.push_back(rs ? m.delta_rs : m.delta_rn);
    return v;
}

int run_error_histogram_experiment(const std::string& verb, const ExperimentConfig& cfg) {
    std::vector<ErrorMetrics> ms = run_paths(cfg);
    std::vector<double> rn = collect(ms, false);
    std::vector<double> rs = collect(ms, true);

    write_metrics_csv(join_path(cfg.out_dir, verb + "_metrics.csv"), ms);
    write_histogram_csv(join_path(cfg.out_dir, verb + "_histogram.csv"), histogram(rn),
                        histogram(rs));

    std::vector<double> diff(ms.size());
    for (std::size_t k = 0; k < ms.size(); ++k) diff[k] = rn[k] - rs[k];
    PairedTest test = paired_one_sided_test(diff);

    write_manifest(join_path(cfg.out_dir, verb + "_manifest.json"), verb, cfg,
                   json{{"mean_delta_rn", mean(rn)},
                        {"mean_delta_rs", mean(rs)},
                        {"paired_t", test.t},
                        {"t_critical_5pct", test.critical}});

    std::cout << verb << ": mean_delta_rn=" << mean(rn) << " mean_delta_rs=" << mean(rs)
              << " paired_t=" << test.t << " critical=" << test.critical
              << (test.significant ? " PASS" : " FAIL") << "\n";
    return test.significant ? kExitOk : kExitValidationFailure;
}

int cmd_simulate(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(default_fig1_config(), args);

    TripleOptions opts;
    opts.want_series = true;
    TripleResult first = run_trajectory_triple(cfg, path_seed(cfg.master_seed, 0), opts);
    write_trajectory_csv(join_path(cfg.out_dir, "trajectory.csv"), first);

    std::vector<ErrorMetrics> ms = run_paths(cfg);
    write_metrics_csv(join_path(cfg.out_dir, "metrics.csv"), ms);
    std::vector<double> rn = collect(ms, false);
    std::vector<double> rs = collect(ms, true);
    write_manifest(join_path(cfg.out_dir, "manifest.json"), "simulate", cfg,
                   json{{"mean_delta_rn", mean(rn)}, {"mean_delta_rs", mean(rs)}});
    std::cout << "simulate: paths=" << cfg.paths << " mean_delta_rn=" << mean(rn)
              << " mean_delta_rs=" << mean(rs) << "\n";
    return kExitOk;
}

int cmd_fig2a(const CommonArgs& args) {
    ExperimentConfig defaults = default_fig1_config();
    defaults.risk = RiskParams{0.01, 0.05};
    defaults.paths = 100;
    ExperimentConfig cfg = resolve_config(defaults, args);

    std::vector<double> betas;
    if (args.beta >= 0.0) {
        betas.push_back(args.beta);
    } else {
        for (int k = 0; k <= 10; ++k) betas.push_back(0.1 * k);
    }
    std::vector<BetaSweepRow> rows = beta_sweep(cfg, betas);
    write_beta_csv(join_path(cfg.out_dir, "fig2a_beta_sweep.csv"), rows);
    write_manifest(join_path(cfg.out_dir, "fig2a_manifest.json"), "fig2a", cfg,
                   json{{"betas", betas}});

    const BetaSweepRow& last = rows.back();
    std::cout << "fig2a: beta=" << last.beta << " mean_rn=" << last.mean_rn
              << " mean_rs=" << last.mean_rs << "\n";
    if (last.beta == 1.0 && !(last.mean_rs < last.mean_rn)) return kExitValidationFailure;
    return kExitOk;
}

int cmd_fig2b(const CommonArgs& args) {
    ExperimentConfig defaults = default_fig1_config();
    defaults.paths = 20;
    ExperimentConfig cfg = resolve_config(defaults, args);

    long steps_total = 0;
    long steps_bounded = 0;
    double sum_eps = 0.0;
    double sum_eps_prime = 0.0;
    for (int k = 0; k < cfg.paths; ++k) {
        TripleResult r = bound_trace(cfg, path_seed(cfg.master_seed, k));
        char name[64];
        std::snprintf(name, sizeof(name), "fig2b_trace_%03d.csv", k);
        write_trace_csv(join_path(cfg.out_dir, name), r);
        for (std::size_t l = 0; l < r.metrics.eps_series.size(); ++l) {
            steps_total += 1;
            if (r.metrics.eps_series[l] <= r.metrics.eps_prime_series[l]) steps_bounded += 1;
            sum_eps += r.metrics.eps_series[l];
            if (std::isfinite(r.metrics.eps_prime_series[l]))
                sum_eps_prime += r.metrics.eps_prime_series[l];
        }
    }
    const double fraction = static_cast<double>(steps_bounded) / steps_total;
    const double ratio = sum_eps_prime / std::max(sum_eps, 1e-300);
    write_manifest(join_path(cfg.out_dir, "fig2b_manifest.json"), "fig2b", cfg,
                   json{{"fraction_bounded", fraction}, {"mean_bound_ratio", ratio}});
    std::cout << "fig2b: fraction_bounded=" << fraction << " mean_bound_ratio=" << ratio
              << "\n";
    return (fraction == 1.0 && ratio > 1.0) ? kExitOk : kExitValidationFailure;
}

int cmd_fig2c(const CommonArgs& args) {
    ExperimentConfig defaults = default_fig1_config();
    ExperimentConfig cfg = resolve_config(defaults, args);

    Mu1Comparison cmp = mu1_comparison(cfg);
    write_mu1_csv(join_path(cfg.out_dir, "fig2c_mean_eps.csv"), cmp);

    const double avg_a = mean(cmp.mean_eps_a);
    const double avg_b = mean(cmp.mean_eps_b);
    write_manifest(join_path(cfg.out_dir, "fig2c_manifest.json"), "fig2c", cfg,
                   json{{"time_avg_eps_mu_a", avg_a},
                        {"time_avg_eps_mu_b", avg_b},
                        {"mu_a", {cmp.mu_a.mu1, cmp.mu_a.mu2}},
                        {"mu_b", {cmp.mu_b.mu1, cmp.mu_b.mu2}}});
    std::cout << "fig2c: time_avg_eps(mu1=0)=" << avg_a << " time_avg_eps(mu1>0)=" << avg_b
              << "\n";
    return avg_b < avg_a ? kExitOk : kExitValidationFailure;
}

int cmd_dp_validate(const CommonArgs& args) {
    ExperimentConfig defaults = default_fig1_config();
    defaults.steps = 6;
    ExperimentConfig cfg = resolve_config(defaults, args);
    const int n = std::min(cfg.steps, 6);

    ParameterEnsemble ens = make_ensemble(ModelKind::dispersive, {0.7}, std::sqrt(cfg.lambda2));
    BlockDensityMatrix rho0 =
        block_density({1.0}, (Matrix2() << 0.5, 0.25, 0.25, 0.5).finished());
    const Observable obs(sigma_z());

    PolicyTable sub = build_suboptimal_policy_table(ens, rho0, n, cfg.risk, obs);
    PolicyTable rn = build_risk_neutral_policy_table(ens, rho0, n, obs);

    DpOptions options;
    options.extra_action_tables = {&sub, &rn};
    options.refine_terminal = true;
    std::vector<double> grid;
    for (int k = 0; k <= 8; ++k) grid.push_back(-2.0 + 0.5 * k);
    DpResult dp = dp_solve(ens, rho0, n, cfg.risk, obs, grid, options);

    EnsembleOracle oracle(ens, n);
    const double cost_sub = oracle.risk_cost(rho0, sub, cfg.risk, obs);
    const double cost_rn = oracle.risk_cost(rho0, rn, cfg.risk, obs);
    const double cost_dp = oracle.risk_cost(rho0, dp.policy, cfg.risk, obs);

    const bool ok = dp.optimal_cost <= cost_sub + 1e-10 && dp.optimal_cost <= cost_rn + 1e-10 &&
                    std::abs(cost_dp - dp.optimal_cost) <= 1e-10;
    std::cout << "dp-validate: N=" << n << " dp_cost=" << dp.optimal_cost
              << " suboptimal_cost=" << cost_sub << " risk_neutral_cost=" << cost_rn
              << (ok ? " PASS" : " FAIL") << "\n";
    return ok ? kExitOk : kExitValidationFailure;
}

int cmd_oracle_validate(const CommonArgs& args) {
    const int n = args.steps > 0 ? args.steps : 6;
    if (n > kOracleMaxSteps) throw InvalidInputError("oracle-validate: N exceeds the ceiling");
    const double lambda2 = args.lambda2 > 0 ? args.lambda2 : 0.001;

    double worst_estimate = 0.0;
    double worst_prob = 0.0;
    struct Case {
        ModelKind kind;
        double value;
        Matrix2 x;
    };
    for (const Case& c : {Case{ModelKind::dispersive, 0.55, sigma_z()},
                          Case{ModelKind::spontaneous, 0.88, sigma_y()}}) {
        ParameterEnsemble ens = make_ensemble(c.kind, {c.value}, std::sqrt(lambda2));
        FullStateSimulator sim = evolve_full(ens.coeffs.front(), n);
        BlockDensityMatrix rho0 = block_density({1.0}, plus_state());

        std::vector<double> probs = record_distribution(sim, rho0.blocks[0]);
        for (std::uint32_t idx = 0; idx < (1u << n); ++idx) {
            Record rec = record_from_index(idx, n);
            FilterState s = make_filter_state(rho0);
            double prob = 1.0;
            for (std::int8_t sign : rec) {
                FilterState plus = rn_step(s, ens, kPlus);
                const double p = plus.state.total_trace() / (2.0 * s.state.total_trace());
                prob *= (sign > 0) ? p : 1.0 - p;
                s = (sign > 0) ? std::move(plus) : rn_step(s, ens, kMinus);
            }
            worst_prob = std::max(worst_prob, std::abs(prob - probs[idx]));
            worst_estimate = std::max(
                worst_estimate, std::abs(estimate(s, c.x) - conditional_expectation(
                                                                sim, rho0.blocks[0], c.x, rec)));
        }
    }

    const bool ok = worst_estimate <= 1e-10 && worst_prob <= 1e-10;
    std::cout << "oracle-validate: N=" << n << " max_estimate_diff=" << worst_estimate
              << " max_record_prob_diff=" << worst_prob << (ok ? " PASS" : " FAIL") << "\n";
    return ok ? kExitOk : kExitValidationFailure;
}

int cmd_entropy_check(const CommonArgs& args) {
    std::mt19937_64 rng(args.has_seed ? args.seed : 20250101);
    double worst_gap = 0.0;
    double worst_violation = 0.0;
    double worst_gt = 0.0;
    double worst_add = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const int dim = 2 + static_cast<int>(rng() % 5);
        ComplexMatrix a = random_hermitian(dim, rng);
        ComplexMatrix rho_p = random_density(dim, rng);
        DualityCheck d = duality_check(a, rho_p, 10, rng());
        worst_gap = std::max(worst_gap, d.maximizer_gap);
        worst_violation = std::max(worst_violation, d.max_violation);

        GoldenThompsonCheck gt = golden_thompson_check(a, rho_p);
        worst_gt = std::max(worst_gt, gt.lhs - gt.rhs);

        worst_add = std::max(worst_add,
                             entropy_additivity_check(random_density(2, rng),
                                                      random_density(2, rng),
                                                      random_density(2, rng),
                                                      random_density(2, rng)));
    }
    const bool ok = worst_gap <= 1e-10 && worst_violation <= 1e-10 && worst_gt <= 1e-10 &&
                    worst_add <= 1e-9;
    std::cout << "entropy-check: duality_gap=" << worst_gap
              << " duality_violation=" << worst_violation << " golden_thompson=" << worst_gt
              << " additivity=" << worst_add << (ok ? " PASS" : " FAIL") << "\n";
    return ok ? kExitOk : kExitValidationFailure;
}

int cmd_obs_space(const std::string& model, const CommonArgs& args) {
    const double lambda2 = args.lambda2 > 0 ? args.lambda2 : 0.001;
    ModelKind kind;
    double value;
    if (model == "dispersive") {
        kind = ModelKind::dispersive;
        value = 0.7;
    } else if (model == "spontaneous") {
        kind = ModelKind::spontaneous;
        value = 0.88;
    } else {
        throw InvalidInputError("obs-space: --model must be dispersive or spontaneous");
    }

    ParameterEnsemble ens = make_ensemble(kind, {value}, std::sqrt(lambda2));
    ObservableSpace discrete = observable_space(ens.coeffs.front());
    ObservableSpace continuum = observable_space_small_lambda(kind, value);

    std::cout << "obs-space: model=" << model << " dimension=" << discrete.dimension;
    if (continuum.dimension != discrete.dimension)
        std::cout << " (small-lambda limit dimension=" << continuum.dimension << ")";
    std::cout << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discrete-time quantum risk-sensitive estimation toolbox"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string obs_model = "dispersive";

    CLI::App* simulate = app.add_subcommand("simulate", "run a batch from a config");
    CLI::App* fig1 = app.add_subcommand("fig1", "dispersive error-histogram experiment");
    CLI::App* fig2a = app.add_subcommand("fig2a", "beta sweep of the averaged errors");
    CLI::App* fig2b = app.add_subcommand("fig2b", "conditional error bound traces");
    CLI::App* fig2c = app.add_subcommand("fig2c", "mu1 comparison on shared records");
    CLI::App* fig3 = app.add_subcommand("fig3", "spontaneous-emission error histograms");
    CLI::App* dpv = app.add_subcommand("dp-validate", "dynamic-programming dominance check");
    CLI::App* orv = app.add_subcommand("oracle-validate", "filter vs full-tensor oracle");
    CLI::App* entropy = app.add_subcommand("entropy-check", "duality and Golden-Thompson");
    CLI::App* obs = app.add_subcommand("obs-space", "observable-space dimension");

    for (CLI::App* cmd : {simulate, fig1, fig2a, fig2b, fig2c, fig3, dpv, orv, entropy, obs})
        add_common(cmd, args);
    obs->add_option("--model", obs_model, "dispersive or spontaneous");
    dpv->add_option("--N", args.steps, "horizon (alias for --steps)");
    orv->add_option("--N", args.steps, "horizon (alias for --steps)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(args);
        if (fig1->parsed()) return run_error_histogram_experiment(
            "fig1", resolve_config(default_fig1_config(), args));
        if (fig2a->parsed()) return cmd_fig2a(args);
        if (fig2b->parsed()) return cmd_fig2b(args);
        if (fig2c->parsed()) return cmd_fig2c(args);
        if (fig3->parsed()) return run_error_histogram_experiment(
            "fig3", resolve_config(default_fig3_config(), args));
        if (dpv->parsed()) return cmd_dp_validate(args);
        if (orv->parsed()) return cmd_oracle_validate(args);
        if (entropy->parsed()) return cmd_entropy_check(args);
        if (obs->parsed()) return cmd_obs_space(obs_model, args);
    } catch (const InvalidInputError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidationFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidationFailure;
    }
    return kExitUsage;
}
