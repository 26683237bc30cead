#pragma once

// Monte Carlo harness for the uncertain-system experiments: per-record
// estimator triples, the beta sweep, conditional error-bound traces, the
// mu1 comparison, and the observable-space stability diagnostic.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "qrs/filter.hpp"
#include "qrs/model.hpp"
#include "qrs/robustness.hpp"
#include "qrs/sampler.hpp"

namespace qrs {

struct ExperimentConfig {
    ModelKind kind = ModelKind::dispersive;
    double lambda2 = 0.001;
    int steps = 2000;
    int paths = 200;
    RiskParams risk{0.1, 0.182};
    UncertainModel model;
    Matrix2 x_e = sigma_z();
    std::uint64_t master_seed = 1;
    std::string out_dir = ".";

    void validate() const {
        if (!(lambda2 > 0.0)) throw InvalidInputError("ExperimentConfig: lambda2 must be > 0");
        if (steps < 1) throw InvalidInputError("ExperimentConfig: steps must be >= 1");
        if (paths < 1) throw InvalidInputError("ExperimentConfig: paths must be >= 1");
        risk.validate();
        model.ensemble.validate();
        if (model.true_state.size() != model.ensemble.size() ||
            model.nominal_state.size() != model.ensemble.size())
            throw InvalidInputError("ExperimentConfig: density/ensemble block mismatch");
    }
};

inline ExperimentConfig default_fig1_config() {
    ExperimentConfig cfg;
    cfg.kind = ModelKind::dispersive;
    cfg.lambda2 = 0.001;
    cfg.steps = 2000;
    cfg.paths = 200;
    cfg.risk = RiskParams{0.1, 0.182};
    cfg.model = build_true_nominal_fig1(cfg.lambda2);
    cfg.x_e = sigma_z();
    return cfg;
}

inline ExperimentConfig default_fig3_config() {
    ExperimentConfig cfg;
    cfg.kind = ModelKind::spontaneous;
    cfg.lambda2 = 0.001;
    cfg.steps = 5000;
    cfg.paths = 200;
    cfg.risk = RiskParams{0.15, 0.25};
    cfg.model = build_true_nominal_fig3(cfg.lambda2);
    cfg.x_e = sigma_y();
    return cfg;
}

struct ErrorMetrics {
    double delta_rn = 0.0;  // (1/N) sum_l |pi_l^true - pi_l^nom|
    double delta_rs = 0.0;  // (1/N) sum_l |pi_l^true - u_l^{mu,sub}|
    std::vector<double> eps_series;        // conditional error per step
    std::vector<double> eps_prime_series;  // guaranteed bound per step
};

struct TripleOptions {
    bool want_series = false;  // per-step estimates and p_plus
    bool want_bounds = false;  // conditional error bound per step
};

struct TripleResult {
    ErrorMetrics metrics;
    TrajectoryRecord record;
    std::vector<double> est_true, est_rn, est_rs, p_plus;
};

// Samples one record from the true model and propagates the true
// risk-neutral, nominal risk-neutral, and nominal suboptimal risk-sensitive
// filters on that same record.
inline TripleResult run_trajectory_triple(const ExperimentConfig& cfg, std::uint64_t seed,
                                          const TripleOptions& opts = {}) {
    cfg.validate();
    const ParameterEnsemble& ens = cfg.model.ensemble;
    const Observable obs(cfg.x_e);
    std::mt19937_64 rng(splitmix64(seed));

    TripleResult out;
    out.record.seed = seed;
    out.record.lambda = ens.coeffs.front().lambda;
    out.record.signs.reserve(cfg.steps);
    if (opts.want_series) {
        out.est_true.reserve(cfg.steps);
        out.est_rn.reserve(cfg.steps);
        out.est_rs.reserve(cfg.steps);
        out.p_plus.reserve(cfg.steps);
    }
    if (opts.want_bounds) {
        out.metrics.eps_series.reserve(cfg.steps);
        out.metrics.eps_prime_series.reserve(cfg.steps);
    }

    FilterState truth = make_filter_state(cfg.model.true_state);
    FilterState nom_rn = make_filter_state(cfg.model.nominal_state);
    FilterState nom_rs = make_filter_state(cfg.model.nominal_state);

    double sum_rn = 0.0;
    double sum_rs = 0.0;
    for (int l = 0; l < cfg.steps; ++l) {
        OutcomeSample s = sample_outcome(truth, ens, rng);
        out.record.signs.push_back(static_cast<std::int8_t>(s.sign));

        nom_rn = rn_step(nom_rn, ens, s.sign);
        nom_rs = rs_step(nom_rs, ens, cfg.risk, obs, nom_rs.last_estimate.value_or(0.0), s.sign);
        const double u_rs = suboptimal_estimate(nom_rs, cfg.risk, obs);
        nom_rs.last_estimate = u_rs;

        const double pi_true = estimate(s.next, cfg.x_e);
        const double pi_nom = estimate(nom_rn, cfg.x_e);
        sum_rn += std::abs(pi_true - pi_nom);
        sum_rs += std::abs(pi_true - u_rs);

        if (opts.want_series) {
            out.est_true.push_back(pi_true);
            out.est_rn.push_back(pi_nom);
            out.est_rs.push_back(u_rs);
            out.p_plus.push_back(s.p_plus);
        }
        if (opts.want_bounds) {
            ConditionalErrorBound bound =
                conditional_error_bound(s.next, nom_rs, u_rs, cfg.risk, obs);
            out.metrics.eps_series.push_back(bound.eps);
            out.metrics.eps_prime_series.push_back(bound.eps_prime);
        }
        truth = std::move(s.next);
    }
    out.metrics.delta_rn = sum_rn / cfg.steps;
    out.metrics.delta_rs = sum_rs / cfg.steps;
    return out;
}

// Chunked parallel map over [0, n); worker threads are capped by the
// QRS_THREADS environment variable (default: hardware concurrency).
inline int worker_thread_count() {
    if (const char* env = std::getenv("QRS_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

template <class Fn>
void parallel_for(int n, Fn&& fn) {
    const int threads = std::min(worker_thread_count(), std::max(n, 1));
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Batch of independent trajectories; per-path seeds derive from the master
// seed, so the result is independent of the thread schedule.
inline std::vector<ErrorMetrics> run_paths(const ExperimentConfig& cfg,
                                           const TripleOptions& opts = {}) {
    cfg.validate();
    std::vector<ErrorMetrics> metrics(cfg.paths);
    parallel_for(cfg.paths, [&](int k) {
        metrics[k] =
            run_trajectory_triple(cfg, path_seed(cfg.master_seed, k), opts).metrics;
    });
    return metrics;
}

struct BetaSweepRow {
    double beta = 0.0;
    double mean_rn = 0.0;
    double mean_rs = 0.0;
};

// Fig. 2(a1) protocol: for each beta, the nominal state is the
// beta-parameterized density and paths trajectories are averaged.
inline std::vector<BetaSweepRow> beta_sweep(const ExperimentConfig& base,
                                            const std::vector<double>& betas) {
    std::vector<BetaSweepRow> rows;
    rows.reserve(betas.size());
    for (double beta : betas) {
        ExperimentConfig cfg = base;
        cfg.model.nominal_state = build_beta_nominal(beta);
        std::vector<ErrorMetrics> ms = run_paths(cfg);
        BetaSweepRow row;
        row.beta = beta;
        for (const auto& m : ms) {
            row.mean_rn += m.delta_rn;
            row.mean_rs += m.delta_rs;
        }
        row.mean_rn /= ms.size();
        row.mean_rs /= ms.size();
        rows.push_back(row);
    }
    return rows;
}

// Fig. 2(b) protocol: one trajectory with the conditional error and its
// guaranteed bound recorded at every step.
inline TripleResult bound_trace(const ExperimentConfig& cfg, std::uint64_t seed) {
    TripleOptions opts;
    opts.want_series = true;
    opts.want_bounds = true;
    return run_trajectory_triple(cfg, seed, opts);
}

struct Mu1Comparison {
    RiskParams mu_a;
    RiskParams mu_b;
    std::vector<double> mean_eps_a;  // conditional error series, averaged over paths
    std::vector<double> mean_eps_b;
};

// Fig. 2(c) protocol: two risk-sensitive filters with different (mu1, mu2)
// consume identical records; the conditional error of each is averaged over
// paths, step by step.
inline Mu1Comparison mu1_comparison(const ExperimentConfig& base,
                                    RiskParams mu_a = RiskParams{0.0, 0.281},
                                    RiskParams mu_b = RiskParams{0.1, 0.182}) {
    base.validate();
    mu_a.validate();
    mu_b.validate();
    const ParameterEnsemble& ens = base.model.ensemble;
    const Observable obs(base.x_e);

    Mu1Comparison out;
    out.mu_a = mu_a;
    out.mu_b = mu_b;
    out.mean_eps_a.assign(base.steps, 0.0);
    out.mean_eps_b.assign(base.steps, 0.0);

    std::vector<std::vector<double>> eps_a(base.paths), eps_b(base.paths);
    parallel_for(base.paths, [&](int k) {
        std::mt19937_64 rng(splitmix64(path_seed(base.master_seed, k)));
        FilterState truth = make_filter_state(base.model.true_state);
        FilterState fa = make_filter_state(base.model.nominal_state);
        FilterState fb = make_filter_state(base.model.nominal_state);
        eps_a[k].reserve(base.steps);
        eps_b[k].reserve(base.steps);
        for (int l = 0; l < base.steps; ++l) {
            OutcomeSample s = sample_outcome(truth, ens, rng);
            fa = rs_step(fa, ens, mu_a, obs, fa.last_estimate.value_or(0.0), s.sign);
            fb = rs_step(fb, ens, mu_b, obs, fb.last_estimate.value_or(0.0), s.sign);
            const double ua = suboptimal_estimate(fa, mu_a, obs);
            const double ub = suboptimal_estimate(fb, mu_b, obs);
            fa.last_estimate = ua;
            fb.last_estimate = ub;

            BlockDensityMatrix rho_true = s.next.state.normalized();
            double ea = 0.0;
            double eb = 0.0;
            const Matrix2 ka = obs.quadratic_cost(ua);
            const Matrix2 kb = obs.quadratic_cost(ub);
            for (const auto& b : rho_true.blocks) {
                ea += trace_product(b, ka).real();
                eb += trace_product(b, kb).real();
            }
            eps_a[k].push_back(ea);
            eps_b[k].push_back(eb);
            truth = std::move(s.next);
        }
    });
    for (int k = 0; k < base.paths; ++k) {
        for (int l = 0; l < base.steps; ++l) {
            out.mean_eps_a[l] += eps_a[k][l] / base.paths;
            out.mean_eps_b[l] += eps_b[k][l] / base.paths;
        }
    }
    return out;
}

struct ObservableSpace {
    int dimension = 0;
    std::vector<Matrix2> basis;  // orthonormal in the Frobenius inner product
};

// Closure of span{I} under the Heisenberg-picture maps
//   L(X) = M+^* X M+ + lambda^2 Mo^* X Mo + X Mo + Mo^* X
//   J(X) = lambda^2 M+^* X Mo + lambda^2 Mo^* X M+ + X M+ + M+^* X
// inside the 4-dimensional real space of Hermitian 2x2 matrices.  Full
// dimension implies filter stability.
inline ObservableSpace observable_space(const InteractionCoefficients& c,
                                        double tol_rank = 1e-8) {
    const double l2 = c.lambda * c.lambda;
    auto lmap = [&](const Matrix2& x) -> Matrix2 {
        return c.Mp.adjoint() * x * c.Mp + l2 * c.Mo.adjoint() * x * c.Mo + x * c.Mo +
               c.Mo.adjoint() * x;
    };
    auto jmap = [&](const Matrix2& x) -> Matrix2 {
        return l2 * c.Mp.adjoint() * x * c.Mo + l2 * c.Mo.adjoint() * x * c.Mp + x * c.Mp +
               c.Mp.adjoint() * x;
    };

    auto inner = [](const Matrix2& a, const Matrix2& b) {
        return trace_product(a.adjoint().eval(), b).real();
    };

    ObservableSpace out;
    out.basis.push_back(Matrix2::Identity() / std::sqrt(2.0));

    std::size_t scanned = 0;
    while (scanned < out.basis.size() && out.basis.size() < 4) {
        const Matrix2 src = out.basis[scanned++];
        for (int which = 0; which < 2; ++which) {
            Matrix2 img = hermitize(which == 0 ? lmap(src) : jmap(src));
            const double scale = std::sqrt(std::max(inner(img, img), 0.0));
            if (scale <= tol_rank) continue;
            for (const auto& b : out.basis) img -= inner(b, img) * b;
            const double residual = std::sqrt(std::max(inner(img, img), 0.0));
            if (residual > tol_rank * scale) out.basis.push_back(img / residual);
        }
    }
    out.dimension = static_cast<int>(out.basis.size());
    return out;
}

// Numerically extrapolated continuous-time variant: the same closure with
// coefficients rebuilt at a much smaller slice length.
inline ObservableSpace observable_space_small_lambda(ModelKind kind, double value,
                                                     double lambda2 = 1e-12,
                                                     double tol_rank = 1e-8) {
    ParameterEnsemble ens = make_ensemble(kind, {value}, std::sqrt(lambda2));
    return observable_space(ens.coeffs.front(), tol_rank);
}

// --- small statistics helpers -------------------------------------------

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
}

struct PairedTest {
    double t = 0.0;
    double critical = 0.0;
    bool significant = false;  // one-sided, mean(d) > 0 at the 5% level
};

inline double t_critical_5pct(int df) {
    if (df >= 200) return 1.6525;
    if (df >= 100) return 1.6602;
    if (df >= 50) return 1.6759;
    if (df >= 30) return 1.6973;
    if (df >= 10) return 1.8125;
    return 2.0150;  // df >= 5
}

// One-sided paired test of mean(d) > 0 at the 5% level.
inline PairedTest paired_one_sided_test(const std::vector<double>& d) {
    const int n = static_cast<int>(d.size());
    if (n < 2) throw InvalidInputError("paired_one_sided_test: need at least 2 samples");
    const double m = mean(d);
    double ss = 0.0;
    for (double x : d) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / (n - 1));
    PairedTest out;
    out.t = m / (sd / std::sqrt(static_cast<double>(n)));
    out.critical = t_critical_5pct(n - 1);
    out.significant = out.t > out.critical;
    return out;
}

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
};

// 20 equal bins over [0, max(values)].
inline std::vector<HistogramBin> histogram(const std::vector<double>& values, int nbins = 20) {
    double hi = 0.0;
    for (double v : values) hi = std::max(hi, v);
    if (hi <= 0.0) hi = 1.0;
    std::vector<HistogramBin> bins(nbins);
    for (int b = 0; b < nbins; ++b) {
        bins[b].lo = hi * b / nbins;
        bins[b].hi = hi * (b + 1) / nbins;
    }
    for (double v : values) {
        int b = std::min(nbins - 1, static_cast<int>(v / hi * nbins));
        bins[b].count += 1;
    }
    return bins;
}

}  // namespace qrs
