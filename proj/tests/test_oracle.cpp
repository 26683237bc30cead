#include <catch2/catch_amalgamated.hpp>

#include "qrs/oracle.hpp"
#include "qrs/sampler.hpp"
#include "testutil.hpp"

using namespace qrs;
using qrs::test::max_abs_diff;

namespace {

ParameterEnsemble single(ModelKind kind, double value, double lambda2) {
    return make_ensemble(kind, {value}, std::sqrt(lambda2));
}

// Product of per-step conditional probabilities assigned by the sampler's
// law to a fixed record.
double sampler_record_probability(const ParameterEnsemble& ens, const BlockDensityMatrix& rho0,
                                  const Record& record) {
    FilterState s = make_filter_state(rho0);
    double prob = 1.0;
    for (std::int8_t sign : record) {
        FilterState plus = rn_step(s, ens, kPlus);
        const double p_plus = plus.state.total_trace() / (2.0 * s.state.total_trace());
        if (sign > 0) {
            prob *= p_plus;
            s = std::move(plus);
        } else {
            prob *= 1.0 - p_plus;
            s = rn_step(s, ens, kMinus);
        }
    }
    return prob;
}

// Risk-sensitive filter state along a record, past estimates supplied by the
// given policy.
FilterState rs_state_along(const ParameterEnsemble& ens, const BlockDensityMatrix& rho0,
                           const Record& record, const RiskParams& rp, const Observable& obs,
                           const RecordPolicy& policy) {
    FilterState s = make_filter_state(rho0);
    Record prefix;
    for (std::int8_t sign : record) {
        const double u_prev = prefix.empty() ? 0.0 : policy(prefix);
        s = rs_step(s, ens, rp, obs, u_prev, sign);
        prefix.push_back(sign);
    }
    return s;
}

}  // namespace

TEST_CASE("zero interaction leaves the unitary at the identity", "[oracle]") {
    InteractionCoefficients c;
    c.lambda = 0.1;
    c.refresh_step_factors();
    FullStateSimulator sim = evolve_full(c, 3);
    CHECK(max_abs_diff(sim.u[3], ComplexMatrix::Identity(16, 16)) == 0.0);

    std::vector<double> probs = record_distribution(sim, ComplexMatrix(plus_state()));
    for (double p : probs) CHECK(p == Catch::Approx(1.0 / 8.0).margin(1e-14));
}

TEST_CASE("full unitary stays unitary", "[oracle]") {
    ParameterEnsemble ens = single(ModelKind::dispersive, 0.55, 0.001);
    FullStateSimulator sim = evolve_full(ens.coeffs.front(), 6);
    const int dim = sim.dim();
    CHECK((sim.u[6].adjoint() * sim.u[6] - ComplexMatrix::Identity(dim, dim))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
}

TEST_CASE("capacity ceiling", "[oracle]") {
    InteractionCoefficients c;
    c.lambda = 0.1;
    c.refresh_step_factors();
    CHECK_THROWS_AS(evolve_full(c, 10), CapacityError);
    CHECK_THROWS_AS(evolve_full(c, 0), CapacityError);
}

TEST_CASE("single-step record probability matches the sampler closed form", "[oracle]") {
    ParameterEnsemble ens = single(ModelKind::dispersive, 0.65, 0.001);
    FullStateSimulator sim = evolve_full(ens.coeffs.front(), 1);
    Matrix2 point = (Matrix2() << 1, 0, 0, 0).finished();

    const double p_plus = record_probability(sim, ComplexMatrix(point), Record{+1});
    const double lambda = ens.coeffs.front().lambda;
    CHECK(p_plus == Catch::Approx((1.0 + std::sin(2 * 0.65 * lambda)) / 2.0).margin(1e-12));
}

TEST_CASE("record distribution sums to one and matches sampler products", "[oracle]") {
    for (ModelKind kind : {ModelKind::dispersive, ModelKind::spontaneous}) {
        ParameterEnsemble ens = single(kind, 0.7, 0.001);
        const int n = 6;
        FullStateSimulator sim = evolve_full(ens.coeffs.front(), n);
        BlockDensityMatrix rho0 = block_density({1.0}, plus_state());

        std::vector<double> probs = record_distribution(sim, rho0.blocks[0]);
        double total = 0.0;
        for (std::uint32_t idx = 0; idx < probs.size(); ++idx) {
            total += probs[idx];
            const double via_sampler =
                sampler_record_probability(ens, rho0, record_from_index(idx, n));
            CHECK(std::abs(probs[idx] - via_sampler) <= 1e-10);
        }
        CHECK(total == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("conditional expectation of the identity is one", "[oracle]") {
    ParameterEnsemble ens = single(ModelKind::spontaneous, 0.5, 0.001);
    FullStateSimulator sim = evolve_full(ens.coeffs.front(), 4);
    for (std::uint32_t idx = 0; idx < 16u; ++idx) {
        const double v = conditional_expectation(sim, ComplexMatrix(plus_state()),
                                                 Matrix2::Identity(), record_from_index(idx, 4));
        CHECK(v == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("filter estimates equal full-tensor conditional expectations", "[oracle]") {
    struct Case {
        ModelKind kind;
        double value;
        Matrix2 x;
    };
    for (const Case& c : {Case{ModelKind::dispersive, 0.55, sigma_z()},
                          Case{ModelKind::spontaneous, 0.88, sigma_y()}}) {
        ParameterEnsemble ens = single(c.kind, c.value, 0.001);
        const int n = 6;
        FullStateSimulator sim = evolve_full(ens.coeffs.front(), n);
        BlockDensityMatrix rho0 = block_density({1.0}, plus_state());

        for (int len = 1; len <= n; ++len) {
            for (std::uint32_t idx = 0; idx < (1u << len); ++idx) {
                Record rec = record_from_index(idx, len);
                FilterState s = make_filter_state(rho0);
                for (std::int8_t sign : rec) s = rn_step(s, ens, sign);
                const double via_filter = estimate(s, c.x);
                const double via_oracle =
                    conditional_expectation(sim, rho0.blocks[0], c.x, rec);
                CHECK(std::abs(via_filter - via_oracle) <= 1e-10);
            }
        }
    }
}

TEST_CASE("ensemble oracle agrees with the ensemble filter", "[oracle]") {
    UncertainModel m = build_true_nominal_fig1();
    // truncate to four parameter values around the peak, renormalized
    ParameterEnsemble ens;
    BlockDensityMatrix truth, nominal;
    for (int i = 3; i < 7; ++i) {
        ens.values.push_back(m.ensemble.values[i]);
        ens.coeffs.push_back(m.ensemble.coeffs[i]);
        truth.blocks.push_back(m.true_state.blocks[i]);
        nominal.blocks.push_back(m.nominal_state.blocks[i]);
    }
    truth = truth.normalized();
    nominal = nominal.normalized();

    const int n = 4;
    EnsembleOracle oracle(ens, n);

    std::vector<double> probs = oracle.record_distribution(truth);
    double total = 0.0;
    for (double p : probs) total += p;
    CHECK(total == Catch::Approx(1.0).margin(1e-12));

    for (std::uint32_t idx = 0; idx < (1u << n); ++idx) {
        Record rec = record_from_index(idx, n);
        FilterState s = make_filter_state(truth);
        for (std::int8_t sign : rec) s = rn_step(s, ens, sign);
        CHECK(std::abs(estimate(s, sigma_z()) -
                       oracle.conditional_expectation(truth, sigma_z(), rec)) <= 1e-10);
        CHECK(std::abs(probs[idx] - sampler_record_probability(ens, truth, rec)) <= 1e-10);
    }
}

TEST_CASE("risk cost identity between the full space and the filter", "[oracle]") {
    ParameterEnsemble ens = single(ModelKind::dispersive, 0.7, 0.001);
    BlockDensityMatrix rho0 =
        block_density({1.0}, (Matrix2() << 0.5, 0.25, 0.25, 0.5).finished());
    const RiskParams rp{0.1, 0.182};
    const Observable obs(sigma_z());
    const int n = 5;

    FullStateSimulator sim = evolve_full(ens.coeffs.front(), n);
    PolicyTable sub = build_suboptimal_policy_table(ens, rho0, n, rp, obs);
    RecordPolicy policy = sub;

    const double full = risk_cost_full(sim, rho0.blocks[0], policy, rp, obs);

    double via_filter = 0.0;
    for (std::uint32_t idx = 0; idx < (1u << n); ++idx) {
        Record rec = record_from_index(idx, n);
        FilterState s = rs_state_along(ens, rho0, rec, rp, obs, policy);
        const Matrix2 terminal = obs.exp_cost(rp.mu2, policy(rec));
        via_filter += std::ldexp(trace_product(s.state.blocks[0], terminal).real(), -n);
    }
    CHECK(std::abs(full - via_filter) <= 1e-10);
}

TEST_CASE("risk cost with vanishing weights tends to one", "[oracle]") {
    ParameterEnsemble ens = single(ModelKind::dispersive, 0.5, 0.001);
    BlockDensityMatrix rho0 = block_density({1.0}, plus_state());
    const Observable obs(sigma_z());
    const int n = 3;
    FullStateSimulator sim = evolve_full(ens.coeffs.front(), n);

    const double f = risk_cost_full(sim, rho0.blocks[0], constant_policy(0.0),
                                    RiskParams{1e-9, 1e-9}, obs);
    CHECK(f == Catch::Approx(1.0).margin(1e-7));
}

TEST_CASE("constant-estimate cost equals a direct operator product", "[oracle]") {
    ParameterEnsemble ens = single(ModelKind::spontaneous, 0.6, 0.001);
    Matrix2 rho_sys = (Matrix2() << 0.6, 0.2, 0.2, 0.4).finished();
    const RiskParams rp{0.2, 0.3};
    const Observable obs(sigma_z());
    const int n = 3;
    FullStateSimulator sim = evolve_full(ens.coeffs.front(), n);

    // u_l = 0 means S_l = j_l(X_e), R = e^{mu1 l2/2 S_2^2} e^{mu1 l2/2 S_1^2}
    const int dim = sim.dim();
    const double l2 = 0.001;
    ComplexMatrix xf = kron(obs.matrix(), ComplexMatrix::Identity(dim / 2, dim / 2));
    ComplexMatrix s1 = sim.u[1].adjoint() * xf * sim.u[1];
    ComplexMatrix s2 = sim.u[2].adjoint() * xf * sim.u[2];
    ComplexMatrix s3 = sim.u[3].adjoint() * xf * sim.u[3];
    ComplexMatrix r = mat_exp_hermitian((0.5 * rp.mu1 * l2 * s2 * s2).eval()) *
                      mat_exp_hermitian((0.5 * rp.mu1 * l2 * s1 * s1).eval());
    ComplexMatrix g = r.adjoint() * mat_exp_hermitian((rp.mu2 * s3 * s3).eval()) * r;
    const double direct = trace_product(full_density(rho_sys, n), g).real();

    const double via_oracle = risk_cost_full(sim, rho_sys, constant_policy(0.0), rp, obs);
    CHECK(std::abs(direct - via_oracle) <= 1e-12);
}

TEST_CASE("U-mu and V-mu give identical expectations", "[oracle]") {
    ParameterEnsemble ens = single(ModelKind::spontaneous, 0.8, 0.001);
    Matrix2 rho_sys = (Matrix2() << 0.7, 0.1, 0.1, 0.3).finished();
    const RiskParams rp{0.25, 0.3};
    const Observable obs(sigma_y());
    const int n = 4;
    FullStateSimulator sim = evolve_full(ens.coeffs.front(), n);

    PolicyTable sub =
        build_suboptimal_policy_table(ens, block_density({1.0}, rho_sys), n, rp, obs);
    RecordPolicy policy = sub;

    ComplexMatrix r = detail::risk_weight_operator(sim, obs, policy, rp);
    ComplexMatrix umu = sim.u[n] * r;
    ComplexMatrix vmu = v_mu_full(sim, ens.coeffs.front(), obs, policy, rp);

    ComplexMatrix rho_full = full_density(rho_sys, n);
    std::mt19937_64 rng(37);
    for (int k = 0; k < 5; ++k) {
        ComplexMatrix x = random_hermitian(sim.dim(), rng);
        const double via_u = trace_product(rho_full, (umu.adjoint() * x * umu).eval()).real();
        const double via_v = trace_product(rho_full, (vmu.adjoint() * x * vmu).eval()).real();
        CHECK(std::abs(via_u - via_v) <= 1e-10 * std::max(1.0, std::abs(via_u)));
    }
}

TEST_CASE("robustness-1 inequality at desk scale", "[oracle]") {
    UncertainModel m = build_true_nominal_fig1();
    ParameterEnsemble ens;
    BlockDensityMatrix truth, nominal;
    for (int i = 3; i < 7; ++i) {
        ens.values.push_back(m.ensemble.values[i]);
        ens.coeffs.push_back(m.ensemble.coeffs[i]);
        truth.blocks.push_back(m.true_state.blocks[i]);
        nominal.blocks.push_back(m.nominal_state.blocks[i]);
    }
    truth = truth.normalized();
    nominal = nominal.normalized();

    const int n = 4;
    EnsembleOracle oracle(ens, n);
    const RiskParams rp{0.1, 0.182};
    const Observable obs(sigma_z());

    // identical densities reduce to Jensen's inequality
    auto same = oracle.verify_robustness1(nominal, nominal, constant_policy(0.1), rp, obs);
    REQUIRE(!same.rhs_infinite);
    CHECK(same.lhs <= same.rhs + 1e-10);

    // random record-dependent policies
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint64_t salt = rng();
        RecordPolicy policy = [salt](const Record& prefix) {
            std::mt19937_64 h(splitmix64(salt ^ prefix_index(prefix)));
            return -1.5 + 3.0 * uniform_double(h);
        };
        auto bound = oracle.verify_robustness1(truth, nominal, policy, rp, obs);
        REQUIRE(!bound.rhs_infinite);
        CHECK(bound.lhs <= bound.rhs + 1e-10);
    }

    // mu1 = 0 keeps the inequality
    auto mu0 = oracle.verify_robustness1(truth, nominal, constant_policy(0.0),
                                         RiskParams{0.0, 0.182}, obs);
    CHECK(mu0.lhs <= mu0.rhs + 1e-10);
}
