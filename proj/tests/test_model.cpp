#include <catch2/catch_amalgamated.hpp>

#include "qrs/model.hpp"
#include "testutil.hpp"

using namespace qrs;
using qrs::test::max_abs_diff;

namespace {

// Closed-form coefficients from the two worked examples; the generic
// builder must reproduce them entrywise.
InteractionCoefficients dispersive_closed_form(double g, double lambda) {
    InteractionCoefficients c;
    c.lambda = lambda;
    c.Mpm = Matrix2::Zero();
    c.Mp = std::sin(g * lambda) / lambda * sigma_z();
    c.Mm = -std::sin(g * lambda) / lambda * sigma_z();
    c.Mo = (std::cos(g * lambda) - 1.0) / (lambda * lambda) * Matrix2::Identity();
    c.refresh_step_factors();
    return c;
}

InteractionCoefficients spontaneous_closed_form(double e, double lambda) {
    InteractionCoefficients c;
    c.lambda = lambda;
    c.Mpm = (1.0 - std::cos(e * lambda)) * sigma_z();
    c.Mp = std::sin(e * lambda) / lambda * sigma_minus();
    c.Mm = -std::sin(e * lambda) / lambda * sigma_plus();
    c.Mo = (std::cos(e * lambda) - 1.0) / (lambda * lambda) * sigma_plus() * sigma_minus();
    c.refresh_step_factors();
    return c;
}

}  // namespace

TEST_CASE("dispersive coefficients match the closed form", "[model]") {
    const double lambda = std::sqrt(0.001);
    for (double g : {0.43, 0.55, 0.7, 1.0}) {
        InteractionCoefficients built = build_interaction_coeffs(dispersive_spec(g, lambda));
        InteractionCoefficients closed = dispersive_closed_form(g, lambda);
        CHECK(max_abs_diff(built.Mpm, closed.Mpm) <= 1e-10);
        CHECK(max_abs_diff(built.Mp, closed.Mp) <= 1e-10);
        CHECK(max_abs_diff(built.Mm, closed.Mm) <= 1e-10);
        CHECK(max_abs_diff(built.Mo, closed.Mo) <= 1e-10);
    }
}

TEST_CASE("spontaneous coefficients match the closed form", "[model]") {
    const double lambda = std::sqrt(0.001);
    for (double e : {0.24, 0.5, 0.88, 1.0}) {
        InteractionCoefficients built = build_interaction_coeffs(spontaneous_spec(e, lambda));
        InteractionCoefficients closed = spontaneous_closed_form(e, lambda);
        CHECK(max_abs_diff(built.Mpm, closed.Mpm) <= 1e-10);
        CHECK(max_abs_diff(built.Mp, closed.Mp) <= 1e-10);
        CHECK(max_abs_diff(built.Mm, closed.Mm) <= 1e-10);
        CHECK(max_abs_diff(built.Mo, closed.Mo) <= 1e-10);
    }
}

TEST_CASE("zero Hamiltonian gives zero coefficients", "[model]") {
    HamiltonianSpec s;
    s.lambda = 0.1;
    InteractionCoefficients c = build_interaction_coeffs(s);
    CHECK(max_abs_diff(c.Mpm, Matrix2::Zero()) <= 1e-14);
    CHECK(max_abs_diff(c.Mp, Matrix2::Zero()) <= 1e-14);
    CHECK(max_abs_diff(c.Mm, Matrix2::Zero()) <= 1e-14);
    CHECK(max_abs_diff(c.Mo, Matrix2::Zero()) <= 1e-12);
}

TEST_CASE("spec validation", "[model]") {
    HamiltonianSpec s;
    s.lambda = 0.0;
    CHECK_THROWS_AS(build_interaction_coeffs(s), InvalidInputError);

    s.lambda = 0.1;
    s.L1 = sigma_minus();  // not self-adjoint
    CHECK_THROWS_AS(build_interaction_coeffs(s), InvalidInputError);
}

TEST_CASE("check_unitarity", "[model]") {
    const double lambda = std::sqrt(0.001);

    InteractionCoefficients c = build_interaction_coeffs(dispersive_spec(0.5, lambda));
    CHECK(check_unitarity(c) <= 1e-12);

    InteractionCoefficients zero;
    zero.lambda = lambda;
    zero.refresh_step_factors();
    CHECK(check_unitarity(zero) == 0.0);

    InteractionCoefficients bad = c;
    bad.Mp += 0.1 * Matrix2::Identity();
    CHECK(check_unitarity(bad) > 1e-3);
}

TEST_CASE("unitarity residual over the experiment parameter ranges", "[model]") {
    const double lambda = std::sqrt(0.001);
    for (int i = 1; i <= 20; ++i) {
        const double g = 0.4 + 0.03 * i;
        CHECK(check_unitarity(build_interaction_coeffs(dispersive_spec(g, lambda))) <= 1e-10);
        const double e = 0.2 + 0.04 * i;
        CHECK(check_unitarity(build_interaction_coeffs(spontaneous_spec(e, lambda))) <= 1e-10);
    }
}

TEST_CASE("unitarity relation between the coefficients", "[model]") {
    const double lambda = std::sqrt(0.001);
    InteractionCoefficients c = build_interaction_coeffs(spontaneous_spec(0.6, lambda));
    Matrix2 rel = c.Mo + c.Mo.adjoint() + c.Mp.adjoint() * c.Mp +
                  lambda * lambda * c.Mo.adjoint() * c.Mo;
    CHECK(rel.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("fig 1 densities", "[model]") {
    UncertainModel m = build_true_nominal_fig1();
    REQUIRE(m.ensemble.size() == 20);

    CHECK(m.ensemble.values[4] == Catch::Approx(0.55));
    CHECK(m.true_state.blocks[4].trace().real() == Catch::Approx(0.7));

    CHECK(m.ensemble.values[2] == Catch::Approx(0.49));
    CHECK(m.true_state.blocks[2].trace().real() == Catch::Approx(0.04));

    CHECK(m.true_state.total_trace() == Catch::Approx(1.0).margin(1e-12));
    CHECK(m.nominal_state.total_trace() == Catch::Approx(1.0).margin(1e-12));
    CHECK(m.true_state.is_psd());
    CHECK(m.nominal_state.is_psd());
}

TEST_CASE("beta-parameterized nominal family", "[model]") {
    UncertainModel m = build_true_nominal_fig1();

    BlockDensityMatrix b0 = build_beta_nominal(0.0);
    for (int i = 0; i < 20; ++i)
        CHECK(max_abs_diff(b0.blocks[i], m.true_state.blocks[i]) <= 1e-14);

    BlockDensityMatrix b1 = build_beta_nominal(1.0);
    for (int i = 0; i < 20; ++i)
        CHECK(max_abs_diff(b1.blocks[i], m.nominal_state.blocks[i]) <= 1e-14);

    CHECK(build_beta_nominal(0.5).total_trace() == Catch::Approx(1.0).margin(1e-12));

    CHECK_THROWS_AS(build_beta_nominal(-0.1), InvalidInputError);
    CHECK_THROWS_AS(build_beta_nominal(1.1), InvalidInputError);
}

TEST_CASE("fig 3 densities", "[model]") {
    UncertainModel m = build_true_nominal_fig3();
    REQUIRE(m.ensemble.size() == 20);

    CHECK(m.ensemble.values[16] == Catch::Approx(0.88));
    CHECK(m.true_state.blocks[16].trace().real() == Catch::Approx(0.9));
    CHECK(m.true_state.total_trace() == Catch::Approx(1.0).margin(1e-12));

    // nominal system block equals the true system block
    BlockDensityMatrix tn = m.true_state.normalized();
    for (int i = 0; i < 20; ++i) {
        const double w = m.nominal_state.blocks[i].trace().real();
        CHECK(w == Catch::Approx(1.0 / 20.0));
        CHECK(max_abs_diff(m.nominal_state.blocks[i] / w, plus_state()) <= 1e-14);
    }
    (void)tn;
}

TEST_CASE("ensemble validation", "[model]") {
    ParameterEnsemble bad;
    bad.values = {0.5, 0.4};
    bad.coeffs.resize(2);
    CHECK_THROWS_AS(bad.validate(), InvalidInputError);
}
