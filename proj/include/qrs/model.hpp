#pragma once

// Physical model construction: interaction coefficients derived from
// Hamiltonian data, the two closed-form example models, parameter
// ensembles, and block-diagonal density matrices on P (x) M.

#include <cmath>
#include <string>
#include <vector>

#include "qrs/matcore.hpp"

namespace qrs {

// One time slice lasts lambda^2; lambda is the square root carried by the
// field quadrature increments.
struct HamiltonianSpec {
    Matrix2 L1 = Matrix2::Zero();  // self-adjoint, couples to the photon counter
    Matrix2 L2 = Matrix2::Zero();  // couples to the creation/annihilation pair
    Matrix2 L3 = Matrix2::Zero();  // self-adjoint, drift
    double lambda = 0.0;

    void validate() const {
        if (!(lambda > 0.0)) throw InvalidInputError("HamiltonianSpec: lambda must be > 0");
        if (!all_finite(L1) || !all_finite(L2) || !all_finite(L3))
            throw InvalidInputError("HamiltonianSpec: non-finite entries");
        if (!is_hermitian(L1)) throw InvalidInputError("HamiltonianSpec: L1 must be self-adjoint");
        if (!is_hermitian(L3)) throw InvalidInputError("HamiltonianSpec: L3 must be self-adjoint");
    }
};

// The four slice-evolution coefficients of M_l = I + Mpm (x) dLambda
// + Mp (x) dA^* + Mm (x) dA + Mo (x) dt, together with the cached
// quadrature step factors V_{+-} = I + lambda^2 Mo +- lambda Mp.
struct InteractionCoefficients {
    Matrix2 Mpm = Matrix2::Zero();
    Matrix2 Mp = Matrix2::Zero();
    Matrix2 Mm = Matrix2::Zero();
    Matrix2 Mo = Matrix2::Zero();
    double lambda = 0.0;
    Matrix2 Vp = Matrix2::Identity();
    Matrix2 Vm = Matrix2::Identity();

    void refresh_step_factors() {
        const double l2 = lambda * lambda;
        Vp = Matrix2::Identity() + l2 * Mo + lambda * Mp;
        Vm = Matrix2::Identity() + l2 * Mo - lambda * Mp;
    }
};

// Assembles the 4x4 slice unitary on system (x) slice from the coefficients.
inline Matrix4 assemble_slice_unitary(const InteractionCoefficients& c) {
    const double l2 = c.lambda * c.lambda;
    Matrix4 m = Matrix4::Identity();
    m += kron(c.Mpm, sigma_plus() * sigma_minus());
    m += kron(c.Mp, c.lambda * sigma_plus());
    m += kron(c.Mm, c.lambda * sigma_minus());
    m += kron(c.Mo, l2 * Matrix2::Identity());
    return m;
}

// ||M_l^* M_l - I|| for the assembled slice unitary.
inline double check_unitarity(const InteractionCoefficients& c) {
    Matrix4 m = assemble_slice_unitary(c);
    return (m.adjoint() * m - Matrix4::Identity()).cwiseAbs().maxCoeff();
}

// Exponentiates the slice Hamiltonian on system (x) slice and solves the
// coefficient decomposition.  The slice-factor basis {dLambda, dA^*, dA, dt}
// determines the four coefficients uniquely: for each system entry (i,j)
// the slice block [[a,b],[c,d]] decomposes as Mo = d/lambda^2,
// Mpm = a - d, Mp = b/lambda, Mm = c/lambda.
inline InteractionCoefficients build_interaction_coeffs(const HamiltonianSpec& spec) {
    spec.validate();
    const double lambda = spec.lambda;
    const double l2 = lambda * lambda;

    ComplexMatrix h = kron(spec.L1, sigma_plus() * sigma_minus());
    h += kron(spec.L2, lambda * sigma_plus());
    h += kron(spec.L2.adjoint().eval(), lambda * sigma_minus());
    h += kron(spec.L3, l2 * Matrix2::Identity());

    Matrix4 m = mat_exp((-kI * h).eval());
    Matrix4 d = m - Matrix4::Identity();

    InteractionCoefficients c;
    c.lambda = lambda;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const Complex a = d(2 * i + 0, 2 * j + 0);
            const Complex b = d(2 * i + 0, 2 * j + 1);
            const Complex cc = d(2 * i + 1, 2 * j + 0);
            const Complex dd = d(2 * i + 1, 2 * j + 1);
            c.Mo(i, j) = dd / l2;
            c.Mpm(i, j) = a - dd;
            c.Mp(i, j) = b / lambda;
            c.Mm(i, j) = cc / lambda;
        }
    }
    c.refresh_step_factors();

    const double residual = (assemble_slice_unitary(c) - m).cwiseAbs().maxCoeff();
    if (residual > 1e-10)
        throw ModelConstructionError("build_interaction_coeffs: decomposition residual " +
                                     std::to_string(residual));
    return c;
}

// Dispersive coupling: the slice unitary rotates by angle g * lambda, which
// reproduces M^+ = (sin(g lambda)/lambda) sigma_z and friends.
inline HamiltonianSpec dispersive_spec(double g, double lambda) {
    HamiltonianSpec s;
    s.L2 = kI * g * sigma_z();
    s.lambda = lambda;
    return s;
}

// Spontaneous emission at rate parameter e.
inline HamiltonianSpec spontaneous_spec(double e, double lambda) {
    HamiltonianSpec s;
    s.L2 = kI * e * sigma_minus();
    s.lambda = lambda;
    return s;
}

// A commuting family of model instances, one per value of the uncertain
// parameter.
struct ParameterEnsemble {
    std::vector<double> values;
    std::vector<InteractionCoefficients> coeffs;

    int size() const { return static_cast<int>(values.size()); }

    void validate() const {
        if (values.empty() || values.size() != coeffs.size())
            throw InvalidInputError("ParameterEnsemble: values/coeffs mismatch");
        for (std::size_t i = 1; i < values.size(); ++i)
            if (!(values[i] > values[i - 1]))
                throw InvalidInputError("ParameterEnsemble: values must be strictly increasing");
    }
};

enum class ModelKind { dispersive, spontaneous, custom };

inline ParameterEnsemble make_ensemble(ModelKind kind, const std::vector<double>& values,
                                       double lambda) {
    ParameterEnsemble e;
    e.values = values;
    e.coeffs.reserve(values.size());
    for (double v : values) {
        HamiltonianSpec s = (kind == ModelKind::spontaneous) ? spontaneous_spec(v, lambda)
                                                             : dispersive_spec(v, lambda);
        e.coeffs.push_back(build_interaction_coeffs(s));
    }
    e.validate();
    return e;
}

// State on P (x) M stored as one (weight-carrying) 2x2 block per parameter
// value.  All initial states in use are diagonal in P, and the evolution is
// block-diagonal, so cross-parameter coherences are identically zero.
struct BlockDensityMatrix {
    std::vector<Matrix2> blocks;

    int size() const { return static_cast<int>(blocks.size()); }

    double total_trace() const {
        double t = 0.0;
        for (const auto& b : blocks) t += b.trace().real();
        return t;
    }

    bool is_psd(double tol = kTolPsd) const {
        for (const auto& b : blocks)
            if (!qrs::is_psd(b, tol)) return false;
        return true;
    }

    BlockDensityMatrix normalized() const {
        const double t = total_trace();
        if (!(t > 0.0)) throw DegenerateStateError("BlockDensityMatrix: total trace <= 0");
        BlockDensityMatrix out = *this;
        for (auto& b : out.blocks) b /= t;
        return out;
    }

    void scale(double factor) {
        for (auto& b : blocks) b *= factor;
    }
};

inline BlockDensityMatrix block_density(const std::vector<double>& weights,
                                        const Matrix2& system_block) {
    BlockDensityMatrix d;
    d.blocks.reserve(weights.size());
    for (double w : weights) {
        if (w < 0.0) throw InvalidInputError("block_density: negative weight");
        d.blocks.push_back(w * system_block);
    }
    return d;
}

struct UncertainModel {
    BlockDensityMatrix true_state;
    BlockDensityMatrix nominal_state;
    ParameterEnsemble ensemble;
};

inline Matrix2 plus_state() { return (Matrix2() << 0.5, 0.5, 0.5, 0.5).finished(); }

// Dispersive toy model: g_i = 0.4 + 0.03 i, sharply peaked true weights,
// uniform nominal weights, partially dephased nominal system state.
inline UncertainModel build_true_nominal_fig1(double lambda2 = 0.001) {
    std::vector<double> g(20);
    for (int i = 0; i < 20; ++i) g[i] = 0.4 + 0.03 * (i + 1);

    std::vector<double> true_w = {0, 0.01, 0.04, 0.1, 0.7, 0.1, 0.04, 0.01, 0, 0,
                                  0, 0,    0,    0,   0,   0,   0,    0,    0, 0};
    std::vector<double> nom_w(20, 1.0 / 20.0);

    Matrix2 nominal_system = (Matrix2() << 0.5, 0.25, 0.25, 0.5).finished();

    UncertainModel m;
    m.true_state = block_density(true_w, plus_state());
    m.nominal_state = block_density(nom_w, nominal_system);
    m.ensemble = make_ensemble(ModelKind::dispersive, g, std::sqrt(lambda2));
    return m;
}

// One-parameter family interpolating between the true density (beta = 0)
// and the uniform nominal of the dispersive model (beta = 1).
inline BlockDensityMatrix build_beta_nominal(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw InvalidInputError("build_beta_nominal: beta must be in [0, 1]");

    std::vector<double> w(20, 0.05 * beta);
    w[1 - 1] = 0.05 * beta;
    w[2 - 1] = 0.04 * beta + 0.01;
    w[3 - 1] = 0.01 * beta + 0.04;
    w[4 - 1] = -0.05 * beta + 0.1;
    w[5 - 1] = -0.65 * beta + 0.7;
    w[6 - 1] = -0.05 * beta + 0.1;
    w[7 - 1] = 0.01 * beta + 0.04;
    w[8 - 1] = 0.04 * beta + 0.01;

    const double off = 0.5 - 0.25 * beta;
    Matrix2 system = (Matrix2() << 0.5, off, off, 0.5).finished();
    return block_density(w, system);
}

// Spontaneous emission toy model: e_i = 0.2 + 0.04 i, true weights peaked
// at e_17 = 0.88, nominal system state equal to the true one.
inline UncertainModel build_true_nominal_fig3(double lambda2 = 0.001) {
    std::vector<double> e(20);
    for (int i = 0; i < 20; ++i) e[i] = 0.2 + 0.04 * (i + 1);

    std::vector<double> true_w(20, 0.0);
    true_w[15 - 1] = 0.01;
    true_w[16 - 1] = 0.04;
    true_w[17 - 1] = 0.9;
    true_w[18 - 1] = 0.04;
    true_w[19 - 1] = 0.01;
    std::vector<double> nom_w(20, 1.0 / 20.0);

    UncertainModel m;
    m.true_state = block_density(true_w, plus_state());
    m.nominal_state = block_density(nom_w, plus_state());
    m.ensemble = make_ensemble(ModelKind::spontaneous, e, std::sqrt(lambda2));
    return m;
}

}  // namespace qrs
