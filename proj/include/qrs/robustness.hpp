#pragma once

// Quantum relative entropy, the variational duality relation, the
// Golden-Thompson inequality, and the per-step conditional estimation
// error bound of the robustness theorem.

#include <cmath>
#include <limits>

#include "qrs/filter.hpp"
#include "qrs/matcore.hpp"
#include "qrs/model.hpp"

namespace qrs {

struct EntropyResult {
    double value = 0.0;          // nats; meaningful only when !infinite
    bool infinite = false;       // support of rho not contained in support of rho'
    double support_defect = 0.0; // eigen-mass of rho outside supp rho'

    double as_double() const {
        return infinite ? std::numeric_limits<double>::infinity() : value;
    }
};

namespace detail {

// Unnormalized core: Tr[rho (log rho - log rho')] on the support of rho',
// with the mass of rho outside that support reported separately.  Inputs
// must be Hermitian PSD; trace normalization is checked by the callers
// that require it.
inline void accumulate_relative_entropy(const ComplexMatrix& rho, const ComplexMatrix& rho_prime,
                                        double tol_supp_rel, double& value,
                                        double& support_defect) {
    HermitianEig er = eig_hermitian(rho);
    HermitianEig ep = eig_hermitian(rho_prime);

    const double tol_r = support_tol(er.values.size() ? er.values.maxCoeff() : 0.0);
    double tol_p = tol_supp_rel * std::max(ep.values.size() ? ep.values.maxCoeff() : 0.0, 0.0);

    // Tr[rho log rho] over the support of rho.
    for (Eigen::Index k = 0; k < er.values.size(); ++k) {
        const double lam = er.values[k];
        if (lam > tol_r) value += lam * std::log(lam);
    }

    // Tr[rho log rho'] over the support of rho'; everything rho puts
    // outside that support is a defect.
    for (Eigen::Index k = 0; k < ep.values.size(); ++k) {
        const double lam = ep.values[k];
        const double mass = (ep.vectors.col(k).adjoint() * rho * ep.vectors.col(k)).value().real();
        if (lam > tol_p) {
            value -= mass * std::log(lam);
        } else {
            support_defect += std::max(mass, 0.0);
        }
    }
}

inline void require_density(const ComplexMatrix& rho, const char* name) {
    if (!is_hermitian(rho)) throw InvalidInputError(std::string(name) + ": not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > 1e-8)
        throw InvalidInputError(std::string(name) + ": trace must be 1");
}

}  // namespace detail

// R(rho || rho') = Tr[rho (log rho - log rho')] when supp rho is contained
// in supp rho', +infinity otherwise.  Both inputs must be normalized.
inline EntropyResult relative_entropy(const ComplexMatrix& rho, const ComplexMatrix& rho_prime,
                                      double tol_supp_rel = kTolSuppRel) {
    detail::require_density(rho, "relative_entropy: rho");
    detail::require_density(rho_prime, "relative_entropy: rho'");

    EntropyResult out;
    detail::accumulate_relative_entropy(rho, rho_prime, tol_supp_rel, out.value,
                                        out.support_defect);
    if (out.support_defect > tol_supp_rel) {
        out.infinite = true;
        out.value = 0.0;
    }
    return out;
}

// Block-diagonal version; both states share the block structure, so the
// entropy splits into a sum over blocks of 2x2 computations.
inline EntropyResult relative_entropy(const BlockDensityMatrix& rho,
                                      const BlockDensityMatrix& rho_prime,
                                      double tol_supp_rel = kTolSuppRel) {
    if (rho.size() != rho_prime.size())
        throw InvalidInputError("relative_entropy: block count mismatch");
    if (std::abs(rho.total_trace() - 1.0) > 1e-8 || std::abs(rho_prime.total_trace() - 1.0) > 1e-8)
        throw InvalidInputError("relative_entropy: states must be normalized");

    EntropyResult out;
    for (int i = 0; i < rho.size(); ++i) {
        detail::accumulate_relative_entropy(rho.blocks[i], rho_prime.blocks[i], tol_supp_rel,
                                            out.value, out.support_defect);
    }
    if (out.support_defect > tol_supp_rel) {
        out.infinite = true;
        out.value = 0.0;
    }
    return out;
}

// |R(a (x) b || a' (x) b') - R(a||a') - R(b||b')|.
inline double entropy_additivity_check(const ComplexMatrix& a, const ComplexMatrix& a_prime,
                                       const ComplexMatrix& b, const ComplexMatrix& b_prime) {
    EntropyResult joint = relative_entropy(kron(a, b), kron(a_prime, b_prime));
    EntropyResult ra = relative_entropy(a, a_prime);
    EntropyResult rb = relative_entropy(b, b_prime);
    if (joint.infinite || ra.infinite || rb.infinite)
        return (joint.infinite == (ra.infinite || rb.infinite))
                   ? 0.0
                   : std::numeric_limits<double>::infinity();
    return std::abs(joint.value - ra.value - rb.value);
}

struct DualityCheck {
    double lhs = 0.0;            // log Tr e^{A + log rho'}
    double rhs = 0.0;            // Tr(rho_o A) - R(rho_o || rho') at the maximizer
    double maximizer_gap = 0.0;  // |lhs - rhs|
    double max_violation = 0.0;  // max over sampled rho of Tr(rho A) - R(rho||rho') - lhs
};

// Verifies the variational identity log Tr e^{A + log rho'}
// = max_rho [ Tr(rho A) - R(rho || rho') ] with maximizer
// rho_o = e^{A + log rho'} / Tr e^{A + log rho'}, and samples random
// densities to confirm they do not exceed the left-hand side.
inline DualityCheck duality_check(const ComplexMatrix& a, const ComplexMatrix& rho_prime,
                                  int n_random = 100, std::uint64_t seed = 20259) {
    if (!is_hermitian(a)) throw InvalidInputError("duality_check: A must be Hermitian");
    detail::require_density(rho_prime, "duality_check: rho'");

    const ComplexMatrix log_rp = mat_log_psd(rho_prime, support_tol(1.0));
    const ComplexMatrix expm = mat_exp_hermitian((a + log_rp).eval());
    const double z = expm.trace().real();

    DualityCheck out;
    out.lhs = std::log(z);
    ComplexMatrix rho_o = expm / z;
    out.rhs = trace_product(rho_o, a).real() - relative_entropy(rho_o, rho_prime).value;
    out.maximizer_gap = std::abs(out.lhs - out.rhs);

    std::mt19937_64 rng(seed);
    const int dim = static_cast<int>(a.rows());
    for (int k = 0; k < n_random; ++k) {
        ComplexMatrix rho = random_density(dim, rng);
        const double val = trace_product(rho, a).real() - relative_entropy(rho, rho_prime).value;
        out.max_violation = std::max(out.max_violation, val - out.lhs);
    }
    return out;
}

struct GoldenThompsonCheck {
    double lhs = 0.0;  // Tr e^{A + log rho'}
    double rhs = 0.0;  // Tr(e^A rho')
};

inline GoldenThompsonCheck golden_thompson_check(const ComplexMatrix& a,
                                                 const ComplexMatrix& rho_prime) {
    if (!is_hermitian(a)) throw InvalidInputError("golden_thompson_check: A must be Hermitian");
    const ComplexMatrix log_rp = mat_log_psd(rho_prime, support_tol(1.0));
    GoldenThompsonCheck out;
    out.lhs = mat_exp_hermitian((a + log_rp).eval()).trace().real();
    out.rhs = trace_product(mat_exp_hermitian(a), rho_prime).real();
    return out;
}

struct ConditionalErrorBound {
    double eps = 0.0;        // Tr[rho_l^true (X_e - u I)^2]
    double eps_prime = 0.0;  // +infinity when the entropy term is infinite
    bool bound_infinite = false;
};

// Conditional estimation error and its guaranteed upper bound: the true
// filter state is compared against the nominal risk-sensitive one,
//   eps' = (1/mu2) log Tr[rho^{mu,nom} e^{mu2 K(u)}] + (1/mu2) R(rho^true || rho^{mu,nom}).
inline ConditionalErrorBound conditional_error_bound(const FilterState& true_state,
                                                     const FilterState& nom_rs_state, double u,
                                                     const RiskParams& rp, const Observable& obs) {
    rp.validate();
    BlockDensityMatrix rho_true = true_state.state.normalized();
    BlockDensityMatrix rho_nom = nom_rs_state.state.normalized();

    ConditionalErrorBound out;
    const Matrix2 k = obs.quadratic_cost(u);
    for (const auto& b : rho_true.blocks) out.eps += trace_product(b, k).real();

    const Matrix2 ek = obs.exp_cost(rp.mu2, u);
    double tr = 0.0;
    for (const auto& b : rho_nom.blocks) tr += trace_product(b, ek).real();

    EntropyResult rel = relative_entropy(rho_true, rho_nom);
    if (rel.infinite) {
        out.bound_infinite = true;
        out.eps_prime = std::numeric_limits<double>::infinity();
    } else {
        out.eps_prime = (std::log(tr) + rel.value) / rp.mu2;
    }
    return out;
}

}  // namespace qrs
