#pragma once

// Brute-force ground truth at tiny N: the full system (x) field state on a
// 2^{N+1}-dimensional space evolved by the product of slice unitaries.
// Everything here enumerates records exhaustively and is meant for
// validation, not for experiment-scale runs.

#include <cstdint>
#include <vector>

#include "qrs/matcore.hpp"
#include "qrs/model.hpp"
#include "qrs/policies.hpp"
#include "qrs/robustness.hpp"

namespace qrs {

inline constexpr int kOracleMaxSteps = 9;  // 1024-dimensional full space

// Index layout: idx = s * 2^N + b, where b's bit (N - l) carries slice l.
// Slice 1 is the most significant slice bit, matching a fold-left Kronecker
// product system (x) slice_1 (x) ... (x) slice_N.
inline ComplexMatrix embed_pair(const Matrix4& m4, int slice, int steps) {
    const int dim = 1 << (steps + 1);
    const int p = steps - slice;  // bit position of this slice
    const int rest_count = 1 << (steps - 1);
    ComplexMatrix out = ComplexMatrix::Zero(dim, dim);

    auto insert_bit = [p](int rest, int bit) {
        const int low = rest & ((1 << p) - 1);
        const int high = rest >> p;
        return (high << (p + 1)) | (bit << p) | low;
    };

    for (int rest = 0; rest < rest_count; ++rest) {
        for (int s = 0; s < 2; ++s)
            for (int b = 0; b < 2; ++b)
                for (int sp = 0; sp < 2; ++sp)
                    for (int bp = 0; bp < 2; ++bp) {
                        const int row = (s << steps) | insert_bit(rest, b);
                        const int col = (sp << steps) | insert_bit(rest, bp);
                        out(row, col) = m4(2 * s + b, 2 * sp + bp);
                    }
    }
    return out;
}

// rho (x) (Phi Phi^*)^{(x) N}.
inline ComplexMatrix full_density(const ComplexMatrix& rho_sys, int steps) {
    ComplexMatrix vac = vacuum_vector() * vacuum_vector().adjoint();
    ComplexMatrix out = rho_sys;
    for (int l = 0; l < steps; ++l) out = kron(out, vac);
    return out;
}

// Running unitaries U(0..N) for one coefficient set, U(l) = M_l U(l-1).
struct FullStateSimulator {
    int steps = 0;
    double lambda = 0.0;
    std::vector<ComplexMatrix> u;  // u[l] = U(l)

    int dim() const { return 1 << (steps + 1); }
};

inline FullStateSimulator evolve_full(const InteractionCoefficients& c, int steps) {
    if (steps < 1 || steps > kOracleMaxSteps)
        throw CapacityError("evolve_full: steps must be in 1..9");
    FullStateSimulator sim;
    sim.steps = steps;
    sim.lambda = c.lambda;
    sim.u.reserve(steps + 1);
    sim.u.push_back(ComplexMatrix::Identity(sim.dim(), sim.dim()));
    const Matrix4 m4 = assemble_slice_unitary(c);
    for (int l = 1; l <= steps; ++l) {
        ComplexMatrix ml = embed_pair(m4, l, steps);
        sim.u.push_back(ml * sim.u.back());
    }
    return sim;
}

namespace detail {

// Tr[ B * (X (x) K_r (x) I) ] with K_r the projector product of the first
// len outcomes; entries of K_r are 2^{-len} times a sign pattern.
inline double trace_with_record(const ComplexMatrix& b, const Matrix2& x, const Record& record,
                                int steps) {
    const int len = static_cast<int>(record.size());
    const int nbits = steps;
    const int rest_mask = (1 << (steps - len)) - 1;  // slices after len
    const int dim = static_cast<int>(b.rows());

    Complex acc = 0.0;
    for (int row = 0; row < dim; ++row) {
        const int s = row >> nbits;
        const int bb = row & ((1 << nbits) - 1);
        for (int col = 0; col < dim; ++col) {
            const int sp = col >> nbits;
            const int bp = col & ((1 << nbits) - 1);
            if (((bb ^ bp) & rest_mask) != 0) continue;
            int parity = 0;
            for (int l = 1; l <= len; ++l) {
                if (record[l - 1] < 0) {
                    const int p = steps - l;
                    parity ^= ((bb >> p) & 1) ^ ((bp >> p) & 1);
                }
            }
            const double sign = parity ? -1.0 : 1.0;
            // (X (x) K_r (x) I)[(sp,bp),(s,bb)]
            acc += b(row, col) * x(sp, s) * sign;
        }
    }
    return acc.real() * std::ldexp(1.0, -len);
}

}  // namespace detail

inline Record record_from_index(std::uint32_t idx, int len) {
    Record r(len);
    for (int l = 0; l < len; ++l) r[l] = (idx >> l) & 1u ? -1 : +1;
    return r;
}

// Probability of a record prefix under the physical state rho_sys:
// Tr[rho_full U(l)^* (I (x) K_r) U(l)].  rho_sys may be unnormalized.
inline double record_probability(const FullStateSimulator& sim, const ComplexMatrix& rho_sys,
                                 const Record& record) {
    const int len = static_cast<int>(record.size());
    if (len > sim.steps) throw InvalidInputError("record_probability: record longer than N");
    ComplexMatrix b = sim.u[len] * full_density(rho_sys, sim.steps) * sim.u[len].adjoint();
    return detail::trace_with_record(b, Matrix2::Identity(), record, sim.steps);
}

// All 2^N record probabilities, indexed by record_from_index.
inline std::vector<double> record_distribution(const FullStateSimulator& sim,
                                               const ComplexMatrix& rho_sys) {
    ComplexMatrix b =
        sim.u[sim.steps] * full_density(rho_sys, sim.steps) * sim.u[sim.steps].adjoint();
    std::vector<double> probs(std::size_t{1} << sim.steps);
    for (std::uint32_t idx = 0; idx < probs.size(); ++idx) {
        probs[idx] =
            detail::trace_with_record(b, Matrix2::Identity(), record_from_index(idx, sim.steps),
                                      sim.steps);
    }
    return probs;
}

// Conditional expectation of the system observable X given a record prefix.
inline double conditional_expectation(const FullStateSimulator& sim, const ComplexMatrix& rho_sys,
                                      const Matrix2& x, const Record& record) {
    const int len = static_cast<int>(record.size());
    if (len > sim.steps)
        throw InvalidInputError("conditional_expectation: record longer than N");
    ComplexMatrix b = sim.u[len] * full_density(rho_sys, sim.steps) * sim.u[len].adjoint();
    const double den = detail::trace_with_record(b, Matrix2::Identity(), record, sim.steps);
    if (den <= 1e-14)
        throw UndefinedConditionalError("conditional_expectation: zero-probability record");
    const double num = detail::trace_with_record(b, x, record, sim.steps);
    return num / den;
}

namespace detail {

// sum_r u(r) * (I (x) K_r (x) I) over records of length len, as a dense
// operator on the full space.
inline ComplexMatrix estimate_operator(const RecordPolicy& policy, int len, int steps) {
    const int slice_dim = 1 << len;
    ComplexMatrix q = ComplexMatrix::Zero(slice_dim, slice_dim);
    for (std::uint32_t idx = 0; idx < (1u << len); ++idx) {
        Record r = record_from_index(idx, len);
        ComplexMatrix k = ComplexMatrix::Identity(1, 1);
        for (int l = 0; l < len; ++l) k = kron(k, r[l] > 0 ? proj_plus() : proj_minus());
        q += policy(r) * k;
    }
    ComplexMatrix out = kron(Matrix2::Identity(), q);
    if (len < steps)
        out = kron(out, ComplexMatrix::Identity(1 << (steps - len), 1 << (steps - len)));
    return out;
}

// S_l = j_l(X_e) - u_l as a full-space Hermitian operator.
inline ComplexMatrix error_operator(const FullStateSimulator& sim, const Observable& obs,
                                    const RecordPolicy& policy, int l) {
    const int dim = sim.dim();
    ComplexMatrix t = kron(obs.matrix(), ComplexMatrix::Identity(dim / 2, dim / 2));
    t -= estimate_operator(policy, l, sim.steps);
    return sim.u[l].adjoint() * t * sim.u[l];
}

// R(N) = e^{(mu1 lambda^2/2) S_{N-1}^2} ... e^{(mu1 lambda^2/2) S_1^2}.
inline ComplexMatrix risk_weight_operator(const FullStateSimulator& sim, const Observable& obs,
                                          const RecordPolicy& policy, const RiskParams& rp) {
    const int dim = sim.dim();
    const double l2 = sim.lambda * sim.lambda;
    ComplexMatrix r = ComplexMatrix::Identity(dim, dim);
    for (int i = 1; i <= sim.steps - 1; ++i) {
        ComplexMatrix s = error_operator(sim, obs, policy, i);
        r = mat_exp_hermitian((0.5 * rp.mu1 * l2 * s * s).eval()) * r;
    }
    return r;
}

// G = R(N)^* e^{mu2 S_N^2} R(N); the operator whose expectation is the cost.
inline ComplexMatrix cost_operator(const FullStateSimulator& sim, const Observable& obs,
                                   const RecordPolicy& policy, const RiskParams& rp) {
    ComplexMatrix r = risk_weight_operator(sim, obs, policy, rp);
    ComplexMatrix s = error_operator(sim, obs, policy, sim.steps);
    ComplexMatrix e = mat_exp_hermitian((rp.mu2 * s * s).eval());
    return r.adjoint() * e * r;
}

}  // namespace detail

// Full-space risk-sensitive cost F = P[ R(N)^* e^{mu2 |j_N(X_e) - u_N|^2} R(N) ].
inline double risk_cost_full(const FullStateSimulator& sim, const ComplexMatrix& rho_sys,
                             const RecordPolicy& policy, const RiskParams& rp,
                             const Observable& obs) {
    rp.validate();
    ComplexMatrix g = detail::cost_operator(sim, obs, policy, rp);
    return trace_product(full_density(rho_sys, sim.steps), g).real();
}

// V^mu(N) from the commutant-side difference equation; used to validate
// P[U^mu(N)^* X U^mu(N)] = P[V^mu(N)^* X V^mu(N)].
inline ComplexMatrix v_mu_full(const FullStateSimulator& sim, const InteractionCoefficients& c,
                               const Observable& obs, const RecordPolicy& policy,
                               const RiskParams& rp) {
    const int dim = sim.dim();
    const int rest = dim / 2;
    const double l2 = sim.lambda * sim.lambda;
    const ComplexMatrix xe_full = kron(obs.matrix(), ComplexMatrix::Identity(rest, rest));
    const ComplexMatrix mo_full = kron(c.Mo, ComplexMatrix::Identity(rest, rest));
    const ComplexMatrix mp_full = kron(c.Mp, ComplexMatrix::Identity(rest, rest));

    ComplexMatrix v = ComplexMatrix::Identity(dim, dim);
    for (int l = 1; l <= sim.steps; ++l) {
        ComplexMatrix e = ComplexMatrix::Identity(dim, dim);
        if (l >= 2 && rp.mu1 > 0.0) {
            ComplexMatrix s = xe_full - detail::estimate_operator(policy, l - 1, sim.steps);
            e = mat_exp_hermitian((0.5 * rp.mu1 * l2 * s * s).eval());
        }
        Matrix2 dw2 = sim.lambda * sigma_x();
        ComplexMatrix dw = embed_pair(kron(Matrix2::Identity(), dw2), l, sim.steps);
        ComplexMatrix a = l2 * mo_full * e + (e - ComplexMatrix::Identity(dim, dim)) +
                          mp_full * e * dw;
        v = (ComplexMatrix::Identity(dim, dim) + a) * v;
    }
    return v;
}

// Ensemble wrapper: one simulator per parameter value; densities are block
// states aligned with the ensemble.
struct EnsembleOracle {
    ParameterEnsemble ensemble;
    std::vector<FullStateSimulator> sims;

    EnsembleOracle(const ParameterEnsemble& ens, int steps) : ensemble(ens) {
        ensemble.validate();
        sims.reserve(ens.size());
        for (const auto& c : ens.coeffs) sims.push_back(evolve_full(c, steps));
    }

    int steps() const { return sims.front().steps; }

    double record_probability(const BlockDensityMatrix& density, const Record& record) const {
        double p = 0.0;
        for (int i = 0; i < ensemble.size(); ++i)
            p += qrs::record_probability(sims[i], density.blocks[i], record);
        return p;
    }

    std::vector<double> record_distribution(const BlockDensityMatrix& density) const {
        std::vector<double> probs(std::size_t{1} << steps(), 0.0);
        for (int i = 0; i < ensemble.size(); ++i) {
            std::vector<double> block = qrs::record_distribution(sims[i], density.blocks[i]);
            for (std::size_t k = 0; k < probs.size(); ++k) probs[k] += block[k];
        }
        return probs;
    }

    double conditional_expectation(const BlockDensityMatrix& density, const Matrix2& x,
                                   const Record& record) const {
        double num = 0.0;
        double den = 0.0;
        for (int i = 0; i < ensemble.size(); ++i) {
            ComplexMatrix b = sims[i].u[record.size()] *
                              full_density(density.blocks[i], steps()) *
                              sims[i].u[record.size()].adjoint();
            den += detail::trace_with_record(b, Matrix2::Identity(), record, steps());
            num += detail::trace_with_record(b, x, record, steps());
        }
        if (den <= 1e-14)
            throw UndefinedConditionalError("conditional_expectation: zero-probability record");
        return num / den;
    }

    double risk_cost(const BlockDensityMatrix& density, const RecordPolicy& policy,
                     const RiskParams& rp, const Observable& obs) const {
        double f = 0.0;
        for (int i = 0; i < ensemble.size(); ++i)
            f += risk_cost_full(sims[i], density.blocks[i], policy, rp, obs);
        return f;
    }

    struct RobustnessBound {
        double lhs = 0.0;
        double rhs = 0.0;
        bool rhs_infinite = false;
    };

    // Theorem robustness-1 at desk scale: the true-state expectation of the
    // log cost operator against the log of the nominal expectation plus the
    // relative entropy of the initial densities.
    RobustnessBound verify_robustness1(const BlockDensityMatrix& true_density,
                                       const BlockDensityMatrix& nom_density,
                                       const RecordPolicy& policy, const RiskParams& rp,
                                       const Observable& obs) const {
        rp.validate();
        RobustnessBound out;
        double nom_expect = 0.0;
        for (int i = 0; i < ensemble.size(); ++i) {
            ComplexMatrix g = detail::cost_operator(sims[i], obs, policy, rp);
            ComplexMatrix log_g = mat_log_psd(g, 0.0);
            out.lhs +=
                trace_product(full_density(true_density.blocks[i], steps()), log_g).real();
            nom_expect +=
                trace_product(full_density(nom_density.blocks[i], steps()), g).real();
        }
        EntropyResult rel = relative_entropy(true_density.normalized(), nom_density.normalized());
        if (rel.infinite) {
            out.rhs_infinite = true;
            out.rhs = std::numeric_limits<double>::infinity();
        } else {
            out.rhs = std::log(nom_expect) + rel.value;
        }
        return out;
    }
};

}  // namespace qrs
