#pragma once

// The two measurement-update recursions: the risk-neutral unnormalized
// filter and the risk-sensitive unnormalized filter, plus the normalized
// estimator and the per-step suboptimal risk-sensitive estimator.
//
// Both recursions are implemented in the factored form
//     rho' = V_s H V_s^*,   V_s = I + lambda^2 Mo + s lambda Mp,  s = +-1,
// with H = rho for the risk-neutral step and
// H = e^{mu1 lambda^2 K(u)/2} rho e^{mu1 lambda^2 K(u)/2} for the
// risk-sensitive one.  The factored form coincides with the expanded
// increment equation entrywise and keeps every state exactly PSD.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "qrs/matcore.hpp"
#include "qrs/model.hpp"

namespace qrs {

// Measurement outcomes carry sign +-1; the physical increment is sign * lambda.
using Outcome = int;
inline constexpr Outcome kPlus = +1;
inline constexpr Outcome kMinus = -1;

struct RiskParams {
    double mu1 = 0.0;  // running-cost weight, enters as mu1 * lambda^2 per step
    double mu2 = 0.0;  // terminal weight

    void validate() const {
        if (!(mu1 >= 0.0)) throw InvalidInputError("RiskParams: mu1 must be >= 0");
        if (!(mu2 > 0.0)) throw InvalidInputError("RiskParams: mu2 must be > 0");
    }
};

// Estimated system observable with its eigendecomposition cached; K(u) and
// its exponentials are evaluated in the eigenbasis, which is exact for 2x2.
class Observable {
public:
    explicit Observable(const Matrix2& x) : x_(hermitize(x)) {
        if (!is_hermitian(x)) throw InvalidInputError("Observable: X_e must be Hermitian");
        HermitianEig eig = eig_hermitian(x_);
        evals_ = eig.values;
        evecs_ = eig.vectors;
    }

    const Matrix2& matrix() const { return x_; }
    double eig_min() const { return evals_[0]; }
    double eig_max() const { return evals_[1]; }

    // K(u) = (X_e - u I)^2.
    Matrix2 quadratic_cost(double u) const {
        Matrix2 d = x_ - u * Matrix2::Identity();
        return d * d;
    }

    // e^{s K(u)}.
    Matrix2 exp_cost(double s, double u) const {
        const double a = std::exp(s * square(evals_[0] - u));
        const double b = std::exp(s * square(evals_[1] - u));
        return evecs_ * Eigen::Vector2d(a, b).asDiagonal() * evecs_.adjoint();
    }

    // e^{s K(u)} - I evaluated stably through expm1.
    Matrix2 exp_cost_minus_identity(double s, double u) const {
        const double a = std::expm1(s * square(evals_[0] - u));
        const double b = std::expm1(s * square(evals_[1] - u));
        return evecs_ * Eigen::Vector2d(a, b).asDiagonal() * evecs_.adjoint();
    }

    // Weights of a block state in the eigenbasis: (w_min, w_max) with
    // w_k = sum_i <v_k| B_i |v_k>.  Everything the suboptimal estimator
    // needs from the state.
    Eigen::Vector2d basis_weights(const BlockDensityMatrix& state) const {
        Eigen::Vector2d w = Eigen::Vector2d::Zero();
        for (const auto& b : state.blocks) {
            w[0] += (evecs_.col(0).adjoint() * b * evecs_.col(0)).value().real();
            w[1] += (evecs_.col(1).adjoint() * b * evecs_.col(1)).value().real();
        }
        return w;
    }

private:
    static double square(double v) { return v * v; }

    Matrix2 x_;
    Eigen::Vector2d evals_;
    Matrix2 evecs_;
};

// Unnormalized information state.  step counts applied measurement updates;
// last_estimate is the estimate emitted at the current step (absent before
// the first one).  log_scale records rescalings applied to avoid underflow;
// the represented state is e^{log_scale} * state.
struct FilterState {
    BlockDensityMatrix state;
    long step = 0;
    std::optional<double> last_estimate;
    double log_scale = 0.0;
};

inline constexpr double kRescaleTraceFloor = 1e-250;

inline FilterState make_filter_state(const BlockDensityMatrix& initial) {
    if (!(initial.total_trace() > 0.0))
        throw InvalidInputError("make_filter_state: initial state has no mass");
    return FilterState{initial, 0, std::nullopt, 0.0};
}

namespace detail {

inline void rescale_if_tiny(FilterState& s) {
    const double t = s.state.total_trace();
    if (t > 0.0 && t < kRescaleTraceFloor) {
        s.state.scale(1.0 / t);
        s.log_scale += std::log(t);
    }
}

}  // namespace detail

// Risk-neutral update: per block, rho' = V_s rho V_s^*.
inline FilterState rn_step(const FilterState& s, const ParameterEnsemble& ens, Outcome dy) {
    FilterState out = s;
    out.step = s.step + 1;
    for (int i = 0; i < ens.size(); ++i) {
        const Matrix2& v = (dy == kPlus) ? ens.coeffs[i].Vp : ens.coeffs[i].Vm;
        out.state.blocks[i] = hermitize(v * s.state.blocks[i] * v.adjoint());
    }
    detail::rescale_if_tiny(out);
    return out;
}

// Risk-sensitive update: per block, rho' = V_s H V_s^* with the running-cost
// sandwich H = e^{mu1 lambda^2 K(u_prev)/2} rho e^{...}.  The step from l = 0
// to l = 1 applies no weighting (the cost product starts one step later), so
// u_prev is ignored there.
inline FilterState rs_step(const FilterState& s, const ParameterEnsemble& ens,
                           const RiskParams& rp, const Observable& obs, double u_prev,
                           Outcome dy) {
    rp.validate();
    const bool weight = (s.step >= 1) && rp.mu1 > 0.0;
    FilterState out = s;
    out.step = s.step + 1;
    Matrix2 e = Matrix2::Identity();
    if (weight) {
        const double l2 = ens.coeffs.front().lambda * ens.coeffs.front().lambda;
        e = obs.exp_cost(rp.mu1 * l2 / 2.0, u_prev);
    }
    for (int i = 0; i < ens.size(); ++i) {
        const Matrix2& v = (dy == kPlus) ? ens.coeffs[i].Vp : ens.coeffs[i].Vm;
        Matrix2 h = weight ? hermitize(e * s.state.blocks[i] * e) : s.state.blocks[i];
        out.state.blocks[i] = hermitize(v * h * v.adjoint());
    }
    detail::rescale_if_tiny(out);
    return out;
}

// Reference implementations of the same updates in expanded increment form,
// d rho = Lbar^mu(rho, u) dt + Jbar^mu(rho, u) dy.  Used as a cross-check
// against the factored form; (H - rho)/lambda^2 is evaluated through expm1
// so that the comparison is not dominated by cancellation.
inline FilterState rs_step_expanded(const FilterState& s, const ParameterEnsemble& ens,
                                    const RiskParams& rp, const Observable& obs, double u_prev,
                                    Outcome dy) {
    rp.validate();
    const bool weight = (s.step >= 1) && rp.mu1 > 0.0;
    FilterState out = s;
    out.step = s.step + 1;

    const double lambda = ens.coeffs.front().lambda;
    const double l2 = lambda * lambda;
    Matrix2 e = Matrix2::Identity();
    Matrix2 em1 = Matrix2::Zero();  // e - I
    if (weight) {
        e = obs.exp_cost(rp.mu1 * l2 / 2.0, u_prev);
        em1 = obs.exp_cost_minus_identity(rp.mu1 * l2 / 2.0, u_prev);
    }

    for (int i = 0; i < ens.size(); ++i) {
        const Matrix2& mo = ens.coeffs[i].Mo;
        const Matrix2& mp = ens.coeffs[i].Mp;
        const Matrix2& rho = s.state.blocks[i];

        Matrix2 h = weight ? hermitize(e * rho * e) : rho;
        // (H - rho)/lambda^2 = (em1 rho em1 + em1 rho + rho em1)/lambda^2
        Matrix2 hm = weight
                         ? Matrix2(((em1 * rho * em1 + em1 * rho + rho * em1) / l2).eval())
                         : Matrix2(Matrix2::Zero());

        Matrix2 lbar = mp * h * mp.adjoint() + l2 * mo * h * mo.adjoint() + mo * h +
                       h * mo.adjoint() + hm;
        Matrix2 jbar = l2 * mo * h * mp.adjoint() + l2 * mp * h * mo.adjoint() + mp * h +
                       h * mp.adjoint();
        out.state.blocks[i] = rho + l2 * lbar + static_cast<double>(dy) * lambda * jbar;
    }
    detail::rescale_if_tiny(out);
    return out;
}

inline FilterState rn_step_expanded(const FilterState& s, const ParameterEnsemble& ens,
                                    Outcome dy) {
    RiskParams rp{0.0, 1.0};
    Observable dummy(sigma_z());
    return rs_step_expanded(s, ens, rp, dummy, 0.0, dy);
}

// Normalized estimate sum_i Tr(B_i X) / sum_i Tr(B_i).
inline double estimate(const FilterState& s, const Matrix2& x) {
    if (!is_hermitian(x)) throw InvalidInputError("estimate: observable must be Hermitian");
    double num = 0.0;
    double den = 0.0;
    for (const auto& b : s.state.blocks) {
        num += trace_product(b, x).real();
        den += b.trace().real();
    }
    if (!(den > kRescaleTraceFloor) || !std::isfinite(den))
        throw DegenerateStateError("estimate: filter state has lost its mass");
    return num / den;
}

namespace detail {

// argmin over [x0 - 1, x1 + 1] of w0 e^{mu2 (x0 - u)^2} + w1 e^{mu2 (x1 - u)^2}:
// 201-point grid scan followed by golden-section refinement to |du| <= 1e-8.
// Grid ties break toward the smallest u.
inline double minimize_exp_pair(double w0, double w1, double x0, double x1, double mu2) {
    auto cost = [&](double u) {
        return w0 * std::exp(mu2 * (x0 - u) * (x0 - u)) +
               w1 * std::exp(mu2 * (x1 - u) * (x1 - u));
    };

    const double lo = x0 - 1.0;
    const double hi = x1 + 1.0;
    constexpr int kGridPoints = 201;
    const double h = (hi - lo) / (kGridPoints - 1);

    int best = 0;
    double best_val = cost(lo);
    for (int k = 1; k < kGridPoints; ++k) {
        const double v = cost(lo + k * h);
        if (v < best_val) {
            best_val = v;
            best = k;
        }
    }

    double a = std::max(lo, lo + (best - 1) * h);
    double b = std::min(hi, lo + (best + 1) * h);
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = cost(c);
    double fd = cost(d);
    while (b - a > 1e-8) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = cost(d);
        }
    }
    const double refined = (a + b) / 2.0;
    return cost(refined) <= best_val ? refined : lo + best * h;
}

}  // namespace detail

// argmin over real u of G(u) = sum_i Tr[B_i e^{mu2 (X_e - u)^2}].  In the
// eigenbasis of X_e this is a two-term exponential sum over the basis
// weights of the state, minimized on the spectral hull plus margin.
inline double suboptimal_estimate(const FilterState& s, const RiskParams& rp,
                                  const Observable& obs) {
    rp.validate();
    const double total = s.state.total_trace();
    if (!(total > kRescaleTraceFloor) || !std::isfinite(total))
        throw DegenerateStateError("suboptimal_estimate: filter state has lost its mass");

    const Eigen::Vector2d w = obs.basis_weights(s.state);
    return detail::minimize_exp_pair(w[0], w[1], obs.eig_min(), obs.eig_max(), rp.mu2);
}

}  // namespace qrs
