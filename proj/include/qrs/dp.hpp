#pragma once

// Exact finite-horizon dynamic programming over the record tree for the
// optimal risk-sensitive estimator at tiny N.  Controls are restricted to a
// finite action set per node; the recursion searches all adapted policies
// over that set by depth-first enumeration, so the returned cost is the
// exact optimum of that policy class.
//
// The action set at a node is the caller's u_grid, optionally extended with
// per-prefix actions of reference policies (so that policy dominance checks
// become exact set-inclusion arguments) and, at the terminal stage, with the
// continuum minimizer of the leaf cost.

#include <cstdint>
#include <vector>

#include "qrs/filter.hpp"
#include "qrs/policies.hpp"

namespace qrs {

inline constexpr int kDpMaxSteps = 12;

struct DpOptions {
    std::vector<const PolicyTable*> extra_action_tables;
    bool refine_terminal = false;
};

struct DpResult {
    double optimal_cost = 0.0;
    PolicyTable policy;  // chosen action per record prefix, lengths 1..N
};

namespace detail {

// Key of a record prefix in the prefix_index encoding: (1 << len) | bits,
// bit j-1 set when step j came out -lambda.  The root key is 1.
inline std::uint32_t child_key(std::uint32_t key, int depth, Outcome dy) {
    const std::uint32_t bits = key ^ (1u << depth);
    return (1u << (depth + 1)) | bits | (dy == kMinus ? (1u << depth) : 0u);
}

struct DpContext {
    const ParameterEnsemble* ens;
    int steps;
    RiskParams rp;
    const Observable* obs;
    std::vector<double> grid;
    DpOptions options;

    double lambda2;
    std::vector<Matrix2> sandwich;              // e^{mu1 lambda^2 K(u)/2} per grid u
    std::vector<Eigen::Vector2d> terminal_exp;  // terminal exponentials per grid u

    Matrix2 sandwich_for(double u) const { return obs->exp_cost(rp.mu1 * lambda2 / 2.0, u); }
};

using Blocks = std::vector<Matrix2>;

inline Blocks advance(const DpContext& ctx, const Blocks& state, const Matrix2* e, Outcome dy) {
    Blocks out(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        const auto& c = ctx.ens->coeffs[i];
        const Matrix2& v = (dy == kPlus) ? c.Vp : c.Vm;
        if (e) {
            out[i] = v * (*e) * state[i] * (*e) * v.adjoint();
        } else {
            out[i] = v * state[i] * v.adjoint();
        }
    }
    return out;
}

inline Eigen::Vector2d basis_weights(const DpContext& ctx, const Blocks& state) {
    BlockDensityMatrix d;
    d.blocks = state;
    return ctx.obs->basis_weights(d);
}

inline double terminal_value(const DpContext& ctx, const Blocks& state, std::uint32_t key,
                             double* best_u) {
    const Eigen::Vector2d w = basis_weights(ctx, state);
    double best = std::numeric_limits<double>::infinity();
    double arg = 0.0;
    for (std::size_t k = 0; k < ctx.grid.size(); ++k) {
        const double v = w[0] * ctx.terminal_exp[k][0] + w[1] * ctx.terminal_exp[k][1];
        if (v < best) {
            best = v;
            arg = ctx.grid[k];
        }
    }
    auto try_candidate = [&](double u) {
        const double d0 = ctx.obs->eig_min() - u;
        const double d1 = ctx.obs->eig_max() - u;
        const double v =
            w[0] * std::exp(ctx.rp.mu2 * d0 * d0) + w[1] * std::exp(ctx.rp.mu2 * d1 * d1);
        if (v < best) {
            best = v;
            arg = u;
        }
    };
    for (const PolicyTable* t : ctx.options.extra_action_tables) try_candidate(t->values[key]);
    if (ctx.options.refine_terminal)
        try_candidate(
            minimize_exp_pair(w[0], w[1], ctx.obs->eig_min(), ctx.obs->eig_max(), ctx.rp.mu2));
    if (best_u) *best_u = arg;
    return best;
}

// Value of a node; optionally reports the chosen action at that node.
inline double dp_value(const DpContext& ctx, const Blocks& state, int depth, std::uint32_t key,
                       double* best_u) {
    if (depth == ctx.steps) return terminal_value(ctx, state, key, best_u);

    if (depth == 0) {
        // no control enters the first transition
        const double v =
            0.5 * (dp_value(ctx, advance(ctx, state, nullptr, kPlus), 1,
                            child_key(key, 0, kPlus), nullptr) +
                   dp_value(ctx, advance(ctx, state, nullptr, kMinus), 1,
                            child_key(key, 0, kMinus), nullptr));
        if (best_u) *best_u = 0.0;
        return v;
    }

    double best = std::numeric_limits<double>::infinity();
    double arg = 0.0;
    auto eval_action = [&](double u, const Matrix2* e) {
        const double v =
            0.5 * (dp_value(ctx, advance(ctx, state, e, kPlus), depth + 1,
                            child_key(key, depth, kPlus), nullptr) +
                   dp_value(ctx, advance(ctx, state, e, kMinus), depth + 1,
                            child_key(key, depth, kMinus), nullptr));
        if (v < best) {
            best = v;
            arg = u;
        }
    };

    if (ctx.rp.mu1 > 0.0) {
        for (std::size_t k = 0; k < ctx.grid.size(); ++k)
            eval_action(ctx.grid[k], &ctx.sandwich[k]);
        for (const PolicyTable* t : ctx.options.extra_action_tables) {
            const double u = t->values[key];
            const Matrix2 e = ctx.sandwich_for(u);
            eval_action(u, &e);
        }
    } else {
        // mu1 = 0: the transition is control-free, only the terminal stage
        // depends on the action.
        eval_action(ctx.grid.front(), nullptr);
    }
    if (best_u) *best_u = arg;
    return best;
}

// Walks the optimal policy tree, recomputing child values to recover the
// chosen action at every reachable prefix.
inline void dp_extract(const DpContext& ctx, const Blocks& state, int depth, std::uint32_t key,
                       PolicyTable& table) {
    double u = 0.0;
    dp_value(ctx, state, depth, key, &u);
    if (depth >= 1) table.values[key] = u;
    if (depth == ctx.steps) return;

    const bool weighted = depth >= 1 && ctx.rp.mu1 > 0.0;
    const Matrix2 e = weighted ? ctx.sandwich_for(u) : Matrix2(Matrix2::Identity());
    const Matrix2* ep = weighted ? &e : nullptr;
    for (Outcome dy : {kPlus, kMinus}) {
        dp_extract(ctx, advance(ctx, state, ep, dy), depth + 1, child_key(key, depth, dy), table);
    }
}

}  // namespace detail

// Backward dynamic programming by exhaustive policy search on the record
// tree.  Returns the optimal expected terminal cost
// E[ Tr(rho_N^mu e^{mu2 K(u_N)}) ] over the discretized policy class,
// together with the chosen action per record prefix.
inline DpResult dp_solve(const ParameterEnsemble& ens, const BlockDensityMatrix& rho0, int steps,
                         const RiskParams& rp, const Observable& obs,
                         std::vector<double> u_grid = {}, const DpOptions& options = {}) {
    rp.validate();
    ens.validate();
    if (steps < 1 || steps > kDpMaxSteps)
        throw CapacityError("dp_solve: steps must be in 1.." + std::to_string(kDpMaxSteps));
    if (rho0.size() != ens.size()) throw InvalidInputError("dp_solve: block count mismatch");

    if (u_grid.empty()) {
        constexpr int kDefaultGridPoints = 101;
        const double lo = obs.eig_min() - 1.0;
        const double hi = obs.eig_max() + 1.0;
        u_grid.resize(kDefaultGridPoints);
        for (int k = 0; k < kDefaultGridPoints; ++k)
            u_grid[k] = lo + (hi - lo) * k / (kDefaultGridPoints - 1);
    }

    detail::DpContext ctx;
    ctx.ens = &ens;
    ctx.steps = steps;
    ctx.rp = rp;
    ctx.obs = &obs;
    ctx.grid = std::move(u_grid);
    ctx.options = options;
    ctx.lambda2 = ens.coeffs.front().lambda * ens.coeffs.front().lambda;
    ctx.sandwich.reserve(ctx.grid.size());
    ctx.terminal_exp.reserve(ctx.grid.size());
    for (double u : ctx.grid) {
        ctx.sandwich.push_back(ctx.sandwich_for(u));
        const double a = std::exp(rp.mu2 * (obs.eig_min() - u) * (obs.eig_min() - u));
        const double b = std::exp(rp.mu2 * (obs.eig_max() - u) * (obs.eig_max() - u));
        ctx.terminal_exp.emplace_back(a, b);
    }

    DpResult out;
    out.optimal_cost = detail::dp_value(ctx, rho0.blocks, 0, 1u, nullptr);
    out.policy.values.assign(std::size_t{1} << (steps + 1), 0.0);
    detail::dp_extract(ctx, rho0.blocks, 0, 1u, out.policy);
    return out;
}

}  // namespace qrs
