#pragma once

// Estimate policies as functions of measurement-record prefixes, plus
// helpers to materialize filter-driven policies into per-prefix tables
// for exhaustive record enumeration at small N.

#include <cstdint>
#include <functional>
#include <vector>

#include "qrs/filter.hpp"
#include "qrs/sampler.hpp"

namespace qrs {

// u_l as a function of the first l outcomes.
using RecordPolicy = std::function<double(const Record&)>;

// Unique index for a sign prefix: (1 << len) | bits, bit j-1 set when the
// outcome of step j is -lambda.
inline std::uint32_t prefix_index(const Record& prefix) {
    std::uint32_t idx = 1u << prefix.size();
    for (std::size_t j = 0; j < prefix.size(); ++j)
        if (prefix[j] < 0) idx |= 1u << j;
    return idx;
}

inline RecordPolicy constant_policy(double u) {
    return [u](const Record&) { return u; };
}

// Policy backed by a per-prefix table indexed by prefix_index.
struct PolicyTable {
    std::vector<double> values;  // size 2^{N+1}

    double operator()(const Record& prefix) const { return values.at(prefix_index(prefix)); }
};

namespace detail {

template <class StepFn, class EmitFn>
void walk_records(int steps, const FilterState& root, StepFn&& advance, EmitFn&& emit) {
    struct Frame {
        FilterState state;
        Record prefix;
    };
    // depth-first over the full binary record tree
    std::vector<Frame> stack;
    stack.push_back({root, {}});
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (static_cast<int>(f.prefix.size()) > 0) emit(f.prefix, f.state);
        if (static_cast<int>(f.prefix.size()) == steps) continue;
        for (Outcome dy : {kMinus, kPlus}) {
            Frame child;
            child.prefix = f.prefix;
            child.prefix.push_back(static_cast<std::int8_t>(dy));
            child.state = advance(f.state, child.prefix, dy);
            stack.push_back(std::move(child));
        }
    }
}

}  // namespace detail

// Suboptimal risk-sensitive policy along every record of length <= steps:
// the risk-sensitive filter is advanced with its own past estimates and the
// per-step minimizer is recorded.
inline PolicyTable build_suboptimal_policy_table(const ParameterEnsemble& ens,
                                                 const BlockDensityMatrix& rho0, int steps,
                                                 const RiskParams& rp, const Observable& obs) {
    if (steps < 0 || steps > 20) throw CapacityError("build_suboptimal_policy_table: steps");
    PolicyTable table;
    table.values.assign(std::size_t{1} << (steps + 1), 0.0);

    FilterState root = make_filter_state(rho0);
    auto advance = [&](const FilterState& s, const Record&, Outcome dy) {
        return rs_step(s, ens, rp, obs, s.last_estimate.value_or(0.0), dy);
    };
    detail::walk_records(steps, root, advance, [&](const Record& prefix, FilterState& state) {
        const double u = suboptimal_estimate(state, rp, obs);
        state.last_estimate = u;
        table.values[prefix_index(prefix)] = u;
    });
    return table;
}

// Risk-neutral policy u_l = pi_l(X_e) computed from the plain filter.
inline PolicyTable build_risk_neutral_policy_table(const ParameterEnsemble& ens,
                                                   const BlockDensityMatrix& rho0, int steps,
                                                   const Observable& obs) {
    if (steps < 0 || steps > 20) throw CapacityError("build_risk_neutral_policy_table: steps");
    PolicyTable table;
    table.values.assign(std::size_t{1} << (steps + 1), 0.0);

    FilterState root = make_filter_state(rho0);
    auto advance = [&](const FilterState& s, const Record&, Outcome dy) {
        return rn_step(s, ens, dy);
    };
    detail::walk_records(steps, root, advance, [&](const Record& prefix, FilterState& state) {
        table.values[prefix_index(prefix)] = estimate(state, obs.matrix());
    });
    return table;
}

}  // namespace qrs
