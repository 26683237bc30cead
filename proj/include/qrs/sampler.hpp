#pragma once

// Measurement-record generation under the true model.  The true-system
// simulator IS the true filter: each outcome is drawn from its conditional
// law p(+lambda | past) = Tr[V_+ rho V_+^*] / (2 Tr[rho]), which is exact
// because the reference measure puts weight 1/2 on each outcome.

#include <cstdint>
#include <vector>

#include "qrs/filter.hpp"

namespace qrs {

// SplitMix64; used to derive independent per-trajectory seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(path_index + 0x51ed270b2f2c5c35ull));
}

// Uniform double in [0, 1) from the top 53 bits; identical on every
// conforming platform, unlike uniform_real_distribution.
inline double uniform_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

using Record = std::vector<std::int8_t>;  // outcome signs, +-1 per step

struct TrajectoryRecord {
    Record signs;
    std::uint64_t seed = 0;
    double lambda = 0.0;

    int steps() const { return static_cast<int>(signs.size()); }
    double dy(int l) const { return signs[l] * lambda; }
};

struct OutcomeSample {
    Outcome sign;
    double p_plus;
    FilterState next;  // true filter advanced by the sampled outcome
};

// Draws one outcome from the conditional law of the true filter state.
inline OutcomeSample sample_outcome(const FilterState& true_state, const ParameterEnsemble& ens,
                                    std::mt19937_64& rng) {
    const double total = true_state.state.total_trace();
    if (!(total > 0.0))
        throw DegenerateStateError("sample_outcome: true state has no mass");

    FilterState plus = rn_step(true_state, ens, kPlus);
    const double p_plus =
        plus.state.total_trace() * std::exp(plus.log_scale - true_state.log_scale) / (2.0 * total);
    if (p_plus < -1e-12 || p_plus > 1.0 + 1e-12)
        throw NumericalConsistencyError("sample_outcome: conditional probability " +
                                        std::to_string(p_plus) + " outside [0, 1]");

    const double clamped = std::min(1.0, std::max(0.0, p_plus));
    if (uniform_double(rng) < clamped) {
        return {kPlus, p_plus, std::move(plus)};
    }
    return {kMinus, p_plus, rn_step(true_state, ens, kMinus)};
}

// Iterates sample_outcome, advancing the true filter with each sampled
// outcome.  Deterministic given the seed.
inline TrajectoryRecord sample_trajectory(const ParameterEnsemble& ens,
                                          const BlockDensityMatrix& true_initial, int steps,
                                          std::uint64_t seed) {
    if (steps < 0) throw InvalidInputError("sample_trajectory: negative step count");
    std::mt19937_64 rng(splitmix64(seed));
    TrajectoryRecord rec;
    rec.seed = seed;
    rec.lambda = ens.coeffs.empty() ? 0.0 : ens.coeffs.front().lambda;
    rec.signs.reserve(steps);

    FilterState s = make_filter_state(true_initial);
    for (int l = 0; l < steps; ++l) {
        OutcomeSample out = sample_outcome(s, ens, rng);
        rec.signs.push_back(static_cast<std::int8_t>(out.sign));
        s = std::move(out.next);
    }
    return rec;
}

}  // namespace qrs
