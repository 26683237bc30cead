#pragma once

#include <random>
#include <vector>

#include "qrs/filter.hpp"
#include "qrs/matcore.hpp"
#include "qrs/model.hpp"

namespace qrs::test {

inline Matrix2 random_psd2(std::mt19937_64& rng) {
    return Matrix2(random_psd(2, rng));
}

// Random trace-one block state with the given block count.
inline BlockDensityMatrix random_block_state(int blocks, std::mt19937_64& rng) {
    BlockDensityMatrix d;
    for (int i = 0; i < blocks; ++i) d.blocks.push_back(random_psd2(rng));
    const double t = d.total_trace();
    for (auto& b : d.blocks) b /= t;
    return d;
}

// 30-term Taylor series of exp(A); the independent oracle for mat_exp.
inline ComplexMatrix taylor_exp(const ComplexMatrix& a, int terms = 30) {
    ComplexMatrix sum = ComplexMatrix::Identity(a.rows(), a.cols());
    ComplexMatrix term = ComplexMatrix::Identity(a.rows(), a.cols());
    for (int k = 1; k <= terms; ++k) {
        term = (term * a / static_cast<double>(k)).eval();
        sum += term;
    }
    return sum;
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Kolmogorov-Smirnov distance of a sample against the standard normal.
inline double ks_statistic_normal(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = standard_normal_cdf(sample[i]);
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    return d;
}

}  // namespace qrs::test
