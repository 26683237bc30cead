#pragma once

// Dense complex linear algebra for small Hermitian-dominated matrices.
// Everything here is a pure function of its inputs; matrices are plain
// Eigen values and safe to share across threads.

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qrs/errors.hpp"

namespace qrs {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;
using Vector2 = Eigen::Vector2cd;

inline constexpr double kTolHerm = 1e-10;
inline constexpr double kTolPsd = 1e-10;
inline constexpr double kTolSuppRel = 1e-12;  // relative to the largest eigenvalue

inline const Complex kI{0.0, 1.0};

// Pauli and ladder operators, sigma_- = [[0,0],[1,0]].  The second basis
// vector is the ground/vacuum state: sigma_- annihilates [0 1]^T.
inline Matrix2 sigma_x() { return (Matrix2() << 0, 1, 1, 0).finished(); }
inline Matrix2 sigma_y() { return (Matrix2() << 0, -kI, kI, 0).finished(); }
inline Matrix2 sigma_z() { return (Matrix2() << 1, 0, 0, -1).finished(); }
inline Matrix2 sigma_minus() { return (Matrix2() << 0, 0, 1, 0).finished(); }
inline Matrix2 sigma_plus() { return (Matrix2() << 0, 1, 0, 0).finished(); }

// Spectral projectors of the field quadrature; outcomes +lambda / -lambda.
inline Matrix2 proj_plus() { return (Matrix2() << 0.5, 0.5, 0.5, 0.5).finished(); }
inline Matrix2 proj_minus() { return (Matrix2() << 0.5, -0.5, -0.5, 0.5).finished(); }

inline Vector2 vacuum_vector() { return (Vector2() << 0, 1).finished(); }

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
    return a.allFinite();
}

template <class Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a, double tol = kTolHerm) {
    if (a.rows() != a.cols()) return false;
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

template <class Derived>
auto hermitize(const Eigen::MatrixBase<Derived>& a) {
    return ((a + a.adjoint()) / 2.0).eval();
}

struct HermitianEig {
    Eigen::VectorXd values;  // ascending
    ComplexMatrix vectors;   // unitary, columns are eigenvectors
};

// A = V diag(values) V^*.  Throws InvalidInputError unless A is Hermitian
// within tol.
template <class Derived>
HermitianEig eig_hermitian(const Eigen::MatrixBase<Derived>& a, double tol = kTolHerm) {
    if (!all_finite(a)) throw InvalidInputError("eig_hermitian: non-finite entries");
    if (!is_hermitian(a, tol)) throw InvalidInputError("eig_hermitian: input is not Hermitian");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hermitize(a));
    if (solver.info() != Eigen::Success)
        throw NumericalConsistencyError("eig_hermitian: eigensolver failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

// exp(A) for Hermitian A through its eigendecomposition; the result is
// Hermitian positive definite by construction.
template <class Derived>
ComplexMatrix mat_exp_hermitian(const Eigen::MatrixBase<Derived>& a) {
    HermitianEig eig = eig_hermitian(a);
    Eigen::VectorXd e = eig.values.array().exp();
    return eig.vectors * e.asDiagonal() * eig.vectors.adjoint();
}

// exp(A).  Hermitian inputs take the eigendecomposition path, everything
// else falls back to scaling-and-squaring.
template <class Derived>
ComplexMatrix mat_exp(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) throw InvalidInputError("mat_exp: matrix is not square");
    if (!all_finite(a)) throw InvalidInputError("mat_exp: non-finite entries");
    if (is_hermitian(a)) return mat_exp_hermitian(a);
    ComplexMatrix dense = a;
    return dense.exp();
}

// Logarithm of a Hermitian PSD matrix on its support: eigenvalues <= tol_supp
// are excluded from the sum.  The caller decides what a support violation
// means (see relative_entropy).
template <class Derived>
ComplexMatrix mat_log_psd(const Eigen::MatrixBase<Derived>& a, double tol_supp) {
    HermitianEig eig = eig_hermitian(a);
    ComplexMatrix out = ComplexMatrix::Zero(a.rows(), a.cols());
    for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
        if (eig.values[k] > tol_supp) {
            out += std::log(eig.values[k]) * eig.vectors.col(k) * eig.vectors.col(k).adjoint();
        }
    }
    return out;
}

template <class Derived>
double min_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
    return eig_hermitian(a).values.minCoeff();
}

template <class Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& a, double tol = kTolPsd) {
    if (!is_hermitian(a, kTolHerm)) return false;
    return min_eigenvalue(a) >= -tol;
}

// Kronecker product, row-major factor ordering: (A (x) B)[(i,k),(j,l)] = A(i,j) B(k,l).
template <class DerivedA, class DerivedB>
ComplexMatrix kron(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Tr(A B) without forming the product.
template <class DerivedA, class DerivedB>
Complex trace_product(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    return (a.transpose().cwiseProduct(b)).sum();
}

inline double support_tol(double max_eigenvalue) {
    return kTolSuppRel * std::max(max_eigenvalue, 0.0);
}

// Random matrix helpers, used by the duality checks and by property tests.
inline ComplexMatrix random_matrix(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    ComplexMatrix a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = Complex(gauss(rng), gauss(rng));
    return a;
}

inline ComplexMatrix random_hermitian(int dim, std::mt19937_64& rng) {
    return hermitize(random_matrix(dim, rng));
}

inline ComplexMatrix random_psd(int dim, std::mt19937_64& rng) {
    ComplexMatrix a = random_matrix(dim, rng);
    return (a * a.adjoint()).eval();
}

// Random full-rank density matrix (unit trace, eigenvalues bounded away
// from zero by the ridge term).
inline ComplexMatrix random_density(int dim, std::mt19937_64& rng, double ridge = 1e-3) {
    ComplexMatrix a = random_psd(dim, rng) + ridge * ComplexMatrix::Identity(dim, dim);
    return a / a.trace().real();
}

}  // namespace qrs
