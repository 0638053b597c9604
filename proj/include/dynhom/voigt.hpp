/**
 * @file voigt.hpp
 * @brief Complex symmetric-tensor algebra in a fixed, unscaled Voigt convention.
 *
 * Every module of this library shares one Voigt convention:
 *
 *   - component ordering (11, 22, 33, 23, 31, 12);
 *   - the tensor->matrix map carries NO factor-of-2 or sqrt(2) scaling;
 *   - contraction weights live in an explicit diagonal matrix
 *     W = diag(1, 1, 1, 2, 2, 2).
 *
 * A double contraction of a minor-symmetric rank-4 tensor T with a symmetric
 * rank-2 tensor s therefore reads, in matrix form,
 *
 *   (T : s)_I = sum_J [T]_IJ * W_JJ * {s}_J,
 *
 * and the matrix of the *tensor* inverse of T is W^-1 [T]^-1 W^-1. Keeping W
 * explicit at every use site makes each formula of the underlying method
 * literally transcribable and eliminates the classic hidden-scaling bugs of
 * this family of solvers.
 */
#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <stdexcept>
#include <string>

namespace dynhom {

using Complex = std::complex<double>;

using Vec3 = Eigen::Vector3d;
using Vec3C = Eigen::Vector3cd;

/** 6-component Voigt vector (stress, eigenstress, or strain), ordering (11,22,33,23,31,12). */
using Voigt6 = Eigen::Matrix<Complex, 6, 1>;

using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

using Mat3C = Eigen::Matrix3cd;
using Mat6C = Eigen::Matrix<Complex, 6, 6>;
using Mat36C = Eigen::Matrix<Complex, 3, 6>;
using Mat63C = Eigen::Matrix<Complex, 6, 3>;

/** Dense dynamically-sized complex matrix for the 6a x 6a block systems. */
using BlockMatC = Eigen::MatrixXcd;
using BlockMat = Eigen::MatrixXd;

/** Base class of every error this library throws. */
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Index pairs (i, j) of the six Voigt slots, in the fixed ordering. */
inline constexpr std::array<std::array<int, 2>, 6> kVoigtPairs{
    {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {2, 0}, {0, 1}}};

/** Voigt slot of the (unordered) index pair (i, j); i, j in {0, 1, 2}. */
constexpr int voigt_index(int i, int j) noexcept {
    // Slots: (00)->0 (11)->1 (22)->2 (12)/(21)->3 (20)/(02)->4 (01)/(10)->5.
    return (i == j) ? i : 6 - i - j;
}

/**
 * @brief The fixed contraction-weight matrix W = diag(1, 1, 1, 2, 2, 2).
 *
 * W is immutable by construction; every double contraction in this library
 * multiplies by it explicitly, so the absence of hidden Voigt scaling is
 * auditable by searching use sites.
 */
struct WeightW {
    /** W = diag(1, 1, 1, 2, 2, 2). */
    static const Mat6& matrix() {
        static const Mat6 w = (Eigen::Matrix<double, 6, 1>() << 1, 1, 1, 2, 2, 2)
                                  .finished()
                                  .asDiagonal();
        return w;
    }
    /** W^-1 = diag(1, 1, 1, 1/2, 1/2, 1/2). */
    static const Mat6& inverse() {
        static const Mat6 wi =
            (Eigen::Matrix<double, 6, 1>() << 1, 1, 1, 0.5, 0.5, 0.5)
                .finished()
                .asDiagonal();
        return wi;
    }
};

/**
 * @brief Dense rank-4 tensor over C^3, indexed T(i, j, k, l) with i..l in {0, 1, 2}.
 *
 * Plain storage with no symmetry assumptions; used as the exchange type
 * between index-notation formulas and the Voigt 6x6 representation.
 */
class Tensor4C {
  public:
    Tensor4C() : v_{} {}

    Complex& operator()(int i, int j, int k, int l) {
        return v_[((i * 3 + j) * 3 + k) * 3 + l];
    }
    const Complex& operator()(int i, int j, int k, int l) const {
        return v_[((i * 3 + j) * 3 + k) * 3 + l];
    }

  private:
    std::array<Complex, 81> v_;
};

/**
 * @brief Map a minor-symmetric rank-4 tensor to its 6x6 Voigt matrix.
 *
 * M[I][J] = T_(ij)(kl) under the fixed ordering, with no scaling embedded
 * (the W matrix carries contraction weights explicitly).
 *
 * @throws Error if T lacks the minor symmetries T_ijkl = T_jikl = T_ijlk
 *         beyond 1e-10 relative to the largest entry.
 */
inline Mat6C tensor4_to_voigt(const Tensor4C& t) {
    double scale = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    scale = std::max(scale, std::abs(t(i, j, k, l)));

    const double tol = 1e-10 * std::max(scale, 1e-300);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    if (std::abs(t(i, j, k, l) - t(j, i, k, l)) > tol ||
                        std::abs(t(i, j, k, l) - t(i, j, l, k)) > tol) {
                        throw Error(
                            "tensor4_to_voigt: input lacks minor symmetry "
                            "beyond 1e-10 relative tolerance");
                    }
                }

    Mat6C m;
    for (int I = 0; I < 6; ++I)
        for (int J = 0; J < 6; ++J)
            m(I, J) = t(kVoigtPairs[I][0], kVoigtPairs[I][1], kVoigtPairs[J][0],
                        kVoigtPairs[J][1]);
    return m;
}

/** Inverse of tensor4_to_voigt: expand a 6x6 Voigt matrix to the minor-symmetric rank-4 tensor. */
inline Tensor4C voigt_to_tensor4(const Mat6C& m) {
    Tensor4C t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    t(i, j, k, l) = m(voigt_index(i, j), voigt_index(k, l));
    return t;
}

/**
 * @brief Relative hermitian residual: max-norm(M - M^dagger) / max(1, max-norm(M)).
 *
 * Zero (up to roundoff) iff M is hermitian. The max(1, .) floor keeps the
 * residual meaningful for near-zero matrices.
 */
inline double hermitian_residual(const Eigen::Ref<const Eigen::MatrixXcd>& m) {
    if (m.rows() != m.cols()) {
        throw Error("hermitian_residual: matrix must be square");
    }
    if (m.rows() == 0) return 0.0;
    const double num = (m - m.adjoint()).cwiseAbs().maxCoeff();
    const double den = std::max(1.0, m.cwiseAbs().maxCoeff());
    return num / den;
}

}  // namespace dynhom
