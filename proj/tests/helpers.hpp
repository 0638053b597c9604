/**
 * @file helpers.hpp
 * @brief Shared test utilities: independent oracles and deterministic
 *        random-input builders.
 *
 * The oracles here deliberately avoid the library's closed-form kernel and
 * Voigt plumbing: rank-4 algebra is done with plain 81-entry loops, kernel
 * references come from dense matrix inversion of the acoustic tensor, and
 * shape factors from Gauss-Legendre quadrature. Randomness is always drawn
 * from std::mt19937 with fixed seeds and a manual uniform mapping so every
 * platform sees identical inputs.
 */
#pragma once

#include <dynhom/dynhom.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace testutil {

using dynhom::BoxSubregion;
using dynhom::Complex;
using dynhom::IsotropicMaterial;
using dynhom::Mat3;
using dynhom::Mat36;
using dynhom::Mat6;
using dynhom::Mat63;
using dynhom::ReferenceMedium;
using dynhom::UnitCell;
using dynhom::Vec3;
using dynhom::Vec3C;
using dynhom::Voigt6;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Deterministic randomness
// ---------------------------------------------------------------------------

/** Uniform in [0,1) from the raw 32-bit stream (engine-independent mapping). */
inline double uniform(std::mt19937& rng) {
    return static_cast<double>(rng()) / 4294967296.0;
}

inline double uniform(std::mt19937& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform(rng);
}

/** Log-uniform contrast ratio in [1/4, 4], bounded away from 1 by 5%. */
inline double contrast_ratio(std::mt19937& rng) {
    for (;;) {
        const double r = std::exp(uniform(rng, -1.0, 1.0) * std::log(4.0));
        if (std::abs(r - 1.0) > 0.05) return r;
    }
}

// ---------------------------------------------------------------------------
// Plain-loop rank-4 tensor algebra (independent of the library's Voigt layer)
// ---------------------------------------------------------------------------

/** Dense rank-4 tensor with no symmetry assumptions, loop-based throughout. */
struct T4 {
    std::array<double, 81> a{};
    double& operator()(int i, int j, int k, int l) {
        return a[static_cast<std::size_t>(((i * 3 + j) * 3 + k) * 3 + l)];
    }
    double operator()(int i, int j, int k, int l) const {
        return a[static_cast<std::size_t>(((i * 3 + j) * 3 + k) * 3 + l)];
    }
};

inline int kron(int i, int j) { return i == j ? 1 : 0; }

/** Symmetric rank-4 identity 1/2 (d_ik d_jl + d_il d_jk). */
inline T4 identity4s() {
    T4 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    t(i, j, k, l) = 0.5 * (kron(i, k) * kron(j, l) + kron(i, l) * kron(j, k));
    return t;
}

/** Basis tensor g1 = zi dj(k zl) symmetrized over both index pairs. */
inline T4 g1_of(const Vec3& z) {
    T4 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    t(i, j, k, l) = 0.5 * (z[i] * kron(j, k) * z[l] + z[i] * kron(j, l) * z[k] +
                                           z[j] * kron(i, k) * z[l] + z[j] * kron(i, l) * z[k]);
    return t;
}

/** Basis tensor g2 = dij zk zl. */
inline T4 g2_of(const Vec3& z) {
    T4 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) t(i, j, k, l) = kron(i, j) * z[k] * z[l];
    return t;
}

/** Basis tensor g3 = zi zj dkl. */
inline T4 g3_of(const Vec3& z) {
    T4 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) t(i, j, k, l) = z[i] * z[j] * kron(k, l);
    return t;
}

/** Basis tensor g4 = zi zj zk zl. */
inline T4 g4_of(const Vec3& z) {
    T4 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) t(i, j, k, l) = z[i] * z[j] * z[k] * z[l];
    return t;
}

/** delta x delta: dij dkl. */
inline T4 dd_of() {
    T4 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) t(i, j, k, l) = kron(i, j) * kron(k, l);
    return t;
}

/** Double contraction (A:B)_ijkl = A_ijmn B_mnkl by plain loops. */
inline T4 contract(const T4& A, const T4& B) {
    T4 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    double s = 0.0;
                    for (int m = 0; m < 3; ++m)
                        for (int n = 0; n < 3; ++n) s += A(i, j, m, n) * B(m, n, k, l);
                    t(i, j, k, l) = s;
                }
    return t;
}

inline T4 scale(double c, const T4& A) {
    T4 t = A;
    for (auto& x : t.a) x *= c;
    return t;
}

inline T4 add(const T4& A, const T4& B) {
    T4 t = A;
    for (std::size_t n = 0; n < 81; ++n) t.a[n] += B.a[n];
    return t;
}

inline double max_abs(const T4& A) {
    double m = 0.0;
    for (double x : A.a) m = std::max(m, std::abs(x));
    return m;
}

inline double max_diff(const T4& A, const T4& B) {
    double m = 0.0;
    for (std::size_t n = 0; n < 81; ++n) m = std::max(m, std::abs(A.a[n] - B.a[n]));
    return m;
}

/** Independent pair-index Voigt map (11,22,33,23,31,12), unscaled entries. */
inline Mat6 voigt_of(const T4& A) {
    static constexpr int pi_[6] = {0, 1, 2, 1, 2, 0};
    static constexpr int pj_[6] = {0, 1, 2, 2, 0, 1};
    Mat6 m;
    for (int I = 0; I < 6; ++I)
        for (int J = 0; J < 6; ++J) m(I, J) = A(pi_[I], pj_[I], pi_[J], pj_[J]);
    return m;
}

// ---------------------------------------------------------------------------
// Kernel oracles by dense inversion
// ---------------------------------------------------------------------------

/** Acoustic matrix H_ij = -(lambda+mu) zi zj + (w^2 rho - mu |z|^2) dij. */
inline Mat3 oracle_acoustic(const Vec3& z, double omega, const ReferenceMedium& ref) {
    const auto& m = ref.material;
    const double z2 = z.squaredNorm();
    Mat3 H = -(m.lambda + m.mu) * (z * z.transpose());
    H.diagonal().array() += omega * omega * m.rho - m.mu * z2;
    return H;
}

/** Phi reference: w^2 rho0 H^{-1} by dense 3x3 inversion. */
inline Mat3 oracle_phi(const Vec3& z, double omega, const ReferenceMedium& ref) {
    return omega * omega * ref.material.rho * oracle_acoustic(z, omega, ref).inverse();
}

/** Theta reference from the Phi oracle: -(1/(2 w rho0)) (Phi_ij zp + Phi_ip zj). */
inline Mat36 oracle_theta(const Vec3& z, double omega, const ReferenceMedium& ref) {
    const Mat3 phi = oracle_phi(z, omega, ref);
    const double c = -1.0 / (2.0 * omega * ref.material.rho);
    Mat36 th;
    for (int i = 0; i < 3; ++i)
        for (int J = 0; J < 6; ++J) {
            const auto [j, p] = dynhom::kVoigtPairs[static_cast<std::size_t>(J)];
            th(i, J) = c * (phi(i, j) * z[p] + phi(i, p) * z[j]);
        }
    return th;
}

/** Rank-4 F = -lambda0 g2 - mu0 g1 + w^2 rho0 1s, the tensor Gamma inverts. */
inline T4 oracle_f_tensor(const Vec3& z, double omega, const ReferenceMedium& ref) {
    const auto& m = ref.material;
    return add(add(scale(-m.lambda, g2_of(z)), scale(-m.mu, g1_of(z))),
               scale(omega * omega * m.rho, identity4s()));
}

/**
 * @brief Gamma reference: the symmetric-tensor inverse of F, scaled by w^2 rho0.
 *
 * In unscaled Voigt storage with weight W, A:B maps to [A] W [B], and the
 * identity 1s maps to W^{-1}; hence [Gamma] = w^2 rho0 W^{-1} [F]^{-1} W^{-1}.
 */
inline Mat6 oracle_gamma(const Vec3& z, double omega, const ReferenceMedium& ref) {
    const Mat6 F = voigt_of(oracle_f_tensor(z, omega, ref));
    const Mat6& wi = dynhom::WeightW::inverse();
    return omega * omega * ref.material.rho * wi * F.inverse() * wi;
}

/** Hatted-Psi reference: Psi-hat_mnp = Theta-hat_pmn = rho0 Theta_pmn. */
inline Mat63 oracle_psi_hat(const Vec3& z, double omega, const ReferenceMedium& ref) {
    return ref.material.rho * oracle_theta(z, omega, ref).transpose();
}

/** Psi reference: C0 : Psi-hat, i.e. [Psi] = [C0] W [Psi-hat]. */
inline Mat63 oracle_psi(const Vec3& z, double omega, const ReferenceMedium& ref) {
    return dynhom::stiffness_voigt(ref.material) * dynhom::WeightW::matrix() *
           oracle_psi_hat(z, omega, ref);
}

/** Hatted-Gamma reference: D0 : Gamma, i.e. [D0] W [Gamma]. */
inline Mat6 oracle_gamma_hat(const Vec3& z, double omega, const ReferenceMedium& ref) {
    return dynhom::compliance_voigt(ref.material) * dynhom::WeightW::matrix() *
           oracle_gamma(z, omega, ref);
}

// ---------------------------------------------------------------------------
// Shape-factor oracle by Gauss-Legendre quadrature
// ---------------------------------------------------------------------------

/** Volume average of exp(i xi . x) over a box: 16-panel, 4-node GL per axis. */
inline Complex oracle_g_factor(const BoxSubregion& region, const Vec3& xi) {
    static const double node[4] = {-0.8611363115940526, -0.3399810435848563,
                                   0.3399810435848563, 0.8611363115940526};
    static const double wt[4] = {0.3478548451374538, 0.6521451548625461,
                                 0.6521451548625461, 0.3478548451374538};
    Complex g(1.0, 0.0);
    for (int c = 0; c < 3; ++c) {
        const double lo = region.lo[c], hi = region.hi[c];
        const int panels = 16;
        const double dx = (hi - lo) / panels;
        Complex integral(0.0, 0.0);
        for (int p = 0; p < panels; ++p) {
            const double mid = lo + (p + 0.5) * dx;
            for (int n = 0; n < 4; ++n) {
                const double x = mid + 0.5 * dx * node[n];
                integral += wt[n] * std::polar(1.0, xi[c] * x);
            }
        }
        integral *= 0.5 * dx;           // GL weights live on [-1,1]
        g *= integral / (hi - lo);      // per-axis length normalization
    }
    return g;
}

// ---------------------------------------------------------------------------
// Acceptance-regime builders
// ---------------------------------------------------------------------------

/** Sub-resonant drive frequency for a cell: 0.35 c2 pi / max(a). */
inline double regime_omega(const UnitCell& cell) {
    const auto& a = cell.half_periods();
    const double amax = std::max({a[0], a[1], a[2]});
    return 0.35 * cell.reference().c2 * kPi / amax;
}

/** Small Bloch vector, each component within 5% of the first zone edge. */
inline Vec3 regime_q(std::mt19937& rng, const UnitCell& cell) {
    Vec3 q;
    for (int c = 0; c < 3; ++c)
        q[c] = uniform(rng, -1.0, 1.0) * 0.05 * kPi / cell.half_periods()[c];
    return q;
}

/** Reference medium used across randomized tests (steel-like numbers). */
inline IsotropicMaterial base_material() {
    IsotropicMaterial m;
    m.rho = 1000.0;
    m.lambda = 2.0e9;
    m.mu = 1.0e9;
    return m;
}

/** Random material with independent density and stiffness contrast vs base. */
inline IsotropicMaterial random_material(std::mt19937& rng, const IsotropicMaterial& base) {
    IsotropicMaterial m;
    m.rho = base.rho * contrast_ratio(rng);
    const double rs = contrast_ratio(rng);
    m.lambda = base.lambda * rs;
    m.mu = base.mu * rs;
    return m;
}

/**
 * @brief Random cell: up to eight boxes, one per cube octant, so subregions
 *        never overlap by construction. Boxes and materials are asymmetric.
 */
inline UnitCell random_cell(std::mt19937& rng, int max_subregions = 8) {
    const Vec3 a(uniform(rng, 0.7, 1.3), uniform(rng, 0.7, 1.3), uniform(rng, 0.7, 1.3));
    const IsotropicMaterial base = base_material();
    const ReferenceMedium ref(base);

    int n_sub = 1 + static_cast<int>(uniform(rng) * max_subregions);
    n_sub = std::min(n_sub, 8);
    std::array<int, 8> octants{0, 1, 2, 3, 4, 5, 6, 7};
    // Fisher-Yates with the deterministic uniform stream.
    for (int i = 7; i > 0; --i) {
        const int j = static_cast<int>(uniform(rng) * (i + 1));
        std::swap(octants[static_cast<std::size_t>(i)], octants[static_cast<std::size_t>(j)]);
    }

    std::vector<BoxSubregion> subs;
    for (int s = 0; s < n_sub; ++s) {
        const int oct = octants[static_cast<std::size_t>(s)];
        BoxSubregion box;
        for (int c = 0; c < 3; ++c) {
            const bool hi_half = ((oct >> c) & 1) != 0;
            const double lo_edge = hi_half ? 0.0 : -a[c];
            const double width = a[c];
            const double t0 = uniform(rng, 0.05, 0.45);
            const double t1 = uniform(rng, 0.55, 0.95);
            box.lo[c] = lo_edge + t0 * width;
            box.hi[c] = lo_edge + t1 * width;
        }
        box.material = random_material(rng, base);
        box.label = "sub" + std::to_string(s);
        subs.push_back(box);
    }
    return UnitCell(a, ref, base, subs);
}

/** Random complex stress/velocity probe pair with O(1) entries. */
inline std::pair<Voigt6, Vec3C> random_probe(std::mt19937& rng) {
    Voigt6 s;
    for (int i = 0; i < 6; ++i)
        s[i] = Complex(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
    Vec3C v;
    for (int k = 0; k < 3; ++k)
        v[k] = Complex(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
    return {s, v};
}

// ---------------------------------------------------------------------------
// Comparison helpers
// ---------------------------------------------------------------------------

inline double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }
inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

/** Max-norm difference relative to the reference's max-norm (floor 1). */
template <typename A, typename B>
inline double rel_diff(const A& got, const B& want) {
    const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
    return (got - want).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testutil
