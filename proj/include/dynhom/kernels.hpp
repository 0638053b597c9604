/**
 * @file kernels.hpp
 * @brief Closed-form spectral tensors of the isotropic reference medium,
 *        evaluated at a single zeta = xi + q.
 *
 * For an isotropic reference (rho0, lambda0, mu0) with wave speeds
 * c1 = sqrt((lambda0 + 2 mu0)/rho0) and c2 = sqrt(mu0/rho0), the perturbation
 * velocity and stress at one Fourier mode solve
 *
 *   u'(xi) = Phi(zeta) . U'(xi)  + Theta(zeta) : S(xi)
 *   s(xi)  = Psi(zeta) . U'(xi)  + Gamma(zeta) : S(xi)
 *
 * where U' and S are the eigenvelocity and eigenstress amplitudes. With the
 * shorthand denominators
 *
 *   ds = w^2 - c2^2 |zeta|^2      (shear branch)
 *   dl = w^2 - c1^2 |zeta|^2      (longitudinal branch)
 *
 * all four kernels and their hatted transforms (Phi^ = rho0 Phi,
 * Theta^ = rho0 Theta, Psi^ = D0 : Psi, Gamma^ = D0 : Gamma) have closed
 * forms whose entries are REAL for real zeta; complexity enters the method
 * only through the geometric g-factors and phases. The kernels are therefore
 * returned as real matrices here.
 *
 * Voigt layout (ordering (11,22,33,23,31,12), no embedded scaling):
 *   Phi   3x3            Theta 3x6 (symmetrized in its last two indices)
 *   Psi   6x3            Gamma 6x6 (minor symmetries)
 * Contractions with an eigenstress vector take the explicit weight W, e.g.
 * (Gamma : S)_I = ([Gamma] W {S})_I.
 *
 * Evaluations fail loudly near reference-medium resonances (ds or dl ~ 0)
 * instead of returning huge values that would poison the assembled sums.
 */
#pragma once

#include <dynhom/unit_cell.hpp>
#include <dynhom/voigt.hpp>

#include <cmath>
#include <sstream>

namespace dynhom {

/** Relative resonance guard width (see Zeta). */
inline constexpr double kResonanceGuard = 1e-8;

/**
 * @brief Thrown when zeta = xi + q falls on (or hugs) a reference-medium
 *        resonance w^2 = c^2 |zeta|^2.
 *
 * Remedy: choose a different reference medium or detune (q, w).
 */
struct ResonantReference : Error {
    ResonantReference(const Vec3& zeta, double omega, const char* branch)
        : Error(format(zeta, omega, branch)) {}

    /** Rethrow form: an already-formatted message with added context. */
    explicit ResonantReference(const std::string& message) : Error(message) {}

    static std::string format(const Vec3& zeta, double omega, const char* branch) {
        std::ostringstream os;
        os << "ResonantReference: w^2 - " << branch
           << "^2 |zeta|^2 vanishes at zeta = (" << zeta.x() << ", " << zeta.y()
           << ", " << zeta.z() << "), omega = " << omega
           << "; choose a different reference medium or detune (q, omega)";
        return os.str();
    }
};

/** Thrown for omega <= 0: the formulation is inherently dynamic (Theta, Psi carry 1/w and w). */
struct ZeroFrequency : Error {
    ZeroFrequency()
        : Error("ZeroFrequency: omega must be strictly positive; probe "
                "quasi-static behaviour with a small omega instead of 0") {}
};

/**
 * @brief One admissible kernel argument zeta = xi + q with its denominators.
 *
 * Construction enforces the resonance guard: both |ds| and |dl| must exceed
 * kResonanceGuard * max(w^2, c^2 |zeta|^2). omega <= 0 is rejected.
 */
struct Zeta {
    Vec3 zeta;               ///< xi + q, rad/m
    double omega;            ///< angular frequency, rad/s
    ReferenceMedium reference;
    double zeta2;            ///< |zeta|^2
    double ds;               ///< w^2 - c2^2 |zeta|^2
    double dl;               ///< w^2 - c1^2 |zeta|^2

    Zeta(const Vec3& z, double w, const ReferenceMedium& ref)
        : zeta(z), omega(w), reference(ref), zeta2(z.squaredNorm()) {
        if (!(w > 0.0)) throw ZeroFrequency();
        const double w2 = w * w;
        const double s2 = ref.c2 * ref.c2 * zeta2;
        const double l2 = ref.c1 * ref.c1 * zeta2;
        ds = w2 - s2;
        dl = w2 - l2;
        if (std::abs(ds) < kResonanceGuard * std::max(w2, s2))
            throw ResonantReference(z, w, "c2");
        if (std::abs(dl) < kResonanceGuard * std::max(w2, l2))
            throw ResonantReference(z, w, "c1");
    }
};

/**
 * @brief Phi_ij = w^2 [ (c1^2 - c2^2) zeta_i zeta_j / (ds dl) + d_ij / ds ].
 *
 * Equals w^2 rho0 H^-1 with H_ij = -(lambda0 + mu0) zeta_i zeta_j
 * + (w^2 rho0 - mu0 |zeta|^2) d_ij. Even in zeta; Phi(0) = I.
 */
inline Mat3 eval_phi(const Zeta& z) {
    const double w2 = z.omega * z.omega;
    const double c1 = z.reference.c1, c2 = z.reference.c2;
    const double k1 = w2 * (c1 * c1 - c2 * c2) / (z.ds * z.dl);
    const double k2 = w2 / z.ds;
    Mat3 phi = k1 * (z.zeta * z.zeta.transpose());
    phi.diagonal().array() += k2;
    return phi;
}

/**
 * @brief Theta, symmetrized in its last two indices:
 *
 *   Theta_ijp = -(1 / (2 w rho0)) [ Phi_ij zeta_p + Phi_ip zeta_j ],
 *
 * returned as 3x6 with the (j, p) pair in Voigt order. Odd in zeta.
 */
inline Mat36 eval_theta(const Zeta& z) {
    const Mat3 phi = eval_phi(z);
    const double c = -0.5 / (z.omega * z.reference.material.rho);
    Mat36 theta;
    for (int i = 0; i < 3; ++i)
        for (int J = 0; J < 6; ++J) {
            const int j = kVoigtPairs[J][0], p = kVoigtPairs[J][1];
            theta(i, J) = c * (phi(i, j) * z.zeta[p] + phi(i, p) * z.zeta[j]);
        }
    return theta;
}

/**
 * @brief Gamma, the stress-to-stress kernel (6x6, minor symmetries):
 *
 *   Gamma_ijkl = a g1 + b g2 + d g4 + 1^{4s},
 *     a = c2^2 / ds,  b = (c1^2 - 2 c2^2) / dl,
 *     d = 2 c2^2 (c1^2 - c2^2) / (ds dl),
 *
 * with g1 = (zeta_i d_jk zeta_l + ... ) / 2, g2 = d_ij zeta_k zeta_l,
 * g4 = zeta_i zeta_j zeta_k zeta_l. Even in zeta; Gamma(0) = 1^{4s}
 * (Voigt diag(1,1,1,1/2,1/2,1/2)).
 */
inline Mat6 eval_gamma(const Zeta& z) {
    const double c1 = z.reference.c1, c2 = z.reference.c2;
    const double a = c2 * c2 / z.ds;
    const double b = (c1 * c1 - 2.0 * c2 * c2) / z.dl;
    const double d = 2.0 * c2 * c2 * (c1 * c1 - c2 * c2) / (z.ds * z.dl);
    const Vec3& zt = z.zeta;
    Mat6 gamma;
    for (int I = 0; I < 6; ++I) {
        const int i = kVoigtPairs[I][0], j = kVoigtPairs[I][1];
        for (int J = 0; J < 6; ++J) {
            const int k = kVoigtPairs[J][0], l = kVoigtPairs[J][1];
            const double g1 = 0.5 * (zt[i] * (j == k) * zt[l] + zt[i] * (j == l) * zt[k] +
                                     zt[j] * (i == k) * zt[l] + zt[j] * (i == l) * zt[k]);
            const double g2 = (i == j) * zt[k] * zt[l];
            const double g4 = zt[i] * zt[j] * zt[k] * zt[l];
            const double id = 0.5 * ((i == k) * (j == l) + (i == l) * (j == k));
            gamma(I, J) = a * g1 + b * g2 + d * g4 + id;
        }
    }
    return gamma;
}

/**
 * @brief Psi, the velocity-to-stress kernel (6x3):
 *
 *   Psi_ijp = -w rho0 [ d/(2 c2^2) ... ] — explicitly,
 *   Psi_ijp = -w rho0 [ 2 c2^2 (c1^2 - c2^2)/(ds dl) zeta_i zeta_j zeta_p
 *                       + (c1^2 - 2 c2^2)/dl d_ij zeta_p
 *                       + c2^2/ds (zeta_i d_jp + zeta_j d_ip) ].
 *
 * Odd in zeta; Psi(0) = 0.
 */
inline Mat63 eval_psi(const Zeta& z) {
    const double c1 = z.reference.c1, c2 = z.reference.c2;
    const double rho0 = z.reference.material.rho;
    const double k4 = 2.0 * c2 * c2 * (c1 * c1 - c2 * c2) / (z.ds * z.dl);
    const double k2 = (c1 * c1 - 2.0 * c2 * c2) / z.dl;
    const double k1 = c2 * c2 / z.ds;
    const Vec3& zt = z.zeta;
    Mat63 psi;
    for (int I = 0; I < 6; ++I) {
        const int i = kVoigtPairs[I][0], j = kVoigtPairs[I][1];
        for (int p = 0; p < 3; ++p) {
            psi(I, p) = -z.omega * rho0 *
                        (k4 * zt[i] * zt[j] * zt[p] + k2 * (i == j) * zt[p] +
                         k1 * (zt[i] * (j == p) + zt[j] * (i == p)));
        }
    }
    return psi;
}

/**
 * @brief Psi^ = D0 : Psi in closed form:
 *
 *   Psi^_mnp = -(w/2) [ 2 (c1^2 - c2^2)/(ds dl) zeta_m zeta_n zeta_p
 *                       + (1/ds) (zeta_m d_np + zeta_n d_mp) ].
 *
 * Identically equal to Theta^_pmn (= rho0 Theta_pmn): the adjointness identity
 * at kernel level.
 */
inline Mat63 eval_psi_hat(const Zeta& z) {
    const double c1 = z.reference.c1, c2 = z.reference.c2;
    const double k4 = 2.0 * (c1 * c1 - c2 * c2) / (z.ds * z.dl);
    const double k1 = 1.0 / z.ds;
    const Vec3& zt = z.zeta;
    Mat63 psi_hat;
    for (int I = 0; I < 6; ++I) {
        const int m = kVoigtPairs[I][0], n = kVoigtPairs[I][1];
        for (int p = 0; p < 3; ++p) {
            psi_hat(I, p) = -0.5 * z.omega *
                            (k4 * zt[m] * zt[n] * zt[p] +
                             k1 * (zt[m] * (n == p) + zt[n] * (m == p)));
        }
    }
    return psi_hat;
}

/**
 * @brief Gamma^ = D0 : Gamma in closed form (major + minor symmetries):
 *
 *   Gamma^_mnkl = (1/rho0) [ g1 / (2 ds)
 *                 - (c1^2 - 2 c2^2) / (2 c2^2 (3 c1^2 - 4 c2^2)) d_mn d_kl
 *                 + (c1^2 - c2^2)/(ds dl) g4 + 1^{4s} / (2 c2^2) ].
 *
 * The d_mn d_kl coefficient is frequency-independent: the dl-dependent parts
 * of D0 : Gamma cancel exactly. 3 c1^2 - 4 c2^2 = (3 lambda0 + 2 mu0)/rho0 > 0.
 */
inline Mat6 eval_gamma_hat(const Zeta& z) {
    const double c1 = z.reference.c1, c2 = z.reference.c2;
    const double rho0 = z.reference.material.rho;
    const double a = 0.5 / z.ds;
    const double b = -(c1 * c1 - 2.0 * c2 * c2) /
                     (2.0 * c2 * c2 * (3.0 * c1 * c1 - 4.0 * c2 * c2));
    const double d = (c1 * c1 - c2 * c2) / (z.ds * z.dl);
    const double e = 0.5 / (c2 * c2);
    const Vec3& zt = z.zeta;
    Mat6 gh;
    for (int I = 0; I < 6; ++I) {
        const int m = kVoigtPairs[I][0], n = kVoigtPairs[I][1];
        for (int J = 0; J < 6; ++J) {
            const int k = kVoigtPairs[J][0], l = kVoigtPairs[J][1];
            const double g1 = 0.5 * (zt[m] * (n == k) * zt[l] + zt[m] * (n == l) * zt[k] +
                                     zt[n] * (m == k) * zt[l] + zt[n] * (m == l) * zt[k]);
            const double g4 = zt[m] * zt[n] * zt[k] * zt[l];
            const double id = 0.5 * ((m == k) * (n == l) + (m == l) * (n == k));
            gh(I, J) = (a * g1 + b * ((m == n) * (k == l)) + d * g4 + e * id) / rho0;
        }
    }
    return gh;
}

/** The four kernels and their hatted transforms at one zeta. All entries real. */
struct SpectralKernels {
    Mat3 phi;        ///< Phi
    Mat36 theta;     ///< Theta (last two indices symmetrized)
    Mat63 psi;       ///< Psi
    Mat6 gamma;      ///< Gamma
    Mat3 phi_hat;    ///< rho0 * Phi
    Mat36 theta_hat; ///< rho0 * Theta
    Mat63 psi_hat;   ///< D0 : Psi (== Theta^ transposed)
    Mat6 gamma_hat;  ///< D0 : Gamma (major symmetry)
};

/**
 * @brief Evaluate all kernels and hatted forms at one zeta.
 *
 * The hatted forms use the closed-form expressions above (exactly symmetric by
 * construction); the equivalent compliance-contraction path is provided
 * separately for cross-checks.
 */
inline SpectralKernels eval_hatted(const Zeta& z) {
    SpectralKernels k;
    const double rho0 = z.reference.material.rho;
    k.phi = eval_phi(z);
    k.theta = eval_theta(z);
    k.psi = eval_psi(z);
    k.gamma = eval_gamma(z);
    k.phi_hat = rho0 * k.phi;
    k.theta_hat = rho0 * k.theta;
    k.psi_hat = eval_psi_hat(z);
    k.gamma_hat = eval_gamma_hat(z);
    return k;
}

/**
 * @brief Alternative evaluation of Psi^ as the Voigt contraction [D0] W [Psi].
 *
 * Independent computation path for validating eval_psi_hat.
 */
inline Mat63 psi_hat_via_compliance(const Zeta& z) {
    const Mat6 d0 = compliance_voigt(z.reference.material);
    return d0 * WeightW::matrix() * eval_psi(z);
}

/**
 * @brief Alternative evaluation of Gamma^ as the Voigt contraction [D0] W [Gamma].
 *
 * Independent computation path for validating eval_gamma_hat.
 */
inline Mat6 gamma_hat_via_compliance(const Zeta& z) {
    const Mat6 d0 = compliance_voigt(z.reference.material);
    return d0 * WeightW::matrix() * eval_gamma(z);
}

}  // namespace dynhom
