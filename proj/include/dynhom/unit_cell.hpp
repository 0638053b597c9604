/**
 * @file unit_cell.hpp
 * @brief Periodic unit-cell description: periods, reference medium, box
 *        subregions with isotropic materials, and the geometric g-factors.
 *
 * The cell occupies [-a_1, a_1] x [-a_2, a_2] x [-a_3, a_3] with volume
 * V = 8 a_1 a_2 a_3, and the reciprocal lattice is xi_c = n_c * pi / a_c for
 * integer n_c. Only heterogeneity-bearing subregions are listed: eigenfields
 * vanish identically wherever the material equals the reference medium, so a
 * matrix that coincides with the reference is stored but never discretized.
 */
#pragma once

#include <dynhom/voigt.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace dynhom {

/** Relative tolerance used to decide "this property equals the reference". */
inline constexpr double kMaterialEqualTol = 1e-12;

/**
 * @brief Homogeneous isotropic linear-elastic material.
 *
 * Stiffness C_ijkl = lambda d_ij d_kl + mu (d_ik d_jl + d_il d_jk).
 */
struct IsotropicMaterial {
    double rho;     ///< density, kg/m^3
    double lambda;  ///< Lame lambda, Pa
    double mu;      ///< Lame mu (shear modulus), Pa

    /** Bulk modulus kappa = lambda + 2 mu / 3, Pa. */
    double kappa() const { return lambda + 2.0 * mu / 3.0; }

    /** @throws Error unless rho > 0, mu > 0 and 3 lambda + 2 mu > 0. */
    void validate(const std::string& who) const {
        if (!(rho > 0.0) || !std::isfinite(rho))
            throw Error(who + ": density must be positive and finite");
        if (!(mu > 0.0) || !std::isfinite(mu))
            throw Error(who + ": shear modulus mu must be positive and finite");
        if (!(3.0 * lambda + 2.0 * mu > 0.0) || !std::isfinite(lambda))
            throw Error(who +
                        ": 3*lambda + 2*mu must be positive (positive-definite "
                        "stiffness)");
    }
};

inline bool same_density(const IsotropicMaterial& a, const IsotropicMaterial& b) {
    return std::abs(a.rho - b.rho) <= kMaterialEqualTol * std::max(a.rho, b.rho);
}

inline bool same_stiffness(const IsotropicMaterial& a, const IsotropicMaterial& b) {
    const double ks = std::max(std::abs(a.kappa()), std::abs(b.kappa()));
    const double ms = std::max(a.mu, b.mu);
    return std::abs(a.kappa() - b.kappa()) <= kMaterialEqualTol * ks &&
           std::abs(a.mu - b.mu) <= kMaterialEqualTol * ms;
}

/** 6x6 Voigt stiffness matrix [C] (tensor-Voigt, no W scaling embedded). */
inline Mat6 stiffness_voigt(const IsotropicMaterial& m) {
    Mat6 c = Mat6::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c(i, j) = m.lambda + (i == j ? 2.0 * m.mu : 0.0);
    for (int i = 3; i < 6; ++i) c(i, i) = m.mu;
    return c;
}

/**
 * @brief 6x6 Voigt compliance matrix [D] (tensor-Voigt), closed form
 *
 *   D_mnij = -lambda / (2 mu (3 lambda + 2 mu)) d_mn d_ij
 *            + 1 / (4 mu) (d_mi d_nj + d_mj d_ni).
 *
 * Satisfies the tensor identity D : C = 1^{4s}, i.e. [D] W [C] = [1^{4s}].
 */
inline Mat6 compliance_voigt(const IsotropicMaterial& m) {
    const double a = -m.lambda / (2.0 * m.mu * (3.0 * m.lambda + 2.0 * m.mu));
    Mat6 d = Mat6::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) d(i, j) = a + (i == j ? 0.5 / m.mu : 0.0);
    for (int i = 3; i < 6; ++i) d(i, i) = 0.25 / m.mu;
    return d;
}

/**
 * @brief The homogeneous isotropic comparison medium and its wave speeds.
 *
 * c1 = sqrt((lambda + 2 mu) / rho) (longitudinal), c2 = sqrt(mu / rho) (shear);
 * c1 > c2 > 0 always holds for a valid material.
 */
struct ReferenceMedium {
    IsotropicMaterial material;
    double c1;  ///< longitudinal wave speed, m/s
    double c2;  ///< shear wave speed, m/s

    explicit ReferenceMedium(const IsotropicMaterial& m)
        : material(m),
          c1(std::sqrt((m.lambda + 2.0 * m.mu) / m.rho)),
          c2(std::sqrt(m.mu / m.rho)) {
        material.validate("ReferenceMedium");
        if (!(c1 > c2 && c2 > 0.0))
            throw Error("ReferenceMedium: wave speeds must satisfy c1 > c2 > 0");
    }
};

/** Axis-aligned box subregion carrying an eigenstress/eigenvelocity pair. */
struct BoxSubregion {
    Vec3 lo;  ///< lower corner, m
    Vec3 hi;  ///< upper corner, m
    IsotropicMaterial material;
    std::string label;

    double volume() const {
        return (hi.x() - lo.x()) * (hi.y() - lo.y()) * (hi.z() - lo.z());
    }
    Vec3 midpoint() const { return 0.5 * (lo + hi); }
    Vec3 half_width() const { return 0.5 * (hi - lo); }
};

/** sin(z)/z with the removable singularity filled in (sinc(0) = 1). */
inline double sinc(double z) {
    if (std::abs(z) < 1e-4) {
        const double z2 = z * z;
        return 1.0 - z2 / 6.0 * (1.0 - z2 / 20.0);
    }
    return std::sin(z) / z;
}

/**
 * @brief Subregion-averaged Fourier phase g(xi) = (1/V) Int_box e^{i xi.x} dV.
 *
 * Closed form for a box with midpoint m and half-widths h:
 *
 *   g(xi) = prod_c e^{i xi_c m_c} sinc(xi_c h_c),    |g| <= 1.
 *
 * g(-xi) = g(xi)^* always; g is real for boxes symmetric about the origin,
 * and vanishes for the full-cell box at every nonzero lattice point.
 */
inline Complex g_factor(const BoxSubregion& region, const Vec3& xi) {
    const Vec3 m = region.midpoint();
    const Vec3 h = region.half_width();
    double phase = 0.0, amp = 1.0;
    for (int c = 0; c < 3; ++c) {
        phase += xi[c] * m[c];
        amp *= sinc(xi[c] * h[c]);
    }
    return std::polar(amp, phase);
}

/** Check g(-xi) == conj(g(xi)) to 1e-14 absolute; returns pass/fail. */
inline bool g_conjugation_check(const BoxSubregion& region, const Vec3& xi) {
    const Complex a = g_factor(region, Vec3(-xi));
    const Complex b = std::conj(g_factor(region, xi));
    return std::abs(a - b) <= 1e-14;
}

/**
 * @brief The periodic unit cell.
 *
 * Invariants enforced at construction: subregions lie inside the cell domain,
 * have pairwise disjoint interiors, and each differs from the reference medium
 * in density or stiffness (or both) — a subregion identical to the reference
 * carries no eigenfields and must simply not be listed.
 */
class UnitCell {
  public:
    UnitCell(const Vec3& half_periods, const ReferenceMedium& reference,
             const IsotropicMaterial& matrix_material,
             std::vector<BoxSubregion> subregions)
        : half_periods_(half_periods),
          reference_(reference),
          matrix_material_(matrix_material),
          subregions_(std::move(subregions)) {
        for (int c = 0; c < 3; ++c)
            if (!(half_periods_[c] > 0.0) || !std::isfinite(half_periods_[c]))
                throw Error("UnitCell: half-periods must be positive and finite");
        matrix_material_.validate("UnitCell matrix material");

        const double pad = 1e-12;
        for (const auto& s : subregions_) {
            s.material.validate("UnitCell subregion '" + s.label + "'");
            for (int c = 0; c < 3; ++c) {
                if (!(s.lo[c] < s.hi[c]))
                    throw Error("UnitCell subregion '" + s.label +
                                "': lo must be strictly below hi on every axis");
                if (s.lo[c] < -half_periods_[c] * (1.0 + pad) - pad ||
                    s.hi[c] > half_periods_[c] * (1.0 + pad) + pad)
                    throw Error("UnitCell subregion '" + s.label +
                                "': box exceeds the cell domain [-a_i, a_i]");
            }
            if (same_density(s.material, reference_.material) &&
                same_stiffness(s.material, reference_.material))
                throw Error("UnitCell subregion '" + s.label +
                            "': material equals the reference medium; regions "
                            "without contrast carry no eigenfields and must "
                            "not be listed");
        }
        for (std::size_t i = 0; i < subregions_.size(); ++i)
            for (std::size_t j = i + 1; j < subregions_.size(); ++j)
                if (boxes_overlap(subregions_[i], subregions_[j]))
                    throw Error("UnitCell: subregions '" + subregions_[i].label +
                                "' and '" + subregions_[j].label +
                                "' have overlapping interiors");
    }

    const Vec3& half_periods() const { return half_periods_; }
    const ReferenceMedium& reference() const { return reference_; }
    const IsotropicMaterial& matrix_material() const { return matrix_material_; }
    const std::vector<BoxSubregion>& subregions() const { return subregions_; }

    /** Cell volume V = 8 a_1 a_2 a_3, m^3. */
    double volume() const {
        return 8.0 * half_periods_.x() * half_periods_.y() * half_periods_.z();
    }

    /** Reciprocal-lattice point xi(n) with xi_c = n_c pi / a_c, rad/m. */
    Vec3 lattice_point(int n1, int n2, int n3) const {
        return Vec3(n1 * M_PI / half_periods_.x(), n2 * M_PI / half_periods_.y(),
                    n3 * M_PI / half_periods_.z());
    }

  private:
    static bool boxes_overlap(const BoxSubregion& a, const BoxSubregion& b) {
        // Open-interval overlap on every axis <=> interiors intersect.
        for (int c = 0; c < 3; ++c) {
            const double lo = std::max(a.lo[c], b.lo[c]);
            const double hi = std::min(a.hi[c], b.hi[c]);
            if (!(lo < hi)) return false;
        }
        return true;
    }

    Vec3 half_periods_;
    ReferenceMedium reference_;
    IsotropicMaterial matrix_material_;
    std::vector<BoxSubregion> subregions_;
};

/**
 * @brief Volume fractions f_a = V_a / V, in subregion order.
 *
 * Their sum is the inclusion fill fraction (<= 1; overlap is rejected by the
 * UnitCell constructor).
 */
inline std::vector<double> volume_fractions(const UnitCell& cell) {
    std::vector<double> f;
    f.reserve(cell.subregions().size());
    const double v = cell.volume();
    for (const auto& s : cell.subregions()) f.push_back(s.volume() / v);
    return f;
}

/**
 * @brief Spectral truncation and Bloch point for one solve.
 *
 * The perturbation sums run over the full cube |n_c| <= n_max_c minus the
 * origin; the xi = 0 term is excluded always.
 */
struct SpectralGrid {
    std::array<int, 3> n_max;  ///< truncation per axis, all >= 1
    Vec3 q;                    ///< Bloch wavevector, rad/m
    double omega;              ///< angular frequency, rad/s

    void validate() const {
        for (int c = 0; c < 3; ++c)
            if (n_max[c] < 1)
                throw Error("SpectralGrid: n_max must be >= 1 on every axis");
        if (!std::isfinite(omega) || !q.allFinite())
            throw Error("SpectralGrid: q and omega must be finite");
    }
};

}  // namespace dynhom
