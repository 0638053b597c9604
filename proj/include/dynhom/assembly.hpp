/**
 * @file assembly.hpp
 * @brief Assembly of the coupled block system linking all subregion
 *        eigenstresses and eigenvelocities.
 *
 * Averaging the consistency conditions over each subregion alpha turns the
 * pointwise equivalence between the heterogeneous cell and the reference
 * medium into a finite linear system. Its building blocks are, for each
 * ordered subregion pair (alpha, beta) and each kernel K in
 * {Gamma^, Phi^, Psi^, Theta^},
 *
 *   Kblock^{ab} = sum_{xi != 0} f^a g^a(xi) f^b g^b(-xi) K(xi + q),
 *
 * i.e. the f^a-scaled pair sums, plus real diagonal augmentations from the
 * pointwise part of the consistency conditions:
 *
 *   Gamma~ diag block a  +=  f^a [D0] ([D^a] - [D0])^-1 [D0]
 *   Phi~   diag block a  +=  f^a (rho0)^2 / (rho^a - rho0) * I3
 *
 * (hatted form throughout; the Voigt weight W acts on the eigenstress
 * unknowns at solve time, not inside the stored blocks).
 *
 * Structure obtained by construction, not by truncation-limit arguments: the
 * lattice sum iterates a half lattice and adds the +xi and -xi members
 * together. Because every kernel matrix is real for real zeta, each pair
 * contributes a hermitian update to Gamma~ and Phi~ and an adjoint update to
 * (Psi^, Theta^), so the assembled invariants
 *
 *   Gamma~ = Gamma~†,   Phi~ = Phi~†,   Psiblock = Thetablock†,
 *   Kblock^{ab} = conj(Kblock^{ba})
 *
 * hold for arbitrary (asymmetric) cells up to roundoff at every truncation.
 *
 * Eigenfields exist only where the material differs from the reference:
 * subregions matching the reference density carry no eigenvelocity, and
 * subregions matching the reference stiffness carry no eigenstress. Blocks
 * are stored full-size for all subregions; the per-subregion activity masks
 * tell the solver which rows/columns participate. A subregion matching the
 * reference in exactly one of (bulk, shear) modulus has a singular stiffness
 * contrast that the augmentation cannot invert; that is rejected as
 * DegenerateContrast.
 */
#pragma once

#include <dynhom/kernels.hpp>
#include <dynhom/unit_cell.hpp>
#include <dynhom/voigt.hpp>

#include <Eigen/LU>

#include <array>
#include <exception>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dynhom {

/**
 * @brief Thrown when (D^a - D0) is singular but nonzero for a subregion:
 *        exactly one of the bulk/shear moduli matches the reference.
 *
 * Remedy: perturb the matching modulus, or equalize both (pure density
 * contrast, handled by eigenstress elimination), or move the reference.
 */
struct DegenerateContrast : Error {
    DegenerateContrast(const std::string& label, const char* matching_modulus)
        : Error("DegenerateContrast: subregion '" + label + "' matches the reference " +
                matching_modulus +
                " modulus while the other modulus differs, so the stiffness "
                "contrast (D^a - D0) is singular; perturb the matching modulus, "
                "equalize both (pure density contrast), or change the reference") {}
};

/** Identification of one assembled system: where and how it was built. */
struct SystemMeta {
    Vec3 q = Vec3::Zero();               ///< Bloch wavevector, rad/m
    double omega = 0.0;                  ///< angular frequency, rad/s
    std::array<int, 3> n_max{0, 0, 0};   ///< truncation per axis
    int alpha_bar = 0;                   ///< number of subregions
};

/**
 * @brief The assembled block system at one (q, omega).
 *
 * Block row/column alpha corresponds to cell.subregions()[alpha]. Stress
 * blocks are 6x6, velocity blocks 3x3; mixed blocks accordingly. All
 * subregions occupy slots whether or not their eigenfields are active; the
 * masks record activity for the solver's row/column elimination.
 */
struct AssembledSystem {
    BlockMatC gamma_tilde;  ///< 6a x 6a: Gamma^ pair sums + stiffness augmentation
    BlockMatC phi_tilde;    ///< 3a x 3a: Phi^ pair sums + density augmentation
    BlockMatC psi_hat;      ///< 6a x 3a: Psi^ pair sums
    BlockMatC theta_hat;    ///< 3a x 6a: Theta^ pair sums
    BlockMat f1;            ///< 6a x 6: stack of f^a * I6
    BlockMat f2;            ///< 3a x 3: stack of f^a * I3
    SystemMeta meta;

    ReferenceMedium reference;            ///< medium the kernels were built from
    std::vector<double> f;                ///< volume fractions, subregion order
    std::vector<std::string> labels;      ///< subregion labels, same order
    std::vector<char> stress_active;      ///< eigenstress present for subregion a
    std::vector<char> velocity_active;    ///< eigenvelocity present for subregion a
    std::vector<std::string> warnings;    ///< conditioning notices from assembly

    explicit AssembledSystem(const ReferenceMedium& ref) : reference(ref) {}

    int n_stress_active() const {
        int n = 0;
        for (char a : stress_active) n += (a != 0);
        return n;
    }
    int n_velocity_active() const {
        int n = 0;
        for (char a : velocity_active) n += (a != 0);
        return n;
    }
};

/**
 * @brief Relative adjointness residual max|Psiblock - Thetablock†| /
 *        max(1, max|Psiblock|).
 */
inline double adjointness_residual(const AssembledSystem& sys) {
    if (sys.psi_hat.size() == 0) return 0.0;
    const double num =
        (sys.psi_hat - sys.theta_hat.adjoint()).cwiseAbs().maxCoeff();
    return num / std::max(1.0, sys.psi_hat.cwiseAbs().maxCoeff());
}

/**
 * @brief Half of the truncated reciprocal lattice, origin excluded.
 *
 * Keeps n with n1 > 0, or n1 = 0 and n2 > 0, or n1 = n2 = 0 and n3 > 0;
 * the full sum is recovered by adding each point and its negative. Order is
 * lexicographic, hence deterministic.
 */
inline std::vector<std::array<int, 3>> half_lattice(const std::array<int, 3>& n_max) {
    std::vector<std::array<int, 3>> pts;
    const auto [m1, m2, m3] = n_max;
    pts.reserve(static_cast<std::size_t>((2 * m1 + 1) * (2 * m2 + 1) * (2 * m3 + 1) / 2));
    for (int n3 = 1; n3 <= m3; ++n3) pts.push_back({0, 0, n3});
    for (int n2 = 1; n2 <= m2; ++n2)
        for (int n3 = -m3; n3 <= m3; ++n3) pts.push_back({0, n2, n3});
    for (int n1 = 1; n1 <= m1; ++n1)
        for (int n2 = -m2; n2 <= m2; ++n2)
            for (int n3 = -m3; n3 <= m3; ++n3) pts.push_back({n1, n2, n3});
    return pts;
}

namespace detail {

/** Partial kernel-sum accumulators for one worker (full block shapes). */
struct PairSums {
    BlockMatC gamma, phi, psi, theta;

    explicit PairSums(int alpha_bar)
        : gamma(BlockMatC::Zero(6 * alpha_bar, 6 * alpha_bar)),
          phi(BlockMatC::Zero(3 * alpha_bar, 3 * alpha_bar)),
          psi(BlockMatC::Zero(6 * alpha_bar, 3 * alpha_bar)),
          theta(BlockMatC::Zero(3 * alpha_bar, 6 * alpha_bar)) {}
};

/**
 * @brief Accumulate lattice points [begin, end) of the half lattice into sums.
 *
 * Adds the +xi and -xi members together: with u_a = f^a g^a(xi) and
 * c = u_a conj(u_b), the pair contributes c K(xi+q) + conj(c) K(-xi+q) to
 * block (a, b). Kernel matrices are real, so this update is hermitian for
 * Gamma^/Phi^ and adjoint for (Psi^, Theta^) pairwise.
 */
inline void accumulate_half_lattice(const UnitCell& cell, const SpectralGrid& grid,
                                    const std::vector<double>& f,
                                    const std::vector<std::array<int, 3>>& pts,
                                    std::size_t begin, std::size_t end, PairSums& out) {
    const auto alpha_bar = static_cast<int>(cell.subregions().size());
    const ReferenceMedium& ref = cell.reference();
    std::vector<Complex> u(static_cast<std::size_t>(alpha_bar));

    for (std::size_t ip = begin; ip < end; ++ip) {
        const auto& n = pts[ip];
        const Vec3 xi = cell.lattice_point(n[0], n[1], n[2]);
        SpectralKernels kp, km;
        try {
            kp = eval_hatted(Zeta(xi + grid.q, grid.omega, ref));
            km = eval_hatted(Zeta(-xi + grid.q, grid.omega, ref));
        } catch (const ResonantReference& e) {
            std::ostringstream os;
            os << e.what() << " [lattice point n = (" << n[0] << ", " << n[1]
               << ", " << n[2] << ") or its negative]";
            throw ResonantReference(os.str());
        }
        for (int a = 0; a < alpha_bar; ++a)
            u[static_cast<std::size_t>(a)] =
                f[static_cast<std::size_t>(a)] * g_factor(cell.subregions()[static_cast<std::size_t>(a)], xi);

        for (int a = 0; a < alpha_bar; ++a) {
            for (int b = 0; b < alpha_bar; ++b) {
                const Complex c = u[static_cast<std::size_t>(a)] *
                                  std::conj(u[static_cast<std::size_t>(b)]);
                const Complex cc = std::conj(c);
                out.gamma.block<6, 6>(6 * a, 6 * b) +=
                    c * kp.gamma_hat.cast<Complex>() + cc * km.gamma_hat.cast<Complex>();
                out.phi.block<3, 3>(3 * a, 3 * b) +=
                    c * kp.phi_hat.cast<Complex>() + cc * km.phi_hat.cast<Complex>();
                out.psi.block<6, 3>(6 * a, 3 * b) +=
                    c * kp.psi_hat.cast<Complex>() + cc * km.psi_hat.cast<Complex>();
                out.theta.block<3, 6>(3 * a, 6 * b) +=
                    c * kp.theta_hat.cast<Complex>() + cc * km.theta_hat.cast<Complex>();
            }
        }
    }
}

}  // namespace detail

/**
 * @brief Assemble the block system for one (q, omega) point.
 *
 * @param cell     validated unit cell
 * @param grid     truncation n_max plus the (q, omega) point
 * @param threads  worker count for the lattice sum (>= 1); partial sums are
 *                 merged in fixed worker order, so results are deterministic
 *                 for a fixed thread count and agree across thread counts to
 *                 roundoff
 *
 * @throws ResonantReference  when any zeta = +-xi + q trips the guard (the
 *                            message names the lattice point)
 * @throws DegenerateContrast when a subregion's stiffness contrast is
 *                            singular but nonzero
 */
inline AssembledSystem assemble(const UnitCell& cell, const SpectralGrid& grid,
                                int threads = 1) {
    grid.validate();
    if (threads < 1) throw Error("assemble: threads must be >= 1");

    const auto alpha_bar = static_cast<int>(cell.subregions().size());
    const ReferenceMedium& ref = cell.reference();
    const double rho0 = ref.material.rho;

    AssembledSystem sys(ref);
    sys.meta = SystemMeta{grid.q, grid.omega, grid.n_max, alpha_bar};
    sys.f = volume_fractions(cell);
    sys.gamma_tilde = BlockMatC::Zero(6 * alpha_bar, 6 * alpha_bar);
    sys.phi_tilde = BlockMatC::Zero(3 * alpha_bar, 3 * alpha_bar);
    sys.psi_hat = BlockMatC::Zero(6 * alpha_bar, 3 * alpha_bar);
    sys.theta_hat = BlockMatC::Zero(3 * alpha_bar, 6 * alpha_bar);
    sys.f1 = BlockMat::Zero(6 * alpha_bar, 6);
    sys.f2 = BlockMat::Zero(3 * alpha_bar, 3);

    // Contrast classification and the real diagonal augmentations.
    const Mat6 d0 = compliance_voigt(ref.material);
    for (int a = 0; a < alpha_bar; ++a) {
        const auto ia = static_cast<std::size_t>(a);
        const BoxSubregion& s = cell.subregions()[ia];
        const IsotropicMaterial& m = s.material;
        const double fa = sys.f[ia];
        sys.labels.push_back(s.label);
        sys.f1.block<6, 6>(6 * a, 0) = fa * Mat6::Identity();
        sys.f2.block<3, 3>(3 * a, 0) = fa * Mat3::Identity();

        const bool kappa_eq =
            std::abs(m.kappa() - ref.material.kappa()) <=
            kMaterialEqualTol * std::max(std::abs(m.kappa()), std::abs(ref.material.kappa()));
        const bool mu_eq = std::abs(m.mu - ref.material.mu) <=
                           kMaterialEqualTol * std::max(m.mu, ref.material.mu);

        if (kappa_eq && mu_eq) {
            sys.stress_active.push_back(0);  // no stiffness contrast: Sigma^a = 0
        } else if (kappa_eq || mu_eq) {
            throw DegenerateContrast(s.label, kappa_eq ? "bulk" : "shear");
        } else {
            sys.stress_active.push_back(1);
            const Mat6 delta_d = compliance_voigt(m) - d0;
            Eigen::PartialPivLU<Mat6> lu(delta_d);
            if (lu.rcond() < 1e-12) {
                std::ostringstream os;
                os << "subregion '" << s.label
                   << "': stiffness contrast is nearly singular (condition ~ "
                   << 1.0 / std::max(lu.rcond(), 1e-300)
                   << "); augmentation accuracy degrades";
                sys.warnings.push_back(os.str());
            }
            sys.gamma_tilde.block<6, 6>(6 * a, 6 * a) +=
                (fa * (d0 * lu.solve(d0))).cast<Complex>();
        }

        if (same_density(m, ref.material)) {
            sys.velocity_active.push_back(0);  // no density contrast: Udot^a = 0
        } else {
            sys.velocity_active.push_back(1);
            const double contrast = rho0 / (m.rho - rho0);
            if (std::abs(contrast) > 1e12) {
                std::ostringstream os;
                os << "subregion '" << s.label
                   << "': density contrast is nearly zero (augmentation scale ~ "
                   << std::abs(contrast) << " rho0); conditioning degrades";
                sys.warnings.push_back(os.str());
            }
            sys.phi_tilde.block<3, 3>(3 * a, 3 * a) +=
                fa * rho0 * contrast * Mat3C::Identity();
        }
    }

    if (alpha_bar == 0) return sys;

    // Kernel pair sums over the half lattice, +-xi added together.
    const std::vector<std::array<int, 3>> pts = half_lattice(grid.n_max);
    const std::size_t npts = pts.size();
    const auto nworkers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), std::max<std::size_t>(npts, 1));

    std::vector<detail::PairSums> partial;
    partial.reserve(nworkers);
    for (std::size_t w = 0; w < nworkers; ++w) partial.emplace_back(alpha_bar);

    if (nworkers <= 1) {
        detail::accumulate_half_lattice(cell, grid, sys.f, pts, 0, npts, partial[0]);
    } else {
        std::vector<std::exception_ptr> errors(nworkers);
        std::vector<std::thread> workers;
        workers.reserve(nworkers);
        const std::size_t chunk = (npts + nworkers - 1) / nworkers;
        for (std::size_t w = 0; w < nworkers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(npts, begin + chunk);
            workers.emplace_back([&, w, begin, end] {
                try {
                    detail::accumulate_half_lattice(cell, grid, sys.f, pts, begin, end,
                                                    partial[w]);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : workers) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (const auto& p : partial) {
        sys.gamma_tilde += p.gamma;
        sys.phi_tilde += p.phi;
        sys.psi_hat += p.psi;
        sys.theta_hat += p.theta;
    }
    return sys;
}

}  // namespace dynhom
