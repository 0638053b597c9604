/**
 * @file runner.hpp
 * @brief Batch execution of a run configuration: the (q, omega) sweep, result
 *        CSV, plain-text report, and optional field-snapshot CSV.
 *
 * Sweep points run sequentially in input order (q outermost); per-point
 * solver failures are recorded and the sweep continues. Exit-code contract:
 *
 *   0  every point solved and every residual below its tolerance
 *   2  at least one point failed or breached a residual tolerance
 *
 * (hard failures before the sweep — unreadable config, invalid cell — throw
 * and are mapped to exit 1 by the CLI). Output files are bit-deterministic
 * for a fixed configuration and one worker; thread counts affect results
 * only at roundoff.
 *
 * Residual tolerances applied per record: 1e-9 for the structural residuals
 * (hermiticity of Dbar and rhobar, coupling adjointness), 1e-10 for energy
 * reality, 1e-8 for the optional Willis self-adjointness check.
 */
#pragma once

#include <dynhom/assembly.hpp>
#include <dynhom/config.hpp>
#include <dynhom/solver.hpp>
#include <dynhom/voigt.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dynhom {

inline constexpr double kTolStructural = 1e-9;  ///< hermiticity + adjointness
inline constexpr double kTolEnergy = 1e-10;     ///< energy-reality residual
inline constexpr double kTolWillis = 1e-8;      ///< +-q self-adjointness residual
inline constexpr int kResultSchemaVersion = 1;

/** CLI-level knobs applied on top of the configuration file. */
struct RunOptions {
    std::optional<std::array<int, 3>> n_max_override;  ///< --n-max
    int threads = 1;                                   ///< --threads
    std::string out_dir = ".";                         ///< --out-dir
    std::optional<std::string> points_path;            ///< --fields
};

/** One sweep point's outcome: tensors, residuals, conditioning, timing. */
struct ResultRecord {
    Vec3 q = Vec3::Zero();
    double omega = 0.0;
    std::array<int, 3> n_max{0, 0, 0};

    bool solved = false;
    std::string error;  ///< failure description when !solved

    EffectiveProperties eff;  ///< valid when solved
    double res_herm_d_bar = 0.0;
    double res_herm_rho_bar = 0.0;
    double res_adjointness = 0.0;
    double res_energy = 0.0;
    std::optional<double> res_willis;  ///< set when the config requests the check

    double rcond_gamma_tilde = 1.0;
    double rcond_phi_tilde = 1.0;
    double rcond_stress_bracket = 1.0;
    double rcond_velocity_bracket = 1.0;

    double wall_ms = 0.0;  ///< reported in report.txt only, keeping results.csv
                           ///< byte-reproducible for a fixed config
    std::vector<std::string> warnings;  ///< assembly conditioning + solver notes

    bool residuals_ok() const {
        return res_herm_d_bar < kTolStructural && res_herm_rho_bar < kTolStructural &&
               res_adjointness < kTolStructural && res_energy < kTolEnergy &&
               (!res_willis || *res_willis < kTolWillis);
    }
};

/** Whole-sweep outcome; files are written by run_config itself. */
struct RunOutcome {
    int exit_code = 0;
    std::vector<ResultRecord> records;
    std::string results_path;  ///< as written
    std::string report_path;
    std::string fields_path;  ///< empty when no field snapshot was requested
};

namespace detail {

/** Deterministic energy probes: unit stresses, unit velocities, config probe. */
inline std::vector<std::pair<Voigt6, Vec3C>> energy_probes(const RunConfig& cfg) {
    std::vector<std::pair<Voigt6, Vec3C>> probes;
    for (int i = 0; i < 6; ++i) {
        Voigt6 s = Voigt6::Zero();
        s[i] = 1.0;
        probes.emplace_back(s, Vec3C::Zero());
    }
    for (int k = 0; k < 3; ++k) {
        Vec3C v = Vec3C::Zero();
        v[k] = 1.0;
        probes.emplace_back(Voigt6::Zero(), v);
    }
    probes.emplace_back(cfg.probe_sigma, cfg.probe_udot);
    return probes;
}

inline std::string sanitize_csv(std::string s) {
    for (auto& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

inline void header_block(std::vector<std::string>& cols, const char* base, int rows,
                         int ncols) {
    for (int i = 1; i <= rows; ++i)
        for (int j = 1; j <= ncols; ++j)
            for (const char* part : {"re", "im"})
                cols.push_back(std::string(base) + "_" + part + "_" + std::to_string(i) +
                               "_" + std::to_string(j));
}

/** Fixed result-CSV column order; the row writer mirrors these loops. */
inline std::vector<std::string> result_header() {
    std::vector<std::string> cols = {"schema_version", "status",   "q1_rad_m",
                                     "q2_rad_m",       "q3_rad_m", "omega_rad_s",
                                     "n_max_1",        "n_max_2",  "n_max_3"};
    header_block(cols, "d_bar", 6, 6);
    header_block(cols, "s1_bar", 6, 3);
    header_block(cols, "s2_bar", 3, 6);
    header_block(cols, "rho_bar", 3, 3);
    cols.push_back("willis_available");
    header_block(cols, "c_bar", 6, 6);
    header_block(cols, "s_willis", 6, 3);
    header_block(cols, "s_bar_willis", 3, 6);
    header_block(cols, "rho1_bar", 3, 3);
    for (const char* c : {"res_herm_d_bar", "res_herm_rho_bar", "res_adjointness",
                          "res_energy", "res_willis_selfadj", "rcond_gamma_tilde",
                          "rcond_phi_tilde", "rcond_stress_bracket",
                          "rcond_velocity_bracket"})
        cols.push_back(c);
    return cols;
}

inline void csv_number(std::ostream& os, double v) { os << "," << fmt_g17(v); }

template <typename Mat>
inline void csv_block(std::ostream& os, const Mat& m, bool valid) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (valid) {
                csv_number(os, m(i, j).real());
                csv_number(os, m(i, j).imag());
            } else {
                os << ",,";
            }
        }
}

inline void csv_row(std::ostream& os, const ResultRecord& r) {
    os << kResultSchemaVersion << ","
       << (r.solved ? (r.residuals_ok() ? "ok" : "residual-breach")
                    : "error: " + sanitize_csv(r.error));
    for (int c = 0; c < 3; ++c) csv_number(os, r.q[c]);
    csv_number(os, r.omega);
    for (int c = 0; c < 3; ++c) os << "," << r.n_max[static_cast<std::size_t>(c)];
    csv_block(os, r.eff.d_bar, r.solved);
    csv_block(os, r.eff.s1_bar, r.solved);
    csv_block(os, r.eff.s2_bar, r.solved);
    csv_block(os, r.eff.rho_bar, r.solved);
    os << "," << (r.solved && r.eff.willis_available ? 1 : 0);
    const bool wv = r.solved && r.eff.willis_available;
    csv_block(os, r.eff.c_bar, wv);
    csv_block(os, r.eff.s_willis, wv);
    csv_block(os, r.eff.s_bar_willis, wv);
    csv_block(os, r.eff.rho1_bar, wv);
    if (r.solved) {
        csv_number(os, r.res_herm_d_bar);
        csv_number(os, r.res_herm_rho_bar);
        csv_number(os, r.res_adjointness);
        csv_number(os, r.res_energy);
        if (r.res_willis) csv_number(os, *r.res_willis);
        else os << ",";
        csv_number(os, r.rcond_gamma_tilde);
        csv_number(os, r.rcond_phi_tilde);
        csv_number(os, r.rcond_stress_bracket);
        csv_number(os, r.rcond_velocity_bracket);
    } else {
        os << ",,,,,,,,,";
    }
    os << "\n";
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write output file '" + path + "'");
    return out;
}

}  // namespace detail

/**
 * @brief Human-readable validation summary (the `check` subcommand body).
 *
 * Builds the cell (so geometry/material errors surface here), then prints
 * subregion statistics, predicted system sizes and memory, and warnings; no
 * solving happens.
 */
inline std::string check_summary(const RunConfig& cfg) {
    const UnitCell cell = make_cell(cfg);
    const auto ab = static_cast<int>(cell.subregions().size());
    const std::vector<double> f = volume_fractions(cell);
    double fill = 0.0;
    for (double x : f) fill += x;

    std::ostringstream os;
    os << "cell: a = (" << cfg.half_periods.x() << ", " << cfg.half_periods.y() << ", "
       << cfg.half_periods.z() << ") m, volume " << cell.volume() << " m^3\n";
    const auto& rm = cfg.reference_material;
    os << "reference: rho = " << rm.rho << " kg/m^3, lambda = " << rm.lambda
       << " Pa, mu = " << rm.mu << " Pa (c1 = " << cell.reference().c1
       << " m/s, c2 = " << cell.reference().c2 << " m/s)\n";

    os << "alpha_bar = " << ab << ", fill fraction = " << fill << "\n";
    for (int a = 0; a < ab; ++a) {
        const auto& s = cell.subregions()[static_cast<std::size_t>(a)];
        os << "  [" << a << "] '" << s.label << "' f = " << f[static_cast<std::size_t>(a)]
           << (same_stiffness(s.material, rm) ? " (density contrast only)"
               : same_density(s.material, rm) ? " (stiffness contrast only)"
                                              : "")
           << "\n";
    }

    const long long npts = static_cast<long long>(2 * cfg.n_max[0] + 1) *
                               (2 * cfg.n_max[1] + 1) * (2 * cfg.n_max[2] + 1) -
                           1;
    const double mem_mb = 81.0 * ab * ab * 16.0 / (1024.0 * 1024.0);
    os << "Gamma~ block " << 6 * ab << "x" << 6 * ab << "; assembled system ~ " << mem_mb
       << " MB; " << npts << " lattice points per solve (n_max = " << cfg.n_max[0] << " "
       << cfg.n_max[1] << " " << cfg.n_max[2] << ")\n";
    os << "sweep: " << cfg.q_list.size() << " q-vector(s) x " << cfg.omega_list.size()
       << " omega value(s) = " << cfg.q_list.size() * cfg.omega_list.size()
       << " record(s)\n";

    if (ab == 0)
        os << "warning: no subregions — the cell is homogeneous and the effective "
              "properties equal the reference medium's\n";
    if (!(same_density(cfg.matrix_material, rm) && same_stiffness(cfg.matrix_material, rm)))
        os << "warning: matrix material differs from the reference medium; the "
              "formulation assumes the background equals the reference, so the matrix "
              "must be covered by explicit subregions (or the reference moved) for the "
              "results to describe this composite\n";
    return os.str();
}

/**
 * @brief Execute the sweep and write results/report (and fields when asked).
 *
 * @param cfg   parsed configuration
 * @param opts  CLI overrides
 * @param display_name  config name for the report header
 */
inline RunOutcome run_config(const RunConfig& cfg_in, const RunOptions& opts,
                             const std::string& display_name) {
    RunConfig cfg = cfg_in;
    if (opts.n_max_override) cfg.n_max = *opts.n_max_override;
    const UnitCell cell = make_cell(cfg);

    std::vector<Vec3> field_points;
    if (opts.points_path) field_points = load_points(*opts.points_path);

    std::filesystem::create_directories(opts.out_dir);
    const auto path = [&](const std::string& leaf) {
        return (std::filesystem::path(opts.out_dir) / leaf).string();
    };

    RunOutcome outcome;
    outcome.results_path = path(cfg.results_name);
    outcome.report_path = path(cfg.report_name);

    std::ofstream results = detail::open_out(outcome.results_path);
    const auto header = detail::result_header();
    for (std::size_t i = 0; i < header.size(); ++i)
        results << (i ? "," : "") << header[i];
    results << "\n";

    std::ofstream fields;
    if (!field_points.empty()) {
        outcome.fields_path = path(cfg.fields_name);
        fields = detail::open_out(outcome.fields_path);
        fields << "q1_rad_m,q2_rad_m,q3_rad_m,omega_rad_s,x_m,y_m,z_m";
        for (const char* slot : {"11", "22", "33", "23", "31", "12"})
            fields << ",sigma_re_" << slot << ",sigma_im_" << slot;
        for (int k = 1; k <= 3; ++k) fields << ",udot_re_" << k << ",udot_im_" << k;
        fields << "\n";
    }

    const auto probes = detail::energy_probes(cfg);

    for (const Vec3& q : cfg.q_list) {
        for (double omega : cfg.omega_list) {
            ResultRecord rec;
            rec.q = q;
            rec.omega = omega;
            rec.n_max = cfg.n_max;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const SpectralGrid grid{cfg.n_max, q, omega};
                const AssembledSystem sys = assemble(cell, grid, opts.threads);
                const InfluenceMatrices inf = solve_influence(sys);
                rec.eff = effective_properties(inf, sys);
                rec.solved = true;

                rec.warnings = sys.warnings;
                rec.warnings.insert(rec.warnings.end(), rec.eff.notes.begin(),
                                    rec.eff.notes.end());
                rec.rcond_gamma_tilde = inf.rcond_gamma_tilde;
                rec.rcond_phi_tilde = inf.rcond_phi_tilde;
                rec.rcond_stress_bracket = inf.rcond_stress_bracket;
                rec.rcond_velocity_bracket = inf.rcond_velocity_bracket;

                rec.res_herm_d_bar = hermitian_residual(rec.eff.d_bar);
                rec.res_herm_rho_bar = hermitian_residual(rec.eff.rho_bar);
                rec.res_adjointness = coupling_adjointness_residual(rec.eff);
                rec.res_energy = energy_reality_check(rec.eff, probes);
                if (cfg.willis_check)
                    rec.res_willis =
                        willis_self_adjointness_check(cell, q, omega, cfg.n_max, opts.threads);

                if (!field_points.empty()) {
                    const EigenfieldSolution eig =
                        eigenfields(inf, cfg.probe_sigma, cfg.probe_udot);
                    const FieldSnapshot snap =
                        reconstruct_fields(cell, grid, eig, field_points);
                    for (std::size_t p = 0; p < snap.points.size(); ++p) {
                        fields << detail::fmt_g17(q.x()) << "," << detail::fmt_g17(q.y())
                               << "," << detail::fmt_g17(q.z()) << ","
                               << detail::fmt_g17(omega);
                        for (int c = 0; c < 3; ++c)
                            detail::csv_number(fields, snap.points[p][c]);
                        for (int i = 0; i < 6; ++i) {
                            detail::csv_number(fields, snap.sigma[p][i].real());
                            detail::csv_number(fields, snap.sigma[p][i].imag());
                        }
                        for (int k = 0; k < 3; ++k) {
                            detail::csv_number(fields, snap.u_dot[p][k].real());
                            detail::csv_number(fields, snap.u_dot[p][k].imag());
                        }
                        fields << "\n";
                    }
                }
            } catch (const Error& e) {
                rec.solved = false;
                rec.error = e.what();
            }
            rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            detail::csv_row(results, rec);
            outcome.records.push_back(std::move(rec));
        }
    }

    // Plain-text report.
    std::ofstream report = detail::open_out(outcome.report_path);
    report << "dynhom run report\n"
           << "config: " << display_name << "\n\n"
           << check_summary(cfg) << "\n";
    int solved = 0, breached = 0;
    for (std::size_t i = 0; i < outcome.records.size(); ++i) {
        const auto& r = outcome.records[i];
        report << "point " << (i + 1) << "/" << outcome.records.size() << ": q = ("
               << r.q.x() << ", " << r.q.y() << ", " << r.q.z()
               << ") rad/m, omega = " << r.omega << " rad/s -> ";
        if (!r.solved) {
            report << "FAILED: " << r.error << "\n";
            continue;
        }
        ++solved;
        const bool ok = r.residuals_ok();
        if (!ok) ++breached;
        report << (ok ? "ok" : "RESIDUAL BREACH") << " (" << r.wall_ms << " ms)\n"
               << "  residuals: herm(Dbar) = " << r.res_herm_d_bar
               << ", herm(rhobar) = " << r.res_herm_rho_bar
               << ", adjointness = " << r.res_adjointness
               << ", energy = " << r.res_energy;
        if (r.res_willis) report << ", willis = " << *r.res_willis;
        report << "\n  rcond: Gamma~ = " << r.rcond_gamma_tilde
               << ", Phi~ = " << r.rcond_phi_tilde
               << ", B = " << r.rcond_stress_bracket
               << ", C = " << r.rcond_velocity_bracket << "\n";
        if (!r.eff.willis_available) report << "  note: Willis form unavailable\n";
        for (const auto& w : r.warnings) report << "  warning: " << w << "\n";
    }
    const auto total = static_cast<int>(outcome.records.size());
    outcome.exit_code = (solved == total && breached == 0) ? 0 : 2;
    report << "\noverall: " << solved << "/" << total << " point(s) solved, " << breached
           << " residual breach(es); exit code " << outcome.exit_code << "\n";
    return outcome;
}

}  // namespace dynhom
