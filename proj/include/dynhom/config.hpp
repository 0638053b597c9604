/**
 * @file config.hpp
 * @brief Run-configuration file format: parsing, validation, and canonical
 *        (normalized) emission.
 *
 * The format is flat `key = value` text. Units are part of the key names
 * (`_m`, `_pa`, `_kg_m3`, `_rad_m`, `_rad_s`); no unit inference happens
 * anywhere. Blank lines and `#` comments are ignored; unknown keys are
 * rejected with file:line diagnostics. Example:
 *
 *   schema = dynhom-config-1
 *   cell.a1_m = 0.001
 *   cell.a2_m = 0.001
 *   cell.a3_m = 0.001
 *   reference.rho_kg_m3 = 1000
 *   reference.lambda_pa = 2.0e9
 *   reference.mu_pa = 1.0e9
 *   subregion.0.label = inclusion
 *   subregion.0.lo_m = -0.0005 -0.0005 -0.0005
 *   subregion.0.hi_m =  0.0005  0.0005  0.0005
 *   subregion.0.rho_kg_m3 = 2700
 *   subregion.0.lambda_pa = 5.0e9
 *   subregion.0.mu_pa = 2.6e9
 *   subregion.0.split = 3 3 3
 *   truncation.n_max = 5
 *   sweep.q_rad_m = 100 0 0
 *   sweep.omega_rad_s = 1.0e5 2.0e5
 *
 * `subregion.<k>.split = s1 s2 s3` subdivides the box into a uniform grid of
 * s1*s2*s3 sub-boxes sharing the parent material (labels `<label>.i.j.k`),
 * which is how a coarse inclusion is discretized for subregion averaging.
 * Splits are expanded at parse time; the normalized form emitted by
 * `emit_normalized` lists the expanded subregions explicitly with full
 * (round-trip safe) precision, so re-parsing it reproduces the identical
 * cell.
 *
 * Sweep semantics: records are produced for the cross product of the q list
 * and the omega list, q outermost, both in file order.
 */
#pragma once

#include <dynhom/unit_cell.hpp>
#include <dynhom/voigt.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dynhom {

/** Parse/validation failure with file:line context. */
struct ConfigError : Error {
    using Error::Error;
};

inline constexpr const char* kConfigSchema = "dynhom-config-1";

/** Parsed, validated, split-expanded run configuration. */
struct RunConfig {
    Vec3 half_periods = Vec3::Zero();
    IsotropicMaterial reference_material{0, 0, 0};
    IsotropicMaterial matrix_material{0, 0, 0};  ///< defaults to the reference
    std::vector<BoxSubregion> subregions;        ///< post-split

    std::array<int, 3> n_max{1, 1, 1};
    std::vector<Vec3> q_list;
    std::vector<double> omega_list;

    std::string results_name = "results.csv";
    std::string report_name = "report.txt";
    std::string fields_name = "fields.csv";
    bool willis_check = false;  ///< compute the +-q self-adjointness residual per point

    Voigt6 probe_sigma = (Voigt6() << 1, 0, 0, 0, 0, 0).finished();  ///< Pa
    Vec3C probe_udot = Vec3C::Zero();                                ///< m/s
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] inline void config_fail(const std::string& name, int line, const std::string& msg) {
    throw ConfigError(name + ":" + std::to_string(line) + ": " + msg);
}

inline double parse_number(const std::string& tok, const std::string& name, int line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        config_fail(name, line, "expected a number, got '" + tok + "'");
    }
    if (used != tok.size()) config_fail(name, line, "trailing junk in number '" + tok + "'");
    return v;
}

inline std::vector<double> parse_numbers(const std::string& value, std::size_t want,
                                         const std::string& name, int line) {
    const auto toks = split_ws(value);
    if (want != 0 && toks.size() != want)
        config_fail(name, line,
                    "expected " + std::to_string(want) + " numbers, got " +
                        std::to_string(toks.size()));
    if (toks.empty()) config_fail(name, line, "expected at least one number");
    std::vector<double> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(parse_number(t, name, line));
    return out;
}

inline bool parse_bool(const std::string& value, const std::string& name, int line) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    config_fail(name, line, "expected true/false, got '" + value + "'");
}

/** Full-precision, round-trip-safe number formatting. */
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/** One subregion block under construction during parsing. */
struct SubregionDraft {
    std::optional<std::string> label;
    std::optional<Vec3> lo, hi;
    std::optional<double> rho, lambda, mu;
    std::array<int, 3> split{1, 1, 1};
    int first_line = 0;
};

/** Expand one draft into its split grid of boxes. */
inline void expand_subregion(const SubregionDraft& d, int index, const std::string& name,
                             std::vector<BoxSubregion>& out) {
    const std::string where = "subregion." + std::to_string(index);
    if (!d.lo || !d.hi)
        config_fail(name, d.first_line, where + ": lo_m and hi_m are required");
    if (!d.rho || !d.lambda || !d.mu)
        config_fail(name, d.first_line,
                    where + ": rho_kg_m3, lambda_pa and mu_pa are required");
    const std::string label = d.label.value_or("subregion-" + std::to_string(index));
    const IsotropicMaterial mat{*d.rho, *d.lambda, *d.mu};

    // Shared sub-box faces are computed once per axis, so adjacent boxes abut
    // exactly and the open-interior overlap check cannot trip on roundoff.
    std::array<std::vector<double>, 3> edges;
    for (int c = 0; c < 3; ++c) {
        const int s = d.split[static_cast<std::size_t>(c)];
        edges[static_cast<std::size_t>(c)].resize(static_cast<std::size_t>(s) + 1);
        for (int i = 0; i <= s; ++i)
            edges[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] =
                (*d.lo)[c] + ((*d.hi)[c] - (*d.lo)[c]) * (static_cast<double>(i) / s);
    }
    const bool whole = d.split == std::array<int, 3>{1, 1, 1};
    for (int i = 0; i < d.split[0]; ++i)
        for (int j = 0; j < d.split[1]; ++j)
            for (int k = 0; k < d.split[2]; ++k) {
                BoxSubregion box;
                box.lo = Vec3(edges[0][static_cast<std::size_t>(i)],
                              edges[1][static_cast<std::size_t>(j)],
                              edges[2][static_cast<std::size_t>(k)]);
                box.hi = Vec3(edges[0][static_cast<std::size_t>(i) + 1],
                              edges[1][static_cast<std::size_t>(j) + 1],
                              edges[2][static_cast<std::size_t>(k) + 1]);
                box.material = mat;
                box.label = whole ? label
                                  : label + "." + std::to_string(i) + "." +
                                        std::to_string(j) + "." + std::to_string(k);
                out.push_back(std::move(box));
            }
}

}  // namespace detail

/**
 * @brief Parse a configuration from text.
 *
 * @param text  file contents
 * @param name  display name for diagnostics (typically the path)
 * @throws ConfigError with `name:line:` context on any problem
 */
inline RunConfig parse_config(const std::string& text, const std::string& name) {
    using detail::config_fail;
    RunConfig cfg;

    std::set<std::string> seen;
    std::map<int, detail::SubregionDraft> drafts;
    bool matrix_given = false;
    std::array<std::optional<std::vector<double>>, 4> probe;  // sre, sim, ure, uim

    auto require_once = [&](const std::string& key, int line) {
        if (!seen.insert(key).second) config_fail(name, line, "duplicate key '" + key + "'");
    };

    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        std::string s = raw;
        const auto hash = s.find('#');
        if (hash != std::string::npos) s.erase(hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            config_fail(name, line, "expected 'key = value', got '" + detail::trim(raw) + "'");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (key.empty()) config_fail(name, line, "empty key");
        if (value.empty()) config_fail(name, line, "empty value for key '" + key + "'");

        if (key == "schema") {
            require_once(key, line);
            if (value != kConfigSchema)
                config_fail(name, line,
                            "unsupported schema '" + value + "' (this build reads '" +
                                kConfigSchema + "')");
        } else if (key == "cell.a1_m" || key == "cell.a2_m" || key == "cell.a3_m") {
            require_once(key, line);
            const int c = key[6] - '1';
            cfg.half_periods[c] = detail::parse_number(value, name, line);
        } else if (key == "reference.rho_kg_m3" || key == "reference.lambda_pa" ||
                   key == "reference.mu_pa") {
            require_once(key, line);
            const double v = detail::parse_number(value, name, line);
            if (key == "reference.rho_kg_m3") cfg.reference_material.rho = v;
            else if (key == "reference.lambda_pa") cfg.reference_material.lambda = v;
            else cfg.reference_material.mu = v;
        } else if (key == "matrix.rho_kg_m3" || key == "matrix.lambda_pa" ||
                   key == "matrix.mu_pa") {
            require_once(key, line);
            matrix_given = true;
            const double v = detail::parse_number(value, name, line);
            if (key == "matrix.rho_kg_m3") cfg.matrix_material.rho = v;
            else if (key == "matrix.lambda_pa") cfg.matrix_material.lambda = v;
            else cfg.matrix_material.mu = v;
        } else if (key.rfind("subregion.", 0) == 0) {
            const auto rest = key.substr(10);
            const auto dot = rest.find('.');
            if (dot == std::string::npos)
                config_fail(name, line, "malformed subregion key '" + key + "'");
            int idx = -1;
            try {
                std::size_t used = 0;
                idx = std::stoi(rest.substr(0, dot), &used);
                if (used != dot) throw std::invalid_argument("");
            } catch (const std::exception&) {
                config_fail(name, line, "bad subregion index in '" + key + "'");
            }
            if (idx < 0) config_fail(name, line, "subregion index must be >= 0");
            require_once(key, line);
            auto& d = drafts[idx];
            if (d.first_line == 0) d.first_line = line;
            const std::string field = rest.substr(dot + 1);
            if (field == "label") {
                d.label = value;
            } else if (field == "lo_m" || field == "hi_m") {
                const auto v = detail::parse_numbers(value, 3, name, line);
                (field == "lo_m" ? d.lo : d.hi) = Vec3(v[0], v[1], v[2]);
            } else if (field == "rho_kg_m3") {
                d.rho = detail::parse_number(value, name, line);
            } else if (field == "lambda_pa") {
                d.lambda = detail::parse_number(value, name, line);
            } else if (field == "mu_pa") {
                d.mu = detail::parse_number(value, name, line);
            } else if (field == "split") {
                const auto v = detail::parse_numbers(value, 3, name, line);
                for (int c = 0; c < 3; ++c) {
                    if (v[static_cast<std::size_t>(c)] < 1 ||
                        v[static_cast<std::size_t>(c)] !=
                            static_cast<double>(static_cast<int>(v[static_cast<std::size_t>(c)])))
                        config_fail(name, line, "split factors must be positive integers");
                    d.split[static_cast<std::size_t>(c)] =
                        static_cast<int>(v[static_cast<std::size_t>(c)]);
                }
            } else {
                config_fail(name, line, "unknown subregion field '" + field + "'");
            }
        } else if (key == "truncation.n_max") {
            require_once(key, line);
            const auto toks = detail::split_ws(value);
            if (toks.size() != 1 && toks.size() != 3)
                config_fail(name, line, "truncation.n_max takes 1 or 3 integers");
            for (std::size_t c = 0; c < 3; ++c) {
                const auto& t = toks[toks.size() == 1 ? 0 : c];
                const double v = detail::parse_number(t, name, line);
                if (v < 1 || v != static_cast<double>(static_cast<int>(v)))
                    config_fail(name, line, "n_max must be a positive integer");
                cfg.n_max[c] = static_cast<int>(v);
            }
        } else if (key == "sweep.q_rad_m") {
            const auto v = detail::parse_numbers(value, 3, name, line);
            cfg.q_list.emplace_back(v[0], v[1], v[2]);
        } else if (key == "sweep.omega_rad_s") {
            const auto v = detail::parse_numbers(value, 0, name, line);
            cfg.omega_list.insert(cfg.omega_list.end(), v.begin(), v.end());
        } else if (key == "sweep.omega_linspace_rad_s") {
            const auto v = detail::parse_numbers(value, 3, name, line);
            const int count = static_cast<int>(v[2]);
            if (count < 2 || v[2] != static_cast<double>(count))
                config_fail(name, line, "linspace count must be an integer >= 2");
            for (int i = 0; i < count; ++i)
                cfg.omega_list.push_back(v[0] + (v[1] - v[0]) * (static_cast<double>(i) /
                                                                 (count - 1)));
        } else if (key == "output.results") {
            require_once(key, line);
            cfg.results_name = value;
        } else if (key == "output.report") {
            require_once(key, line);
            cfg.report_name = value;
        } else if (key == "output.fields") {
            require_once(key, line);
            cfg.fields_name = value;
        } else if (key == "report.willis_check") {
            require_once(key, line);
            cfg.willis_check = detail::parse_bool(value, name, line);
        } else if (key == "probe.sigma_re" || key == "probe.sigma_im") {
            require_once(key, line);
            probe[key == "probe.sigma_re" ? 0 : 1] = detail::parse_numbers(value, 6, name, line);
        } else if (key == "probe.udot_re" || key == "probe.udot_im") {
            require_once(key, line);
            probe[key == "probe.udot_re" ? 2 : 3] = detail::parse_numbers(value, 3, name, line);
        } else {
            config_fail(name, line, "unknown key '" + key + "'");
        }
    }

    // Presence checks with the diagnostics pointing at the whole file.
    auto require_key = [&](const char* key) {
        if (seen.find(key) == seen.end())
            throw ConfigError(name + ": missing required key '" + std::string(key) + "'");
    };
    require_key("cell.a1_m");
    require_key("cell.a2_m");
    require_key("cell.a3_m");
    require_key("reference.rho_kg_m3");
    require_key("reference.lambda_pa");
    require_key("reference.mu_pa");
    require_key("truncation.n_max");
    if (cfg.q_list.empty())
        throw ConfigError(name + ": at least one sweep.q_rad_m line is required");
    if (cfg.omega_list.empty())
        throw ConfigError(name + ": at least one sweep.omega_rad_s value is required");

    if (matrix_given) {
        for (const char* k : {"matrix.rho_kg_m3", "matrix.lambda_pa", "matrix.mu_pa"})
            if (seen.find(k) == seen.end())
                throw ConfigError(name + ": matrix material is partially specified; give all "
                                         "of rho_kg_m3, lambda_pa, mu_pa or none");
    } else {
        cfg.matrix_material = cfg.reference_material;
    }

    if (!drafts.empty()) {
        int expect = 0;
        for (const auto& [idx, d] : drafts) {
            if (idx != expect)
                throw ConfigError(name + ": subregion indices must be contiguous from 0; "
                                         "missing subregion." +
                                  std::to_string(expect));
            detail::expand_subregion(d, idx, name, cfg.subregions);
            ++expect;
        }
    }

    if (probe[0] || probe[1]) {
        for (int i = 0; i < 6; ++i)
            cfg.probe_sigma[i] = Complex(probe[0] ? (*probe[0])[static_cast<std::size_t>(i)] : 0.0,
                                         probe[1] ? (*probe[1])[static_cast<std::size_t>(i)] : 0.0);
    }
    if (probe[2] || probe[3]) {
        for (int i = 0; i < 3; ++i)
            cfg.probe_udot[i] = Complex(probe[2] ? (*probe[2])[static_cast<std::size_t>(i)] : 0.0,
                                        probe[3] ? (*probe[3])[static_cast<std::size_t>(i)] : 0.0);
    }
    return cfg;
}

/** Read and parse a configuration file. */
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open configuration file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

/**
 * @brief Build the validated UnitCell of a configuration.
 *
 * @throws Error from UnitCell/material validation (messages name the
 *         offending subregion labels).
 */
inline UnitCell make_cell(const RunConfig& cfg) {
    cfg.reference_material.validate("reference material");
    const ReferenceMedium ref(cfg.reference_material);
    return UnitCell(cfg.half_periods, ref, cfg.matrix_material, cfg.subregions);
}

/**
 * @brief Canonical full-precision text for a parsed configuration.
 *
 * Splits are already expanded and every key is explicit, so the output
 * re-parses to an identical cell and sweep.
 */
inline std::string emit_normalized(const RunConfig& cfg) {
    using detail::fmt_g17;
    std::ostringstream os;
    os << "schema = " << kConfigSchema << "\n\n";
    for (int c = 0; c < 3; ++c)
        os << "cell.a" << (c + 1) << "_m = " << fmt_g17(cfg.half_periods[c]) << "\n";
    os << "\nreference.rho_kg_m3 = " << fmt_g17(cfg.reference_material.rho) << "\n"
       << "reference.lambda_pa = " << fmt_g17(cfg.reference_material.lambda) << "\n"
       << "reference.mu_pa = " << fmt_g17(cfg.reference_material.mu) << "\n"
       << "\nmatrix.rho_kg_m3 = " << fmt_g17(cfg.matrix_material.rho) << "\n"
       << "matrix.lambda_pa = " << fmt_g17(cfg.matrix_material.lambda) << "\n"
       << "matrix.mu_pa = " << fmt_g17(cfg.matrix_material.mu) << "\n";
    for (std::size_t k = 0; k < cfg.subregions.size(); ++k) {
        const auto& s = cfg.subregions[k];
        const std::string p = "subregion." + std::to_string(k) + ".";
        os << "\n" << p << "label = " << s.label << "\n"
           << p << "lo_m = " << fmt_g17(s.lo.x()) << " " << fmt_g17(s.lo.y()) << " "
           << fmt_g17(s.lo.z()) << "\n"
           << p << "hi_m = " << fmt_g17(s.hi.x()) << " " << fmt_g17(s.hi.y()) << " "
           << fmt_g17(s.hi.z()) << "\n"
           << p << "rho_kg_m3 = " << fmt_g17(s.material.rho) << "\n"
           << p << "lambda_pa = " << fmt_g17(s.material.lambda) << "\n"
           << p << "mu_pa = " << fmt_g17(s.material.mu) << "\n";
    }
    os << "\ntruncation.n_max = " << cfg.n_max[0] << " " << cfg.n_max[1] << " "
       << cfg.n_max[2] << "\n";
    for (const auto& q : cfg.q_list)
        os << "sweep.q_rad_m = " << fmt_g17(q.x()) << " " << fmt_g17(q.y()) << " "
           << fmt_g17(q.z()) << "\n";
    os << "sweep.omega_rad_s =";
    for (double w : cfg.omega_list) os << " " << fmt_g17(w);
    os << "\n\noutput.results = " << cfg.results_name << "\n"
       << "output.report = " << cfg.report_name << "\n"
       << "output.fields = " << cfg.fields_name << "\n"
       << "report.willis_check = " << (cfg.willis_check ? "true" : "false") << "\n"
       << "probe.sigma_re =";
    for (int i = 0; i < 6; ++i) os << " " << fmt_g17(cfg.probe_sigma[i].real());
    os << "\nprobe.sigma_im =";
    for (int i = 0; i < 6; ++i) os << " " << fmt_g17(cfg.probe_sigma[i].imag());
    os << "\nprobe.udot_re =";
    for (int i = 0; i < 3; ++i) os << " " << fmt_g17(cfg.probe_udot[i].real());
    os << "\nprobe.udot_im =";
    for (int i = 0; i < 3; ++i) os << " " << fmt_g17(cfg.probe_udot[i].imag());
    os << "\n";
    return os.str();
}

/**
 * @brief Read field sample points: one `x_m y_m z_m` triple per line
 *        (commas allowed), `#` comments ignored.
 */
inline std::vector<Vec3> load_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open points file");
    std::vector<Vec3> pts;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        const auto hash = s.find('#');
        if (hash != std::string::npos) s.erase(hash);
        for (auto& ch : s)
            if (ch == ',') ch = ' ';
        s = detail::trim(s);
        if (s.empty()) continue;
        const auto v = detail::parse_numbers(s, 3, path, line);
        pts.emplace_back(v[0], v[1], v[2]);
    }
    if (pts.empty()) throw ConfigError(path + ": no sample points found");
    return pts;
}

}  // namespace dynhom
