/**
 * @file test_cli.cpp
 * @brief Configuration parsing, normalized emission, the run pipeline's file
 *        outputs and exit codes, and the installed binary end to end.
 */
#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace dynhom;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* kMinimalConfig =
    "schema = dynhom-config-1\n"
    "cell.a1_m = 1.0\n"
    "cell.a2_m = 1.0\n"
    "cell.a3_m = 1.0\n"
    "reference.rho_kg_m3 = 1000\n"
    "reference.lambda_pa = 2.0e9\n"
    "reference.mu_pa = 1.0e9\n"
    "subregion.0.label = inc\n"
    "subregion.0.lo_m = -0.5 -0.5 -0.5\n"
    "subregion.0.hi_m = 0.5 0.5 0.5\n"
    "subregion.0.rho_kg_m3 = 2000\n"
    "subregion.0.lambda_pa = 4.0e9\n"
    "subregion.0.mu_pa = 2.0e9\n"
    "truncation.n_max = 2\n"
    "sweep.q_rad_m = 0.05 0 0\n"
    "sweep.omega_rad_s = 1099.5574287564276\n";  // 0.35 c2 pi / a

fs::path scratch_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / ("dynhom_test_" + leaf);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
    REQUIRE(out.good());
}

std::size_t count_fields(const std::string& line) {
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST_CASE("minimal config parses with defaults", "[cli]") {
    const RunConfig cfg = parse_config(kMinimalConfig, "mini");
    CHECK(cfg.half_periods == Vec3(1.0, 1.0, 1.0));
    CHECK(cfg.reference_material.mu == 1.0e9);
    CHECK(cfg.matrix_material.rho == cfg.reference_material.rho);  // defaulted
    CHECK(cfg.subregions.size() == 1);
    CHECK(cfg.subregions[0].label == "inc");
    CHECK(cfg.n_max == std::array<int, 3>{2, 2, 2});
    CHECK(cfg.q_list.size() == 1);
    CHECK(cfg.omega_list.size() == 1);
    CHECK(cfg.results_name == "results.csv");
    CHECK(cfg.willis_check == false);
    CHECK(cfg.probe_sigma[0] == Complex(1.0, 0.0));
    CHECK(cfg.probe_udot.cwiseAbs().maxCoeff() == 0.0);
    CHECK_NOTHROW(make_cell(cfg));
}

TEST_CASE("config diagnostics carry file and line", "[cli]") {
    SECTION("unknown key") {
        const std::string text = std::string(kMinimalConfig) + "bogus.key = 1\n";
        CHECK_THROWS_WITH(parse_config(text, "cfg"),
                          ContainsSubstring("cfg:17") && ContainsSubstring("bogus.key"));
    }
    SECTION("bad number") {
        std::string text = kMinimalConfig;
        const auto pos = text.find("= 1000");
        text.replace(pos, 6, "= 1e3q");
        CHECK_THROWS_WITH(parse_config(text, "cfg"), ContainsSubstring("cfg:5"));
    }
    SECTION("duplicate key") {
        const std::string text = std::string(kMinimalConfig) + "cell.a1_m = 2.0\n";
        CHECK_THROWS_WITH(parse_config(text, "cfg"),
                          ContainsSubstring("duplicate") && ContainsSubstring("cell.a1_m"));
    }
    SECTION("unsupported schema") {
        std::string text = kMinimalConfig;
        const auto pos = text.find("dynhom-config-1");
        text.replace(pos, 15, "dynhom-config-9");
        CHECK_THROWS_WITH(parse_config(text, "cfg"), ContainsSubstring("schema"));
    }
    SECTION("missing required key") {
        std::string text = kMinimalConfig;
        const auto pos = text.find("truncation.n_max = 2\n");
        text.erase(pos, std::string("truncation.n_max = 2\n").size());
        CHECK_THROWS_WITH(parse_config(text, "cfg"), ContainsSubstring("truncation.n_max"));
    }
    SECTION("missing omega") {
        std::string text = kMinimalConfig;
        const auto pos = text.find("sweep.omega_rad_s");
        text.erase(pos);
        CHECK_THROWS_WITH(parse_config(text, "cfg"), ContainsSubstring("omega"));
    }
    SECTION("subregion index gap") {
        std::string text = kMinimalConfig;
        std::string shifted;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            const auto pos = line.find("subregion.0.");
            if (pos != std::string::npos) line.replace(pos, 12, "subregion.1.");
            shifted += line + "\n";
        }
        CHECK_THROWS_WITH(parse_config(shifted, "cfg"),
                          ContainsSubstring("missing subregion.0"));
    }
    SECTION("partial matrix material") {
        const std::string text = std::string(kMinimalConfig) + "matrix.rho_kg_m3 = 1500\n";
        CHECK_THROWS_WITH(parse_config(text, "cfg"), ContainsSubstring("matrix"));
    }
    SECTION("value-free line") {
        const std::string text = std::string(kMinimalConfig) + "just words\n";
        CHECK_THROWS_AS(parse_config(text, "cfg"), ConfigError);
    }
}

TEST_CASE("sweep accumulation and linspace", "[cli]") {
    std::string text = kMinimalConfig;
    text += "sweep.q_rad_m = 0 0.01 0\n";
    text += "sweep.omega_rad_s = 900 950\n";
    text += "sweep.omega_linspace_rad_s = 100 200 3\n";
    const RunConfig cfg = parse_config(text, "cfg");
    REQUIRE(cfg.q_list.size() == 2);
    CHECK(cfg.q_list[1] == Vec3(0.0, 0.01, 0.0));
    REQUIRE(cfg.omega_list.size() == 6);
    CHECK(cfg.omega_list[1] == 900.0);
    CHECK(cfg.omega_list[3] == 100.0);
    CHECK(cfg.omega_list[4] == 150.0);
    CHECK(cfg.omega_list[5] == 200.0);
}

TEST_CASE("split expands into abutting labeled sub-boxes", "[cli]") {
    const std::string text = std::string(kMinimalConfig) + "subregion.0.split = 2 2 2\n";
    const RunConfig cfg = parse_config(text, "cfg");
    REQUIRE(cfg.subregions.size() == 8);
    CHECK(cfg.subregions[0].label == "inc.0.0.0");
    CHECK(cfg.subregions[7].label == "inc.1.1.1");

    double vol = 0.0;
    for (const auto& s : cfg.subregions) vol += s.volume();
    CHECK(vol == Catch::Approx(1.0));  // parent box volume

    // Shared faces are bitwise identical (k fastest, then j, then i).
    CHECK(cfg.subregions[0].hi.x() == cfg.subregions[4].lo.x());
    CHECK(cfg.subregions[0].hi.y() == cfg.subregions[2].lo.y());
    CHECK(cfg.subregions[0].hi.z() == cfg.subregions[1].lo.z());
    CHECK_NOTHROW(make_cell(cfg));  // no overlap trips
}

TEST_CASE("probe values parse into complex amplitudes", "[cli]") {
    std::string text = kMinimalConfig;
    text += "probe.sigma_re = 1 2 3 4 5 6\n";
    text += "probe.sigma_im = 0 0 0 0 0 1\n";
    text += "probe.udot_re = 0.5 0 0\n";
    const RunConfig cfg = parse_config(text, "cfg");
    CHECK(cfg.probe_sigma[5] == Complex(6.0, 1.0));
    CHECK(cfg.probe_udot[0] == Complex(0.5, 0.0));
}

TEST_CASE("normalized emission round-trips", "[cli]") {
    std::string text = std::string(kMinimalConfig) + "subregion.0.split = 3 1 1\n";
    const RunConfig cfg = parse_config(text, "cfg");
    const std::string norm = emit_normalized(cfg);
    const RunConfig cfg2 = parse_config(norm, "norm");

    CHECK(cfg2.half_periods == cfg.half_periods);
    REQUIRE(cfg2.subregions.size() == cfg.subregions.size());
    for (std::size_t k = 0; k < cfg.subregions.size(); ++k) {
        CHECK(cfg2.subregions[k].lo == cfg.subregions[k].lo);
        CHECK(cfg2.subregions[k].hi == cfg.subregions[k].hi);
        CHECK(cfg2.subregions[k].label == cfg.subregions[k].label);
        CHECK(cfg2.subregions[k].material.mu == cfg.subregions[k].material.mu);
    }
    CHECK(cfg2.n_max == cfg.n_max);
    CHECK(cfg2.q_list.size() == cfg.q_list.size());
    CHECK(cfg2.omega_list == cfg.omega_list);
    // Idempotent: normalizing the normalized form changes nothing.
    CHECK(emit_normalized(cfg2) == norm);
}

TEST_CASE("points file parsing", "[cli]") {
    const fs::path dir = scratch_dir("points");
    spit(dir / "pts.txt",
         "# probe locations\n"
         "0 0 0\n"
         "0.25, -0.25, 0.1\n"
         "\n");
    const auto pts = load_points((dir / "pts.txt").string());
    REQUIRE(pts.size() == 2);
    CHECK(pts[1] == Vec3(0.25, -0.25, 0.1));

    spit(dir / "empty.txt", "# nothing\n");
    CHECK_THROWS_AS(load_points((dir / "empty.txt").string()), ConfigError);
    CHECK_THROWS_AS(load_points((dir / "absent.txt").string()), ConfigError);
}

TEST_CASE("check summary reports sizes and warnings", "[cli]") {
    const RunConfig cfg = parse_config(
        std::string(kMinimalConfig) + "subregion.0.split = 3 3 3\n", "cfg");
    const std::string summary = check_summary(cfg);
    CHECK_THAT(summary, ContainsSubstring("alpha_bar = 27"));
    CHECK_THAT(summary, ContainsSubstring("Gamma~ block 162x162"));
    CHECK_THAT(summary, ContainsSubstring("fill fraction"));
    CHECK_THAT(summary, ContainsSubstring("MB"));

    // Homogeneous warning.
    std::string no_sub = kMinimalConfig;
    const auto pos = no_sub.find("subregion.0.label");
    const auto end = no_sub.find("truncation.");
    no_sub.erase(pos, end - pos);
    const std::string s2 = check_summary(parse_config(no_sub, "cfg"));
    CHECK_THAT(s2, ContainsSubstring("homogeneous"));

    // Matrix-differs warning.
    const std::string with_matrix = std::string(kMinimalConfig) +
                                    "matrix.rho_kg_m3 = 1500\n"
                                    "matrix.lambda_pa = 2.0e9\n"
                                    "matrix.mu_pa = 1.0e9\n";
    const std::string s3 = check_summary(parse_config(with_matrix, "cfg"));
    CHECK_THAT(s3, ContainsSubstring("matrix material differs"));
}

TEST_CASE("run pipeline writes results, report, and fields", "[cli]") {
    const fs::path dir = scratch_dir("run");
    std::string text = kMinimalConfig;
    text += "sweep.omega_rad_s = 1200\n";  // second frequency
    text += "report.willis_check = true\n";
    const RunConfig cfg = parse_config(text, "cfg");

    spit(dir / "pts.txt", "0 0 0\n0.2 0.2 0.2\n");
    RunOptions opts;
    opts.out_dir = (dir / "out").string();
    opts.points_path = (dir / "pts.txt").string();

    const RunOutcome out = run_config(cfg, opts, "cfg");
    CHECK(out.exit_code == 0);
    REQUIRE(out.records.size() == 2);
    for (const auto& r : out.records) {
        CHECK(r.solved);
        CHECK(r.residuals_ok());
        REQUIRE(r.res_willis.has_value());
        CHECK(*r.res_willis < 1e-8);
        CHECK(r.wall_ms > 0.0);
    }

    const std::string csv = slurp(out.results_path);
    std::istringstream is(csv);
    std::string header, row1, row2;
    REQUIRE(std::getline(is, header));
    REQUIRE(std::getline(is, row1));
    REQUIRE(std::getline(is, row2));
    CHECK(count_fields(header) == count_fields(row1));
    CHECK(count_fields(header) == count_fields(row2));
    CHECK_THAT(header, ContainsSubstring("d_bar_re_1_1") &&
                           ContainsSubstring("res_willis_selfadj") &&
                           ContainsSubstring("rcond_velocity_bracket"));
    CHECK_THAT(row1, ContainsSubstring("ok"));

    const std::string report = slurp(out.report_path);
    CHECK_THAT(report, ContainsSubstring("point 1/2") && ContainsSubstring("overall: 2/2"));

    const std::string fields = slurp(out.fields_path);
    std::istringstream fis(fields);
    std::string fheader;
    REQUIRE(std::getline(fis, fheader));
    CHECK_THAT(fheader, ContainsSubstring("sigma_re_11") && ContainsSubstring("udot_im_3"));
    int rows = 0;
    std::string line;
    while (std::getline(fis, line)) rows += line.empty() ? 0 : 1;
    CHECK(rows == 4);  // 2 sweep points x 2 sample points
}

TEST_CASE("per-point failures keep the sweep alive with exit 2", "[cli]") {
    const fs::path dir = scratch_dir("resonant");
    std::string text = kMinimalConfig;
    // Second frequency sits exactly on the shear resonance of the q-shifted
    // lattice point n = (1,0,0): omega = c2 * (pi/a1 + q1).
    text += "sweep.omega_rad_s = 3191.5926535897929\n";
    const RunConfig cfg = parse_config(text, "cfg");
    RunOptions opts;
    opts.out_dir = (dir / "out").string();

    const RunOutcome out = run_config(cfg, opts, "cfg");
    CHECK(out.exit_code == 2);
    REQUIRE(out.records.size() == 2);
    CHECK(out.records[0].solved);
    CHECK_FALSE(out.records[1].solved);
    CHECK_THAT(out.records[1].error, ContainsSubstring("ResonantReference"));

    const std::string csv = slurp(out.results_path);
    CHECK_THAT(csv, ContainsSubstring("error: ResonantReference"));
    const std::string report = slurp(out.report_path);
    CHECK_THAT(report, ContainsSubstring("FAILED"));
}

TEST_CASE("n_max override validation", "[cli]") {
    const RunConfig cfg = parse_config(kMinimalConfig, "cfg");
    RunOptions opts;
    opts.out_dir = scratch_dir("override").string();
    opts.n_max_override = {1, 2, 1};
    const RunOutcome out = run_config(cfg, opts, "cfg");
    CHECK(out.exit_code == 0);
    CHECK(out.records[0].n_max == std::array<int, 3>{1, 2, 1});
}

TEST_CASE("binary end to end", "[cli]") {
    const char* bin_env = std::getenv("DYNHOM_BIN");
    REQUIRE(bin_env != nullptr);
    const std::string bin = bin_env;
    const fs::path dir = scratch_dir("binary");
    spit(dir / "run.cfg", kMinimalConfig);

    const auto shell = [&](const std::string& args) {
        const std::string cmd = bin + " " + args + " > " + (dir / "stdout.txt").string() +
                                " 2> " + (dir / "stderr.txt").string();
        const int rc = std::system(cmd.c_str());
        REQUIRE(rc != -1);
        return WEXITSTATUS(rc);
    };

    SECTION("check prints the summary") {
        CHECK(shell("check " + (dir / "run.cfg").string()) == 0);
        CHECK_THAT(slurp(dir / "stdout.txt"), ContainsSubstring("alpha_bar = 1"));
    }

    SECTION("emit-normalized round-trips through the binary") {
        CHECK(shell("check --emit-normalized " + (dir / "run.cfg").string()) == 0);
        const std::string norm = slurp(dir / "stdout.txt");
        spit(dir / "norm.cfg", norm);
        CHECK(shell("check --emit-normalized " + (dir / "norm.cfg").string()) == 0);
        CHECK(slurp(dir / "stdout.txt") == norm);
    }

    SECTION("run is bit-deterministic for a fixed config and one worker") {
        CHECK(shell("run " + (dir / "run.cfg").string() + " --threads 1 --out-dir " +
                    (dir / "out1").string()) == 0);
        CHECK(shell("run " + (dir / "run.cfg").string() + " --threads 1 --out-dir " +
                    (dir / "out2").string()) == 0);
        CHECK(slurp(dir / "out1" / "results.csv") == slurp(dir / "out2" / "results.csv"));
        CHECK_THAT(slurp(dir / "out1" / "results.csv"), ContainsSubstring("ok"));
    }

    SECTION("hard errors exit 1") {
        CHECK(shell("run " + (dir / "missing.cfg").string()) == 1);
        CHECK_THAT(slurp(dir / "stderr.txt"), ContainsSubstring("error"));

        spit(dir / "bad.cfg", "schema = dynhom-config-1\nnonsense = 1\n");
        CHECK(shell("run " + (dir / "bad.cfg").string()) == 1);
        CHECK(shell("check " + (dir / "bad.cfg").string()) == 1);
    }

    SECTION("fields flag writes the snapshot") {
        spit(dir / "pts.txt", "0 0 0\n");
        CHECK(shell("run " + (dir / "run.cfg").string() + " --out-dir " +
                    (dir / "outf").string() + " --fields " + (dir / "pts.txt").string()) == 0);
        CHECK(fs::exists(dir / "outf" / "fields.csv"));
    }

    SECTION("n-max override rejects bad counts") {
        CHECK(shell("run " + (dir / "run.cfg").string() + " --n-max 2 3 --out-dir " +
                    (dir / "outn").string()) != 0);
    }
}
