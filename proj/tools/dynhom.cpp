/**
 * @file dynhom.cpp
 * @brief Command-line front end.
 *
 *   dynhom run <config> [--n-max N | --n-max N1 N2 N3] [--threads T]
 *                       [--out-dir DIR] [--fields POINTS]
 *   dynhom check <config> [--emit-normalized]
 *
 * Exit codes: 0 success, 1 hard error (bad config, invalid cell, I/O),
 * 2 completed sweep with per-point failures or residual breaches.
 */
#include <dynhom/dynhom.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

namespace {

int do_run(const std::string& config_path, const std::vector<int>& n_max, int threads,
           const std::string& out_dir, const std::string& points_path) {
    dynhom::RunConfig cfg = dynhom::load_config(config_path);
    dynhom::RunOptions opts;
    opts.threads = threads;
    opts.out_dir = out_dir;
    if (!points_path.empty()) opts.points_path = points_path;
    if (!n_max.empty()) {
        if (n_max.size() == 1)
            opts.n_max_override = {n_max[0], n_max[0], n_max[0]};
        else if (n_max.size() == 3)
            opts.n_max_override = {n_max[0], n_max[1], n_max[2]};
        else
            throw dynhom::Error("--n-max takes one value or three");
        for (int n : *opts.n_max_override)
            if (n < 1) throw dynhom::Error("--n-max values must be >= 1");
    }

    const dynhom::RunOutcome out = dynhom::run_config(cfg, opts, config_path);
    std::printf("results: %s\nreport:  %s\n", out.results_path.c_str(),
                out.report_path.c_str());
    if (!out.fields_path.empty()) std::printf("fields:  %s\n", out.fields_path.c_str());
    int solved = 0;
    for (const auto& r : out.records) solved += r.solved ? 1 : 0;
    std::printf("%d/%zu point(s) solved, exit %d\n", solved, out.records.size(),
                out.exit_code);
    return out.exit_code;
}

int do_check(const std::string& config_path, bool emit_normalized) {
    const dynhom::RunConfig cfg = dynhom::load_config(config_path);
    if (emit_normalized) {
        std::fputs(dynhom::emit_normalized(cfg).c_str(), stdout);
        return 0;
    }
    std::fputs(dynhom::check_summary(cfg).c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynhom — dynamic homogenization of periodic elastic composites"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<int> n_max;
    int threads = 1;
    std::string out_dir = ".";
    std::string points_path;
    bool emit_normalized = false;

    CLI::App* run = app.add_subcommand("run", "solve the sweep and write result files");
    run->add_option("config", config_path, "configuration file")->required();
    run->add_option("--n-max", n_max, "override truncation order (1 or 3 integers)")
        ->expected(1, 3);
    run->add_option("--threads", threads, "assembly worker threads")
        ->check(CLI::PositiveNumber);
    run->add_option("--out-dir", out_dir, "output directory (created if missing)");
    run->add_option("--fields", points_path,
                    "reconstruct eigenfields at the points listed in this file");

    CLI::App* check = app.add_subcommand("check", "validate a configuration");
    check->add_option("config", config_path, "configuration file")->required();
    check->add_flag("--emit-normalized", emit_normalized,
                    "print the canonical form of the configuration and exit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(run))
            return do_run(config_path, n_max, threads, out_dir, points_path);
        return do_check(config_path, emit_normalized);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dynhom: error: %s\n", e.what());
        return 1;
    }
}
