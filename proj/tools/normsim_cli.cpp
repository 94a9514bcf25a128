// Command-line front end: run / sweep / classify / export-density.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "normsim/config.hpp"
#include "normsim/engine.hpp"
#include "normsim/experiment.hpp"
#include "normsim/indicators.hpp"
#include "normsim/io.hpp"

namespace fs = std::filesystem;
using namespace normsim;

namespace {

std::string io_read(const std::string& path) { return detail::read_text_file(path); }

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// A flag override supersedes both the config value and its "defaulted" mark.
void mark_overridden(ConfigDocument& doc, const std::string& key) {
    auto& keys = doc.defaulted_keys;
    keys.erase(std::remove(keys.begin(), keys.end(), key), keys.end());
}

std::vector<std::string> provenance_meta(const ConfigDocument& doc, const std::string& kind) {
    std::vector<std::string> m;
    m.push_back("# normsim " + kind + " v" + std::to_string(kFormatVersion));
    m.push_back(meta_line("rng_family", kRngFamily));
    m.push_back(meta_line("n_agents", std::to_string(doc.params.n_agents)));
    m.push_back(meta_line("h", format_double(doc.params.h)));
    m.push_back(meta_line("u_m", format_double(doc.params.u_m)));
    m.push_back(meta_line("u_s", format_double(doc.params.u_s)));
    m.push_back(meta_line("mu", format_double(doc.params.mu)));
    m.push_back(meta_line("bounded", doc.params.bounded ? "true" : "false"));
    m.push_back(meta_line("seed", std::to_string(doc.params.seed)));
    m.push_back(meta_line("max_sweeps", std::to_string(doc.max_sweeps)));
    m.push_back(meta_line("snapshot_every", std::to_string(doc.snapshot_every)));
    m.push_back(meta_line("convergence_eps", format_double(doc.convergence_eps)));
    m.push_back(meta_line("convergence_window", std::to_string(doc.convergence_window)));
    m.push_back(meta_line("cluster_epsilon", format_double(doc.cluster_epsilon)));
    m.push_back(meta_line("major_share_threshold", format_double(doc.major_share_threshold)));
    m.push_back(meta_line("single_moderate_max", format_double(doc.classifier.single_moderate_max)));
    m.push_back(meta_line("moderate_margin", format_double(doc.classifier.moderate_margin)));
    m.push_back(meta_line("dip_threshold", format_double(doc.classifier.dip_threshold)));
    m.push_back(meta_line("rise_threshold", format_double(doc.classifier.rise_threshold)));
    m.push_back(meta_line("defaults_applied", join(doc.defaulted_keys, " ")));
    return m;
}

std::string snapshot_filename(std::uint64_t sweep) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshot_%08llu.csv", static_cast<unsigned long long>(sweep));
    return buf;
}

struct RunOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> max_sweeps;
    std::optional<std::uint64_t> snapshot_every;
    std::optional<double> cluster_epsilon;
    bool unbounded = false;
};

int cmd_run(const RunOpts& opts) {
    ConfigDocument doc = parse_config(io_read(opts.config_path));
    if (opts.seed) {
        doc.params.seed = *opts.seed;
        mark_overridden(doc, "seed");
    }
    if (opts.unbounded) {
        doc.params.bounded = false;
        mark_overridden(doc, "bounded");
    }
    if (opts.max_sweeps) {
        doc.max_sweeps = *opts.max_sweeps;
        mark_overridden(doc, "max_sweeps");
    }
    if (opts.snapshot_every) {
        doc.snapshot_every = *opts.snapshot_every;
        mark_overridden(doc, "snapshot_every");
    }
    if (opts.cluster_epsilon) {
        doc.cluster_epsilon = *opts.cluster_epsilon;
        mark_overridden(doc, "cluster_epsilon");
    }

    const RunConfig rc = doc.to_run_config();
    rc.validate();
    const RunResult rr = run(rc);

    const fs::path out(opts.out_dir);
    fs::create_directories(out);

    write_timeseries(rr.trajectory, out / "timeseries.csv", provenance_meta(doc, "timeseries"));

    std::vector<std::string> snap_extra;
    snap_extra.push_back(meta_line("cluster_epsilon", format_double(doc.cluster_epsilon)));
    snap_extra.push_back(meta_line("major_share_threshold", format_double(doc.major_share_threshold)));
    snap_extra.push_back(meta_line("defaults_applied", join(doc.defaulted_keys, " ")));
    std::vector<ClassificationRow> rows;
    for (const Snapshot& s : rr.snapshots) {
        SnapshotFile file;
        file.params = rc.params;
        file.sweep = s.sweep;
        file.agents = s.agents;
        file.extra_meta = snap_extra;
        const std::string name = snapshot_filename(s.sweep);
        write_snapshot(file, out / name);

        const IndicatorReport report =
            make_report(s.agents, doc.cluster_epsilon, doc.major_share_threshold);
        ClassificationRow row;
        row.source = name;
        row.sweep = s.sweep;
        row.n_clusters = report.clusters.size();
        row.n_major_clusters = report.n_major_clusters;
        row.avg_abs_main = report.avg_abs_main;
        row.avg_abs_secondary = report.avg_abs_secondary;
        row.pattern_main = classify_pattern(report, Dimension::main, doc.classifier);
        row.pattern_secondary = classify_pattern(report, Dimension::secondary, doc.classifier);
        rows.push_back(row);
    }

    auto summary_meta = provenance_meta(doc, "classification");
    summary_meta.push_back(meta_line(
        "norm_change_main",
        norm_change_name(interpret_norm_change(rr.trajectory, Dimension::main, doc.classifier))));
    summary_meta.push_back(meta_line(
        "norm_change_secondary",
        norm_change_name(interpret_norm_change(rr.trajectory, Dimension::secondary, doc.classifier))));
    // provenance_meta's first line names the wrong kind for this file; rebuild it
    summary_meta[0] = "# normsim classification v" + std::to_string(kFormatVersion);
    detail::write_text_file(out / "summary.csv", classification_csv(rows, summary_meta));

    const TrajectoryRecord& last = rr.trajectory.back();
    std::cout << "run finished: sweeps=" << last.sweep
              << (rr.stopped_early ? " (stopped early)" : "")
              << " avg_abs_main=" << format_double(last.avg_abs_main)
              << " avg_abs_secondary=" << format_double(last.avg_abs_secondary)
              << " major_clusters=" << last.n_clusters << '\n'
              << "outputs in " << out.string() << '\n';
    return 0;
}

struct SweepOpts {
    std::string plan = "default";
    std::string scale = "paper";
    std::string out_dir;
    unsigned jobs = 0;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> max_sweeps;
    std::optional<double> cluster_epsilon;
    bool unbounded = false;
};

int cmd_sweep(const SweepOpts& opts) {
    ExperimentPlan plan;
    std::vector<std::string> plan_meta;
    if (opts.plan == "default") {
        plan = build_default_plan();
    } else {
        const ConfigDocument doc = parse_config(io_read(opts.plan));
        plan = doc.to_plan();
        plan_meta.push_back(meta_line("defaults_applied", join(doc.defaulted_keys, " ")));
    }
    if (opts.scale == "desk") {
        // Quick-look preset: small population, fewer replicates, and early
        // stopping so converged cells do not burn the full sweep budget.
        plan.run_template.params.n_agents = 1000;
        plan.replicates = 5;
        plan.run_template.convergence_eps = 1e-9;
        plan.run_template.convergence_window = 50;
    } else if (opts.scale != "paper") {
        std::cerr << "normsim: error: --scale must be paper or desk, got '" << opts.scale << "'\n";
        return 1;
    }
    if (opts.seed) plan.base_seed = *opts.seed;
    if (opts.max_sweeps) {
        plan.run_template.max_sweeps = *opts.max_sweeps;
        plan.run_template.snapshot_every =
            std::min(plan.run_template.snapshot_every, plan.run_template.max_sweeps);
    }
    if (opts.cluster_epsilon) plan.run_template.cluster_epsilon = *opts.cluster_epsilon;
    if (opts.unbounded) {
        plan.run_bounded = false;
        plan.run_unbounded = true;
    }
    plan.validate();

    const unsigned jobs = opts.jobs ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
    std::cout << "sweep: " << plan.total_runs() << " runs over " << plan.cell_count()
              << " cells, " << jobs << " worker(s)\n";
    const std::vector<PatternCell> cells = execute_plan(plan, jobs);

    const fs::path out(opts.out_dir);
    fs::create_directories(out);

    std::vector<std::string> meta;
    meta.push_back(meta_line("rng_family", kRngFamily));
    meta.push_back(meta_line("base_seed", std::to_string(plan.base_seed)));
    meta.push_back(meta_line("replicates", std::to_string(plan.replicates)));
    meta.push_back(meta_line("n_agents", std::to_string(plan.run_template.params.n_agents)));
    meta.push_back(meta_line("mu", format_double(plan.run_template.params.mu)));
    meta.push_back(meta_line("max_sweeps", std::to_string(plan.run_template.max_sweeps)));
    meta.push_back(meta_line("convergence_eps", format_double(plan.run_template.convergence_eps)));
    meta.push_back(
        meta_line("convergence_window", std::to_string(plan.run_template.convergence_window)));
    meta.push_back(meta_line("cluster_epsilon", format_double(plan.run_template.cluster_epsilon)));
    meta.push_back(meta_line("major_share_threshold",
                             format_double(plan.run_template.major_share_threshold)));
    meta.push_back(meta_line("single_moderate_max", format_double(plan.classifier.single_moderate_max)));
    meta.push_back(meta_line("moderate_margin", format_double(plan.classifier.moderate_margin)));
    meta.push_back(meta_line("scale", opts.scale));
    for (const std::string& m : plan_meta) meta.push_back(m);

    write_cells(cells, out / "cells.csv", meta);
    write_replicates(cells, out / "replicates.csv", meta);

    static constexpr MapQuantity quantities[] = {
        MapQuantity::mean_avg_abs_main, MapQuantity::mean_avg_abs_secondary,
        MapQuantity::majority_pattern_main, MapQuantity::majority_pattern_secondary,
        MapQuantity::n_major_clusters};
    for (const double h : plan.h_values) {
        for (const bool bounded : {true, false}) {
            if (bounded ? !plan.run_bounded : !plan.run_unbounded) continue;
            std::vector<PatternCell> group;
            for (const PatternCell& c : cells)
                if (c.h == h && c.bounded == bounded) group.push_back(c);
            for (const MapQuantity q : quantities) {
                const PhaseMap map = emit_phase_map(group, q);
                const std::string stem = std::string("map_") + map_quantity_name(q) + "_h" +
                                         format_double(h) + (bounded ? "_bounded" : "_unbounded");
                write_phase_map_long(map, out / (stem + "_long.csv"), meta);
                write_phase_map_matrix(map, out / (stem + "_matrix.csv"), meta);
            }
        }
    }

    std::vector<std::string> failures;
    for (const PatternCell& c : cells)
        if (c.failed)
            failures.push_back("cell u_m=" + format_double(c.u_m) + " u_s=" + format_double(c.u_s) +
                               " h=" + format_double(c.h) +
                               (c.bounded ? " bounded: " : " unbounded: ") + c.error);
    std::cout << "outputs in " << out.string() << '\n';
    if (!failures.empty()) {
        std::cerr << "normsim: " << failures.size() << " cell(s) failed:\n";
        for (const std::string& f : failures) std::cerr << "  " << f << '\n';
        return 1;
    }
    return 0;
}

struct ClassifyOpts {
    std::string snapshots;
    double cluster_epsilon = 0.02;
    double major_share = 0.02;
    ClassifierThresholds classifier;
    std::string out = "-";
};

int cmd_classify(const ClassifyOpts& opts) {
    std::vector<fs::path> files;
    const fs::path root(opts.snapshots);
    if (fs::is_directory(root)) {
        for (const auto& entry : fs::directory_iterator(root)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("snapshot_", 0) == 0 && name.size() > 4 &&
                name.substr(name.size() - 4) == ".csv")
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw std::runtime_error("no snapshot_*.csv files under '" + root.string() + "'");
    } else {
        files.push_back(root);
    }

    std::vector<ClassificationRow> rows;
    for (const fs::path& f : files) {
        const SnapshotFile snap = read_snapshot(f);
        const IndicatorReport report =
            make_report(snap.agents, opts.cluster_epsilon, opts.major_share);
        ClassificationRow row;
        row.source = f.filename().string();
        row.sweep = snap.sweep;
        row.n_clusters = report.clusters.size();
        row.n_major_clusters = report.n_major_clusters;
        row.avg_abs_main = report.avg_abs_main;
        row.avg_abs_secondary = report.avg_abs_secondary;
        row.pattern_main = classify_pattern(report, Dimension::main, opts.classifier);
        row.pattern_secondary = classify_pattern(report, Dimension::secondary, opts.classifier);
        rows.push_back(row);
    }

    std::vector<std::string> meta;
    meta.push_back(meta_line("cluster_epsilon", format_double(opts.cluster_epsilon)));
    meta.push_back(meta_line("major_share_threshold", format_double(opts.major_share)));
    meta.push_back(meta_line("single_moderate_max", format_double(opts.classifier.single_moderate_max)));
    meta.push_back(meta_line("moderate_margin", format_double(opts.classifier.moderate_margin)));
    const std::string csv = classification_csv(rows, meta);
    if (opts.out == "-") {
        std::cout << csv;
    } else {
        detail::write_text_file(opts.out, csv);
        std::cout << "wrote " << opts.out << '\n';
    }
    return 0;
}

struct DensityOpts {
    std::string snapshot;
    std::string out_dir;
    std::uint64_t bins = 40;
    double main_lo = -1.0, main_hi = 1.0;
    double secondary_lo = -1.0, secondary_hi = 1.0;
};

int cmd_export_density(const DensityOpts& opts) {
    const SnapshotFile snap = read_snapshot(opts.snapshot);
    const DensityHistogram hist =
        density_histogram(snap.agents, opts.bins, opts.main_lo, opts.main_hi, opts.secondary_lo,
                          opts.secondary_hi);
    const fs::path out(opts.out_dir);
    fs::create_directories(out);
    std::vector<std::string> meta;
    meta.push_back(meta_line("source", fs::path(opts.snapshot).filename().string()));
    meta.push_back(meta_line("sweep", std::to_string(snap.sweep)));
    meta.push_back(meta_line("n_agents", std::to_string(snap.params.n_agents)));
    write_density(hist, out / "histogram.csv", out / "grid.csv", meta);
    std::cout << "wrote " << (out / "histogram.csv").string() << " and "
              << (out / "grid.csv").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"normsim: mixed-population attraction/rejection opinion dynamics"};
    app.require_subcommand(1);

    RunOpts run_opts;
    CLI::App* run_cmd = app.add_subcommand("run", "single simulation from a config file");
    run_cmd->add_option("--config", run_opts.config_path, "key=value config file")->required();
    run_cmd->add_option("--out", run_opts.out_dir, "output directory")->required();
    run_cmd->add_option("--seed", run_opts.seed, "override the RNG seed");
    run_cmd->add_option("--max-sweeps", run_opts.max_sweeps, "override max_sweeps");
    run_cmd->add_option("--snapshot-every", run_opts.snapshot_every, "override snapshot cadence");
    run_cmd->add_option("--cluster-epsilon", run_opts.cluster_epsilon, "override linkage radius");
    run_cmd->add_flag("--unbounded", run_opts.unbounded, "disable attitude confinement");

    SweepOpts sweep_opts;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "execute a (u_m, u_s, h) grid of runs");
    sweep_cmd->add_option("--plan", sweep_opts.plan, "'default' or a config file")
        ->default_val("default");
    sweep_cmd->add_option("--scale", sweep_opts.scale, "paper | desk")->default_val("paper");
    sweep_cmd->add_option("--out", sweep_opts.out_dir, "output directory")->required();
    sweep_cmd->add_option("--jobs", sweep_opts.jobs, "worker threads (default: all cores)");
    sweep_cmd->add_option("--seed", sweep_opts.seed, "override the base seed");
    sweep_cmd->add_option("--max-sweeps", sweep_opts.max_sweeps, "override max_sweeps");
    sweep_cmd->add_option("--cluster-epsilon", sweep_opts.cluster_epsilon,
                          "override linkage radius");
    sweep_cmd->add_flag("--unbounded", sweep_opts.unbounded, "run only the unbounded case");

    ClassifyOpts classify_opts;
    CLI::App* classify_cmd =
        app.add_subcommand("classify", "recompute indicators and patterns from stored snapshots");
    classify_cmd->add_option("--snapshots", classify_opts.snapshots, "snapshot file or directory")
        ->required();
    classify_cmd->add_option("--cluster-epsilon", classify_opts.cluster_epsilon, "linkage radius")
        ->default_val(0.02);
    classify_cmd->add_option("--major-share", classify_opts.major_share, "major-cluster cutoff")
        ->default_val(0.02);
    classify_cmd
        ->add_option("--single-moderate-max", classify_opts.classifier.single_moderate_max,
                     "code 0 vs 1 split")
        ->default_val(0.15);
    classify_cmd
        ->add_option("--moderate-margin", classify_opts.classifier.moderate_margin,
                     "slack above the moderate baseline")
        ->default_val(0.10);
    classify_cmd->add_option("--out", classify_opts.out, "output file, or - for stdout")
        ->default_val("-");

    DensityOpts density_opts;
    CLI::App* density_cmd =
        app.add_subcommand("export-density", "histograms and 2D grid from one snapshot");
    density_cmd->add_option("--snapshot", density_opts.snapshot, "snapshot file")->required();
    density_cmd->add_option("--out", density_opts.out_dir, "output directory")->required();
    density_cmd->add_option("--bins", density_opts.bins, "bins per dimension")->default_val(40);
    density_cmd->add_option("--main-lo", density_opts.main_lo, "main lower bound")->default_val(-1.0);
    density_cmd->add_option("--main-hi", density_opts.main_hi, "main upper bound")->default_val(1.0);
    density_cmd->add_option("--secondary-lo", density_opts.secondary_lo, "secondary lower bound")
        ->default_val(-1.0);
    density_cmd->add_option("--secondary-hi", density_opts.secondary_hi, "secondary upper bound")
        ->default_val(1.0);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(run_opts);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts);
        if (classify_cmd->parsed()) return cmd_classify(classify_opts);
        if (density_cmd->parsed()) return cmd_export_density(density_opts);
    } catch (const std::exception& e) {
        std::cerr << "normsim: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
