#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "normsim/engine.hpp"
#include "normsim/indicators.hpp"
#include "normsim/rng.hpp"

namespace normsim {

// The (u_m, u_s, h) grid with replicates and boundedness cases.
struct ExperimentPlan {
    std::vector<double> u_m_values;
    std::vector<double> u_s_values;
    std::vector<double> h_values;
    std::uint64_t replicates = 10;
    std::uint64_t base_seed = 1;
    RunConfig run_template;  // u_m, u_s, h, bounded and seed are overwritten per run
    bool run_bounded = true;
    bool run_unbounded = true;
    ClassifierThresholds classifier;

    void validate() const {
        if (u_m_values.empty() || u_s_values.empty() || h_values.empty())
            throw std::invalid_argument("plan: all grids must be non-empty");
        for (const double v : u_m_values)
            if (!(v > 0.0)) throw std::invalid_argument("plan: u_m values must be > 0");
        for (const double v : u_s_values)
            if (!(v > 0.0)) throw std::invalid_argument("plan: u_s values must be > 0");
        for (const double v : h_values)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("plan: h values must lie in [0, 1]");
        if (replicates < 1) throw std::invalid_argument("plan: replicates must be >= 1");
        if (!run_bounded && !run_unbounded)
            throw std::invalid_argument("plan: at least one boundedness case required");
        classifier.validate();
    }

    std::uint64_t cell_count() const {
        const std::uint64_t cases = (run_bounded ? 1u : 0u) + (run_unbounded ? 1u : 0u);
        return u_m_values.size() * u_s_values.size() * h_values.size() * cases;
    }
    std::uint64_t total_runs() const { return cell_count() * replicates; }
};

// The grid studied in the reference experimental design: u_m and u_s from
// 0.05 to 1.00 in steps of 0.05, h = 0.1, 10 replicates of 10,000 agents,
// mu = 0.5, both boundedness cases.
inline ExperimentPlan build_default_plan() {
    ExperimentPlan plan;
    for (int i = 1; i <= 20; ++i) plan.u_m_values.push_back(static_cast<double>(i) / 20.0);
    plan.u_s_values = plan.u_m_values;
    plan.h_values = {0.1};
    plan.replicates = 10;
    plan.run_template.params.n_agents = 10000;
    plan.run_template.params.mu = 0.5;
    plan.run_template.max_sweeps = 100000;
    plan.run_template.snapshot_every = 1000;
    plan.run_template.capture_snapshots = false;
    return plan;
}

struct ReplicateOutcome {
    std::uint64_t replicate = 0;  // filled in by execute_plan
    IndicatorReport report;
    PatternCode pattern_main = PatternCode::unclassified;
    PatternCode pattern_secondary = PatternCode::unclassified;
};

// Aggregated view of one (u_m, u_s, h, boundedness) grid cell.
struct PatternCell {
    double u_m = 0.0, u_s = 0.0, h = 0.0;
    bool bounded = true;
    std::vector<ReplicateOutcome> per_replicate;
    double mean_avg_abs_main = 0.0, mean_avg_abs_secondary = 0.0;
    double std_avg_abs_main = 0.0, std_avg_abs_secondary = 0.0;
    double mean_n_major = 0.0;
    PatternCode majority_main = PatternCode::unclassified;
    PatternCode majority_secondary = PatternCode::unclassified;
    bool failed = false;
    std::string error;
};

// Majority pattern across replicates: the code reached by at least
// ceil(replicates / 2) of them, otherwise unclassified. An exact two-way tie
// resolves to the smaller code number.
inline PatternCode majority_code(std::span<const PatternCode> codes, std::uint64_t replicates) {
    std::uint64_t counts[6] = {};
    for (const PatternCode c : codes) ++counts[static_cast<int>(c)];
    int best = 0;
    for (int c = 1; c < 6; ++c)
        if (counts[c] > counts[best]) best = c;
    if (2 * counts[best] >= replicates && counts[best] > 0) return static_cast<PatternCode>(best);
    return PatternCode::unclassified;
}

// Per-run seed; field order is (u_m index, u_s index, h index, replicate,
// boundedness), so growing any grid leaves existing runs untouched.
inline std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t um_idx,
                                     std::uint64_t us_idx, std::uint64_t h_idx,
                                     std::uint64_t replicate, bool bounded) {
    return stable_hash(base_seed, um_idx, us_idx, h_idx, replicate,
                       static_cast<std::uint64_t>(bounded ? 1 : 0));
}

// Executes a single configured run and reduces it to its final-state outcome.
using RunFn = std::function<ReplicateOutcome(const RunConfig&)>;

inline RunFn default_run_fn(const ClassifierThresholds& classifier) {
    return [classifier](const RunConfig& rc) {
        const RunResult rr = run(rc);
        ReplicateOutcome out;
        out.report = make_report(rr.final_state.agents, rc.cluster_epsilon,
                                 rc.major_share_threshold);
        out.pattern_main = classify_pattern(out.report, Dimension::main, classifier);
        out.pattern_secondary = classify_pattern(out.report, Dimension::secondary, classifier);
        return out;
    };
}

// Runs every (cell, replicate, boundedness) combination and aggregates into
// PatternCells. Results are a pure function of the plan: parallelism and
// scheduling never change them, because every run owns a derived seed and the
// aggregation consumes completed runs in deterministic cell order. A failing
// replicate voids only its own cell, which is reported as failed rather than
// dropped. `run_fn` exists for tests; leave it empty for the real engine.
inline std::vector<PatternCell> execute_plan(const ExperimentPlan& plan, unsigned parallelism = 1,
                                             RunFn run_fn = {}) {
    plan.validate();
    if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
    if (!run_fn) run_fn = default_run_fn(plan.classifier);

    struct CellCoord {
        std::uint64_t um_idx, us_idx, h_idx;
        bool bounded;
    };
    std::vector<CellCoord> cells;
    cells.reserve(plan.cell_count());
    for (const bool bounded : {true, false}) {
        if (bounded ? !plan.run_bounded : !plan.run_unbounded) continue;
        for (std::uint64_t hi = 0; hi < plan.h_values.size(); ++hi)
            for (std::uint64_t mi = 0; mi < plan.u_m_values.size(); ++mi)
                for (std::uint64_t si = 0; si < plan.u_s_values.size(); ++si)
                    cells.push_back({mi, si, hi, bounded});
    }

    const std::uint64_t reps = plan.replicates;
    const std::size_t n_tasks = cells.size() * reps;
    std::vector<std::optional<ReplicateOutcome>> outcomes(n_tasks);
    std::vector<std::string> errors(n_tasks);

    const auto make_config = [&](std::size_t task) {
        const CellCoord& cc = cells[task / reps];
        const std::uint64_t rep = task % reps;
        RunConfig rc = plan.run_template;
        rc.params.u_m = plan.u_m_values[cc.um_idx];
        rc.params.u_s = plan.u_s_values[cc.us_idx];
        rc.params.h = plan.h_values[cc.h_idx];
        rc.params.bounded = cc.bounded;
        rc.params.seed =
            derive_run_seed(plan.base_seed, cc.um_idx, cc.us_idx, cc.h_idx, rep, cc.bounded);
        rc.capture_snapshots = false;
        return rc;
    };

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= n_tasks) return;
            try {
                outcomes[task] = run_fn(make_config(task));
            } catch (const std::exception& e) {
                errors[task] = e.what();
            } catch (...) {
                errors[task] = "unknown error";
            }
        }
    };
    const unsigned n_threads =
        static_cast<unsigned>(std::min<std::size_t>(parallelism, std::max<std::size_t>(n_tasks, 1)));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::vector<PatternCell> result;
    result.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const CellCoord& cc = cells[c];
        PatternCell cell;
        cell.u_m = plan.u_m_values[cc.um_idx];
        cell.u_s = plan.u_s_values[cc.us_idx];
        cell.h = plan.h_values[cc.h_idx];
        cell.bounded = cc.bounded;

        for (std::uint64_t r = 0; r < reps; ++r) {
            const std::size_t task = c * reps + r;
            if (outcomes[task]) {
                outcomes[task]->replicate = r;
                cell.per_replicate.push_back(std::move(*outcomes[task]));
            } else {
                cell.failed = true;
                if (!cell.error.empty()) cell.error += "; ";
                cell.error += "replicate " + std::to_string(r) + ": " + errors[task];
            }
        }
        if (!cell.failed) {
            double sm = 0.0, ss = 0.0, nm = 0.0;
            std::vector<PatternCode> codes_m, codes_s;
            for (const ReplicateOutcome& o : cell.per_replicate) {
                sm += o.report.avg_abs_main;
                ss += o.report.avg_abs_secondary;
                nm += static_cast<double>(o.report.n_major_clusters);
                codes_m.push_back(o.pattern_main);
                codes_s.push_back(o.pattern_secondary);
            }
            const double k = static_cast<double>(reps);
            cell.mean_avg_abs_main = sm / k;
            cell.mean_avg_abs_secondary = ss / k;
            cell.mean_n_major = nm / k;
            if (reps > 1) {
                double vm = 0.0, vs = 0.0;
                for (const ReplicateOutcome& o : cell.per_replicate) {
                    vm += (o.report.avg_abs_main - cell.mean_avg_abs_main) *
                          (o.report.avg_abs_main - cell.mean_avg_abs_main);
                    vs += (o.report.avg_abs_secondary - cell.mean_avg_abs_secondary) *
                          (o.report.avg_abs_secondary - cell.mean_avg_abs_secondary);
                }
                cell.std_avg_abs_main = std::sqrt(vm / (k - 1.0));
                cell.std_avg_abs_secondary = std::sqrt(vs / (k - 1.0));
            }
            cell.majority_main = majority_code(codes_m, reps);
            cell.majority_secondary = majority_code(codes_s, reps);
        }
        result.push_back(std::move(cell));
    }
    return result;
}

enum class MapQuantity {
    mean_avg_abs_main,
    mean_avg_abs_secondary,
    majority_pattern_main,
    majority_pattern_secondary,
    n_major_clusters,
};

inline const char* map_quantity_name(MapQuantity q) {
    switch (q) {
        case MapQuantity::mean_avg_abs_main: return "mean_avg_abs_main";
        case MapQuantity::mean_avg_abs_secondary: return "mean_avg_abs_secondary";
        case MapQuantity::majority_pattern_main: return "majority_pattern_main";
        case MapQuantity::majority_pattern_secondary: return "majority_pattern_secondary";
        case MapQuantity::n_major_clusters: return "n_major_clusters";
    }
    return "?";
}

// Dense (u_m, u_s) table of one scalar per cell. Cells voided by failed
// replicates carry no value and are flagged in the serialized output.
struct PhaseMap {
    MapQuantity quantity{};
    double h = 0.0;
    bool bounded = true;
    std::vector<double> u_m_values;  // ascending
    std::vector<double> u_s_values;  // ascending
    std::vector<std::optional<double>> values;  // [us_idx * u_m_values.size() + um_idx]
};

// Requires cells covering a full rectangular (u_m, u_s) grid for a single h
// and boundedness case; anything ragged is rejected.
inline PhaseMap emit_phase_map(std::span<const PatternCell> cells, MapQuantity quantity) {
    if (cells.empty()) throw std::invalid_argument("emit_phase_map: no cells");
    PhaseMap map;
    map.quantity = quantity;
    map.h = cells.front().h;
    map.bounded = cells.front().bounded;

    for (const PatternCell& c : cells) {
        if (c.h != map.h || c.bounded != map.bounded)
            throw std::invalid_argument(
                "emit_phase_map: cells must share one h and one boundedness case");
        map.u_m_values.push_back(c.u_m);
        map.u_s_values.push_back(c.u_s);
    }
    const auto uniq = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(map.u_m_values);
    uniq(map.u_s_values);

    const std::size_t nm = map.u_m_values.size(), ns = map.u_s_values.size();
    if (cells.size() != nm * ns)
        throw std::invalid_argument("emit_phase_map: ragged grid (" +
                                    std::to_string(cells.size()) + " cells for a " +
                                    std::to_string(nm) + "x" + std::to_string(ns) + " grid)");
    map.values.assign(nm * ns, std::nullopt);

    std::vector<bool> seen(nm * ns, false);
    for (const PatternCell& c : cells) {
        const auto mi = static_cast<std::size_t>(
            std::lower_bound(map.u_m_values.begin(), map.u_m_values.end(), c.u_m) -
            map.u_m_values.begin());
        const auto si = static_cast<std::size_t>(
            std::lower_bound(map.u_s_values.begin(), map.u_s_values.end(), c.u_s) -
            map.u_s_values.begin());
        const std::size_t slot = si * nm + mi;
        if (seen[slot]) throw std::invalid_argument("emit_phase_map: duplicate cell in grid");
        seen[slot] = true;
        if (c.failed) continue;
        switch (quantity) {
            case MapQuantity::mean_avg_abs_main: map.values[slot] = c.mean_avg_abs_main; break;
            case MapQuantity::mean_avg_abs_secondary:
                map.values[slot] = c.mean_avg_abs_secondary;
                break;
            case MapQuantity::majority_pattern_main:
                map.values[slot] = static_cast<double>(static_cast<int>(c.majority_main));
                break;
            case MapQuantity::majority_pattern_secondary:
                map.values[slot] = static_cast<double>(static_cast<int>(c.majority_secondary));
                break;
            case MapQuantity::n_major_clusters: map.values[slot] = c.mean_n_major; break;
        }
    }
    return map;
}

}  // namespace normsim
