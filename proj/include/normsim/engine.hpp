#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "normsim/indicators.hpp"
#include "normsim/model.hpp"
#include "normsim/rng.hpp"

namespace normsim {

struct PopulationState {
    std::vector<Agent> agents;
    std::uint64_t sweep = 0;       // elapsed sweeps; 1 sweep = N pair draws
    std::uint64_t pair_draws = 0;  // elapsed pair selections
};

struct RunConfig {
    ModelParams params;
    std::uint64_t max_sweeps = 100000;
    std::uint64_t snapshot_every = 1000;  // sweeps between captured records/snapshots
    // Early stop fires when no coordinate moved by more than convergence_eps
    // for convergence_window consecutive sweeps; 0 disables it (required for
    // regimes with perpetual motion).
    double convergence_eps = 0.0;
    std::uint64_t convergence_window = 100;
    double cluster_epsilon = 0.02;        // linkage radius for trajectory cluster counts
    double major_share_threshold = 0.02;  // cluster share above which a cluster is "major"
    bool capture_snapshots = true;        // full per-agent snapshots alongside records

    void validate() const {
        params.validate();
        if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be >= 1");
        if (snapshot_every < 1 || snapshot_every > max_sweeps)
            throw std::invalid_argument("snapshot_every must lie in [1, max_sweeps]");
        if (!(convergence_eps >= 0.0))
            throw std::invalid_argument("convergence_eps must be >= 0");
        if (convergence_window < 1)
            throw std::invalid_argument("convergence_window must be >= 1");
        if (!(cluster_epsilon > 0.0))
            throw std::invalid_argument("cluster_epsilon must be > 0");
        if (!(major_share_threshold >= 0.0 && major_share_threshold < 1.0))
            throw std::invalid_argument("major_share_threshold must lie in [0, 1)");
    }
};

// One row of the recorded time series. n_clusters counts clusters whose share
// exceeds the major-share cutoff.
struct TrajectoryRecord {
    std::uint64_t sweep = 0;
    double avg_abs_main = 0.0;
    double avg_abs_secondary = 0.0;
    std::uint64_t n_clusters = 0;
    double max_cluster_share = 0.0;
};

struct Snapshot {
    std::uint64_t sweep = 0;
    std::vector<Agent> agents;
};

struct RunResult {
    PopulationState final_state;
    std::vector<TrajectoryRecord> trajectory;
    std::vector<Snapshot> snapshots;
    bool stopped_early = false;
};

// N agents with both coordinates drawn uniformly from [-1, 1); the first
// round(h * N) agents are flagged HSI (attitudes are i.i.d., so the flag
// position carries no bias). Stream order: agent 0 main, agent 0 secondary,
// agent 1 main, ...
template <class Rng>
PopulationState init_population(const ModelParams& p, Rng& rng) {
    p.validate();
    PopulationState state;
    state.agents.resize(p.n_agents);
    const auto n_hsi =
        static_cast<std::uint64_t>(std::llround(p.h * static_cast<double>(p.n_agents)));
    for (std::uint64_t i = 0; i < p.n_agents; ++i) {
        Agent& a = state.agents[i];
        a.attitude.main = rng.next_symmetric();
        a.attitude.secondary = rng.next_symmetric();
        a.involvement = i < n_hsi ? Involvement::hsi : Involvement::non_hsi;
    }
    return state;
}

// Simultaneous symmetric update of one meeting pair: both new attitudes are
// computed from the pre-update pair, then clamped. Swapping the roles of x
// and y (with the tie-break sources swapped accordingly) swaps the outputs.
template <class TieX, class TieY>
std::pair<Attitude, Attitude> step_pair(const Agent& x, const Agent& y, const ModelParams& p,
                                        TieX&& tie_x, TieY&& tie_y) {
    const Attitude nx = x.involvement == Involvement::hsi
                            ? influence_on_hsi(x.attitude, y.attitude, p, tie_x)
                            : influence_on_non_hsi(x.attitude, y.attitude, p);
    const Attitude ny = y.involvement == Involvement::hsi
                            ? influence_on_hsi(y.attitude, x.attitude, p, tie_y)
                            : influence_on_non_hsi(y.attitude, x.attitude, p);
    return {clamp_attitude(nx, p), clamp_attitude(ny, p)};
}

// One pair meeting, consuming the random stream in this exact order:
//   1. index i, uniform over [0, N)
//   2. index j, uniform over [0, N), redrawn until j != i
//   3. agent i's tie-break, if and only if its exact-tie branch fires
//   4. agent j's tie-break, if and only if its exact-tie branch fires
// Returns the largest absolute coordinate change of the step.
template <class Rng>
double interaction_step(PopulationState& state, const ModelParams& p, Rng& rng) {
    const std::uint64_t n = state.agents.size();
    const std::uint64_t i = rng.next_index(n);
    std::uint64_t j = rng.next_index(n);
    while (j == i) j = rng.next_index(n);

    Agent& x = state.agents[i];
    Agent& y = state.agents[j];
    const auto [nx, ny] = step_pair(
        x, y, p, [&rng] { return rng.next_sign(); }, [&rng] { return rng.next_sign(); });
    const double moved = std::max(
        std::max(std::fabs(nx.main - x.attitude.main), std::fabs(nx.secondary - x.attitude.secondary)),
        std::max(std::fabs(ny.main - y.attitude.main), std::fabs(ny.secondary - y.attitude.secondary)));
    x.attitude = nx;
    y.attitude = ny;
    ++state.pair_draws;
    return moved;
}

// Indicator row for the current state.
inline TrajectoryRecord observe(const PopulationState& state, const RunConfig& config) {
    TrajectoryRecord rec;
    rec.sweep = state.sweep;
    std::tie(rec.avg_abs_main, rec.avg_abs_secondary) = avg_abs_opinion(state.agents);
    const auto clusters = detect_clusters(state.agents, config.cluster_epsilon);
    rec.max_cluster_share = clusters.front().share;
    rec.n_clusters = static_cast<std::uint64_t>(
        std::count_if(clusters.begin(), clusters.end(), [&](const Cluster& c) {
            return c.share > config.major_share_threshold;
        }));
    return rec;
}

// One full simulation: init, max_sweeps sweeps of N pair draws each (or fewer
// if the early-stop criterion fires), records and snapshots every
// snapshot_every sweeps plus the final sweep. A fixed (config, seed) pair
// reproduces the result bit for bit.
inline RunResult run(const RunConfig& config) {
    config.validate();
    SplitMix64 rng(config.params.seed);

    RunResult result;
    result.final_state = init_population(config.params, rng);
    PopulationState& state = result.final_state;

    const auto record = [&] {
        result.trajectory.push_back(observe(state, config));
        if (config.capture_snapshots) result.snapshots.push_back({state.sweep, state.agents});
    };
    record();

    const std::uint64_t n = config.params.n_agents;
    std::uint64_t quiet_sweeps = 0;
    for (std::uint64_t sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        double max_moved = 0.0;
        for (std::uint64_t k = 0; k < n; ++k)
            max_moved = std::max(max_moved, interaction_step(state, config.params, rng));
        state.sweep = sweep;

        const bool recorded = sweep % config.snapshot_every == 0;
        if (recorded) record();

        if (config.convergence_eps > 0.0) {
            quiet_sweeps = max_moved <= config.convergence_eps ? quiet_sweeps + 1 : 0;
            if (quiet_sweeps >= config.convergence_window) {
                result.stopped_early = true;
                if (!recorded) record();
                return result;
            }
        }
        if (sweep == config.max_sweeps && !recorded) record();
    }
    return result;
}

}  // namespace normsim
