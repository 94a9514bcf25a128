#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "normsim/model.hpp"

namespace normsim {

enum class Dimension { main, secondary };

inline const char* dimension_name(Dimension d) {
    return d == Dimension::main ? "main" : "secondary";
}

// One single-linkage component of the population.
struct Cluster {
    std::vector<std::uint64_t> members;  // agent indices, ascending
    Attitude centroid;                   // mean attitude of the members (the cluster norm)
    double share = 0.0;                  // members.size() / N
};

namespace detail {

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::uint8_t> rank_;
};

inline std::int64_t cell_coord(double v, double side) {
    // Clamp instead of overflowing for absurd coordinate/epsilon ratios; a
    // clamped cell only causes extra distance checks, never a missed link.
    const double c = std::floor(v / side);
    if (c > 4.0e18) return 4'000'000'000'000'000'000LL;
    if (c < -4.0e18) return -4'000'000'000'000'000'000LL;
    return static_cast<std::int64_t>(c);
}

inline std::uint64_t pack_cell(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(cy));
}

// Single-linkage connected components under Euclidean distance <= epsilon in
// the plane spanned by `xy`. Grid cells have side epsilon/sqrt(2), so agents
// sharing a cell are always linked and linked agents are at most two cells
// apart on each axis.
template <class GetXY>
std::vector<Cluster> single_linkage(std::span<const Agent> agents, double epsilon, GetXY&& xy) {
    if (agents.empty()) throw std::invalid_argument("detect_clusters: empty snapshot");
    if (!(epsilon > 0.0))
        throw std::invalid_argument("detect_clusters: epsilon must be > 0, got " +
                                    std::to_string(epsilon));

    const std::size_t n = agents.size();
    const double side = epsilon / 1.4142135623730951;
    const double eps2 = epsilon * epsilon;

    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
    grid.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x, y] = xy(agents[i]);
        grid[pack_cell(cell_coord(x, side), cell_coord(y, side))].push_back(
            static_cast<std::uint32_t>(i));
    }

    DisjointSet ds(n);
    for (const auto& [key, cell] : grid)
        for (std::size_t t = 1; t < cell.size(); ++t) ds.unite(cell[0], cell[t]);

    const auto dist2 = [&](std::uint32_t a, std::uint32_t b) {
        const auto [ax, ay] = xy(agents[a]);
        const auto [bx, by] = xy(agents[b]);
        const double dx = ax - bx, dy = ay - by;
        return dx * dx + dy * dy;
    };

    // Half neighborhood of Chebyshev radius 2, so each unordered cell pair is
    // visited once. Cells are single-root internally, hence one found link
    // merges both cells completely.
    static constexpr int offsets[12][2] = {{0, 1}, {0, 2}, {1, -2}, {1, -1}, {1, 0}, {1, 1},
                                           {1, 2}, {2, -2}, {2, -1}, {2, 0}, {2, 1}, {2, 2}};
    for (const auto& [key, cell] : grid) {
        const auto [x0, y0] = xy(agents[cell[0]]);
        const std::int64_t cx = cell_coord(x0, side);
        const std::int64_t cy = cell_coord(y0, side);
        for (const auto& off : offsets) {
            const auto it = grid.find(pack_cell(cx + off[0], cy + off[1]));
            if (it == grid.end()) continue;
            const auto& other = it->second;
            if (ds.find(cell[0]) == ds.find(other[0])) continue;
            [&] {
                for (const std::uint32_t a : cell)
                    for (const std::uint32_t b : other)
                        if (dist2(a, b) <= eps2) {
                            ds.unite(a, b);
                            return;
                        }
            }();
        }
    }

    std::unordered_map<std::size_t, std::size_t> root_to_cluster;
    std::vector<Cluster> clusters;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = ds.find(i);
        auto [it, inserted] = root_to_cluster.try_emplace(root, clusters.size());
        if (inserted) clusters.emplace_back();
        clusters[it->second].members.push_back(i);
    }
    for (Cluster& c : clusters) {
        double sm = 0.0, ss = 0.0;
        for (const std::uint64_t i : c.members) {
            sm += agents[i].attitude.main;
            ss += agents[i].attitude.secondary;
        }
        const double k = static_cast<double>(c.members.size());
        c.centroid = {sm / k, ss / k};
        c.share = k / static_cast<double>(n);
    }
    std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
        if (a.share != b.share) return a.share > b.share;
        return a.members.front() < b.members.front();
    });
    return clusters;
}

}  // namespace detail

// Single-linkage clusters in the 2D attitude plane: an agent belongs to a
// cluster when it is within Euclidean distance epsilon of at least one other
// member. Output is ordered by descending share, ties by smallest member
// index, and is invariant under agent reordering.
inline std::vector<Cluster> detect_clusters(std::span<const Agent> agents, double epsilon) {
    return detail::single_linkage(agents, epsilon, [](const Agent& a) {
        return std::pair{a.attitude.main, a.attitude.secondary};
    });
}

// Same linkage rule applied to a single coordinate.
inline std::vector<Cluster> detect_clusters_1d(std::span<const Agent> agents, Dimension dim,
                                               double epsilon) {
    if (dim == Dimension::main)
        return detail::single_linkage(
            agents, epsilon, [](const Agent& a) { return std::pair{a.attitude.main, 0.0}; });
    return detail::single_linkage(
        agents, epsilon, [](const Agent& a) { return std::pair{a.attitude.secondary, 0.0}; });
}

// Mean of |coordinate| per dimension; the polarization indicator.
inline std::pair<double, double> avg_abs_opinion(std::span<const Agent> agents) {
    if (agents.empty()) throw std::invalid_argument("avg_abs_opinion: empty snapshot");
    double sm = 0.0, ss = 0.0;
    for (const Agent& a : agents) {
        sm += std::fabs(a.attitude.main);
        ss += std::fabs(a.attitude.secondary);
    }
    const double n = static_cast<double>(agents.size());
    return {sm / n, ss / n};
}

// Binned densities for one population state. Out-of-range values (possible in
// unbounded runs) accumulate in the nearest edge bin, so counts always sum to
// the population size.
struct DensityHistogram {
    std::uint64_t bins = 0;
    double main_lo = -1.0, main_hi = 1.0;
    double secondary_lo = -1.0, secondary_hi = 1.0;
    std::vector<std::uint64_t> main_counts;       // size bins
    std::vector<std::uint64_t> secondary_counts;  // size bins
    std::vector<std::uint64_t> grid;              // bins x bins, row-major: [sec_bin * bins + main_bin]
};

inline DensityHistogram density_histogram(std::span<const Agent> agents, std::uint64_t bins,
                                          double main_lo = -1.0, double main_hi = 1.0,
                                          double secondary_lo = -1.0, double secondary_hi = 1.0) {
    if (agents.empty()) throw std::invalid_argument("density_histogram: empty snapshot");
    if (bins < 2)
        throw std::invalid_argument("density_histogram: bins must be >= 2, got " +
                                    std::to_string(bins));
    if (!(main_lo < main_hi) || !(secondary_lo < secondary_hi))
        throw std::invalid_argument("density_histogram: empty bounds interval");

    DensityHistogram h;
    h.bins = bins;
    h.main_lo = main_lo;
    h.main_hi = main_hi;
    h.secondary_lo = secondary_lo;
    h.secondary_hi = secondary_hi;
    h.main_counts.assign(bins, 0);
    h.secondary_counts.assign(bins, 0);
    h.grid.assign(bins * bins, 0);

    const auto bin_of = [bins](double v, double lo, double hi) {
        const double t = (v - lo) / (hi - lo) * static_cast<double>(bins);
        if (t < 0.0) return std::uint64_t{0};
        const auto b = static_cast<std::uint64_t>(t);
        return b >= bins ? bins - 1 : b;
    };
    for (const Agent& a : agents) {
        const std::uint64_t bm = bin_of(a.attitude.main, main_lo, main_hi);
        const std::uint64_t bs = bin_of(a.attitude.secondary, secondary_lo, secondary_hi);
        ++h.main_counts[bm];
        ++h.secondary_counts[bs];
        ++h.grid[bs * bins + bm];
    }
    return h;
}

// The two measured indicators for one population state.
struct IndicatorReport {
    std::vector<Cluster> clusters;        // all clusters, ordered as detect_clusters
    std::uint64_t n_major_clusters = 0;   // clusters with share > major_share_threshold
    double major_share_threshold = 0.02;
    double avg_abs_main = 0.0;
    double avg_abs_secondary = 0.0;
};

inline IndicatorReport make_report(std::span<const Agent> agents, double cluster_epsilon,
                                   double major_share_threshold = 0.02) {
    IndicatorReport r;
    r.clusters = detect_clusters(agents, cluster_epsilon);
    r.major_share_threshold = major_share_threshold;
    r.n_major_clusters = static_cast<std::uint64_t>(
        std::count_if(r.clusters.begin(), r.clusters.end(),
                      [&](const Cluster& c) { return c.share > major_share_threshold; }));
    std::tie(r.avg_abs_main, r.avg_abs_secondary) = avg_abs_opinion(agents);
    return r;
}

// Final-state taxonomy per dimension. Code 5 covers states without any major
// cluster, where cluster counting is not meaningful (perpetually fluctuating
// populations, or no-majority grid cells).
enum class PatternCode : int {
    single_moderate = 0,
    single_extreme = 1,
    bipolarization = 2,
    several_polarized = 3,
    several_moderate = 4,
    unclassified = 5,
};

// Calibration constants; not model parameters. Reported in output metadata.
struct ClassifierThresholds {
    double single_moderate_max = 0.15;  // code 0 vs 1 split for a single major cluster
    double moderate_margin = 0.10;      // slack above the multi-cluster moderate baseline
    double dip_threshold = 0.20;        // "went moderate" level for trajectories
    double rise_threshold = 0.50;       // "ended polarized" level for trajectories

    void validate() const {
        if (!(single_moderate_max >= 0.0))
            throw std::invalid_argument("single_moderate_max must be >= 0");
        if (!(moderate_margin >= 0.0))
            throw std::invalid_argument("moderate_margin must be >= 0");
        if (!(dip_threshold >= 0.0))
            throw std::invalid_argument("dip_threshold must be >= 0");
        if (!(rise_threshold >= 0.0))
            throw std::invalid_argument("rise_threshold must be >= 0");
    }
};

// Expected moderate average absolute opinion when the population settles into
// n equally spaced clusters: 0.4 for odd n, 0.5 for even n.
inline double moderate_baseline(std::uint64_t n_major) {
    return (n_major % 2 == 1) ? 0.4 : 0.5;
}

inline PatternCode classify_pattern(const IndicatorReport& report, Dimension dim,
                                    const ClassifierThresholds& th = {}) {
    const double avg = dim == Dimension::main ? report.avg_abs_main : report.avg_abs_secondary;
    const std::uint64_t n = report.n_major_clusters;
    if (n == 0) return PatternCode::unclassified;
    if (n == 1)
        return avg <= th.single_moderate_max ? PatternCode::single_moderate
                                             : PatternCode::single_extreme;
    if (avg <= moderate_baseline(n) + th.moderate_margin) return PatternCode::several_moderate;
    return n == 2 ? PatternCode::bipolarization : PatternCode::several_polarized;
}

enum class NormChange { no_change, moderated, polarized_after_moderation, polarized_directly };

inline const char* norm_change_name(NormChange c) {
    switch (c) {
        case NormChange::no_change: return "no_change";
        case NormChange::moderated: return "moderated";
        case NormChange::polarized_after_moderation: return "polarized_after_moderation";
        case NormChange::polarized_directly: return "polarized_directly";
    }
    return "?";
}

// Phase classification of an average-absolute-opinion time series. `Records`
// is any range whose elements expose avg_abs_main / avg_abs_secondary (the
// engine's trajectory records do).
template <class Records>
NormChange interpret_norm_change(const Records& trajectory, Dimension dim,
                                 const ClassifierThresholds& th = {}) {
    if (std::size(trajectory) < 2)
        throw std::invalid_argument("interpret_norm_change: need at least 2 records");
    bool dipped = false;
    double last = 0.0;
    for (const auto& rec : trajectory) {
        last = dim == Dimension::main ? rec.avg_abs_main : rec.avg_abs_secondary;
        if (last < th.dip_threshold) dipped = true;
    }
    if (last > th.rise_threshold)
        return dipped ? NormChange::polarized_after_moderation : NormChange::polarized_directly;
    if (last < th.dip_threshold) return NormChange::moderated;
    return NormChange::no_change;
}

}  // namespace normsim
