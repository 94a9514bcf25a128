#pragma once

#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "normsim/engine.hpp"
#include "normsim/experiment.hpp"
#include "normsim/indicators.hpp"
#include "normsim/model.hpp"
#include "normsim/rng.hpp"

namespace normsim {

inline constexpr int kFormatVersion = 1;

// Shortest decimal string that parses back to exactly the same double, so
// every file round-trips losslessly and stays diffable.
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string meta_line(std::string_view key, std::string_view value) {
    std::string s = "# ";
    s += key;
    s += '=';
    s += value;
    return s;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw std::runtime_error("read failed for '" + path.string() + "'");
    return ss.str();
}

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        lines.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return lines;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            return fields;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

inline double field_double(std::string_view f, const std::filesystem::path& path) {
    const std::string s(f);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw std::runtime_error("'" + path.string() + "': invalid number '" + s + "'");
    return v;
}

inline std::uint64_t field_uint(std::string_view f, const std::filesystem::path& path) {
    const std::string s(f);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size())
        throw std::runtime_error("'" + path.string() + "': invalid integer '" + s + "'");
    return static_cast<std::uint64_t>(v);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Time series
// ---------------------------------------------------------------------------

inline constexpr const char* kTimeseriesHeader =
    "sweep,avg_abs_main,avg_abs_secondary,n_clusters,max_cluster_share";

// One row per record under a column-name header; `meta` lines (each starting
// with '#') are emitted verbatim first. Identical input gives identical bytes.
inline void write_timeseries(std::span<const TrajectoryRecord> records,
                             const std::filesystem::path& path,
                             std::span<const std::string> meta = {}) {
    if (records.empty())
        throw std::invalid_argument("write_timeseries: no records to write to '" +
                                    path.string() + "'");
    std::string out;
    for (const std::string& m : meta) {
        out += m;
        out += '\n';
    }
    out += kTimeseriesHeader;
    out += '\n';
    for (const TrajectoryRecord& r : records) {
        out += std::to_string(r.sweep);
        out += ',';
        out += format_double(r.avg_abs_main);
        out += ',';
        out += format_double(r.avg_abs_secondary);
        out += ',';
        out += std::to_string(r.n_clusters);
        out += ',';
        out += format_double(r.max_cluster_share);
        out += '\n';
    }
    detail::write_text_file(path, out);
}

struct TimeseriesFile {
    std::vector<std::string> meta;  // leading '#' lines, verbatim
    std::vector<TrajectoryRecord> records;
};

inline TimeseriesFile read_timeseries(const std::filesystem::path& path) {
    const auto lines = detail::split_lines(detail::read_text_file(path));
    TimeseriesFile file;
    std::size_t i = 0;
    while (i < lines.size() && !lines[i].empty() && lines[i][0] == '#') file.meta.push_back(lines[i++]);
    if (i >= lines.size() || lines[i] != kTimeseriesHeader)
        throw std::runtime_error("'" + path.string() + "': missing time series column header");
    ++i;
    for (; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = detail::split_fields(lines[i]);
        if (f.size() != 5)
            throw std::runtime_error("'" + path.string() + "': expected 5 columns, got " +
                                     std::to_string(f.size()));
        TrajectoryRecord r;
        r.sweep = detail::field_uint(f[0], path);
        r.avg_abs_main = detail::field_double(f[1], path);
        r.avg_abs_secondary = detail::field_double(f[2], path);
        r.n_clusters = detail::field_uint(f[3], path);
        r.max_cluster_share = detail::field_double(f[4], path);
        file.records.push_back(r);
    }
    return file;
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

inline constexpr const char* kSnapshotHeader = "index,hsi,main,secondary";

// Full per-agent state plus the provenance needed to regenerate it.
struct SnapshotFile {
    int format_version = kFormatVersion;
    std::string rng_family = kRngFamily;
    ModelParams params;
    std::uint64_t sweep = 0;
    std::vector<Agent> agents;
    std::vector<std::string> extra_meta;  // additional '#' lines, preserved verbatim
};

inline void write_snapshot(const SnapshotFile& snap, const std::filesystem::path& path) {
    std::string out;
    out += "# normsim snapshot v" + std::to_string(snap.format_version) + '\n';
    out += meta_line("rng_family", snap.rng_family) + '\n';
    out += meta_line("n_agents", std::to_string(snap.params.n_agents)) + '\n';
    out += meta_line("h", format_double(snap.params.h)) + '\n';
    out += meta_line("u_m", format_double(snap.params.u_m)) + '\n';
    out += meta_line("u_s", format_double(snap.params.u_s)) + '\n';
    out += meta_line("mu", format_double(snap.params.mu)) + '\n';
    out += meta_line("bounded", snap.params.bounded ? "true" : "false") + '\n';
    out += meta_line("seed", std::to_string(snap.params.seed)) + '\n';
    out += meta_line("sweep", std::to_string(snap.sweep)) + '\n';
    for (const std::string& m : snap.extra_meta) {
        out += m;
        out += '\n';
    }
    out += kSnapshotHeader;
    out += '\n';
    for (std::size_t i = 0; i < snap.agents.size(); ++i) {
        const Agent& a = snap.agents[i];
        out += std::to_string(i);
        out += ',';
        out += a.involvement == Involvement::hsi ? '1' : '0';
        out += ',';
        out += format_double(a.attitude.main);
        out += ',';
        out += format_double(a.attitude.secondary);
        out += '\n';
    }
    detail::write_text_file(path, out);
}

inline SnapshotFile read_snapshot(const std::filesystem::path& path) {
    const auto lines = detail::split_lines(detail::read_text_file(path));
    SnapshotFile snap;
    snap.rng_family.clear();
    std::size_t i = 0;
    bool version_seen = false;
    for (; i < lines.size() && !lines[i].empty() && lines[i][0] == '#'; ++i) {
        const std::string& line = lines[i];
        if (line.rfind("# normsim snapshot v", 0) == 0) {
            snap.format_version = static_cast<int>(
                detail::field_uint(std::string_view(line).substr(20), path));
            version_seen = true;
            continue;
        }
        const auto eq = line.find('=');
        const std::string key = eq == std::string::npos ? "" : line.substr(2, eq - 2);
        const std::string value = eq == std::string::npos ? "" : line.substr(eq + 1);
        if (key == "rng_family") snap.rng_family = value;
        else if (key == "n_agents") snap.params.n_agents = detail::field_uint(value, path);
        else if (key == "h") snap.params.h = detail::field_double(value, path);
        else if (key == "u_m") snap.params.u_m = detail::field_double(value, path);
        else if (key == "u_s") snap.params.u_s = detail::field_double(value, path);
        else if (key == "mu") snap.params.mu = detail::field_double(value, path);
        else if (key == "bounded") snap.params.bounded = (value == "true" || value == "1");
        else if (key == "seed") snap.params.seed = detail::field_uint(value, path);
        else if (key == "sweep") snap.sweep = detail::field_uint(value, path);
        else snap.extra_meta.push_back(line);
    }
    if (!version_seen)
        throw std::runtime_error("'" + path.string() + "': not a snapshot file (no format line)");
    if (i >= lines.size() || lines[i] != kSnapshotHeader)
        throw std::runtime_error("'" + path.string() + "': missing snapshot column header");
    ++i;
    for (; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = detail::split_fields(lines[i]);
        if (f.size() != 4)
            throw std::runtime_error("'" + path.string() + "': expected 4 columns, got " +
                                     std::to_string(f.size()));
        if (detail::field_uint(f[0], path) != snap.agents.size())
            throw std::runtime_error("'" + path.string() + "': agent indices out of order");
        Agent a;
        a.involvement = detail::field_uint(f[1], path) != 0 ? Involvement::hsi : Involvement::non_hsi;
        a.attitude.main = detail::field_double(f[2], path);
        a.attitude.secondary = detail::field_double(f[3], path);
        snap.agents.push_back(a);
    }
    if (snap.agents.size() != snap.params.n_agents)
        throw std::runtime_error("'" + path.string() + "': row count " +
                                 std::to_string(snap.agents.size()) + " does not match n_agents " +
                                 std::to_string(snap.params.n_agents));
    return snap;
}

// ---------------------------------------------------------------------------
// Phase maps and cells
// ---------------------------------------------------------------------------

// Long form: one (u_m, u_s, value) row per cell; voided cells carry NA.
inline void write_phase_map_long(const PhaseMap& map, const std::filesystem::path& path,
                                 std::span<const std::string> meta = {}) {
    std::string out;
    out += "# normsim phasemap v" + std::to_string(kFormatVersion) + '\n';
    out += meta_line("quantity", map_quantity_name(map.quantity)) + '\n';
    out += meta_line("h", format_double(map.h)) + '\n';
    out += meta_line("bounded", map.bounded ? "true" : "false") + '\n';
    for (const std::string& m : meta) {
        out += m;
        out += '\n';
    }
    out += "u_m,u_s,value\n";
    const std::size_t nm = map.u_m_values.size();
    for (std::size_t si = 0; si < map.u_s_values.size(); ++si)
        for (std::size_t mi = 0; mi < nm; ++mi) {
            out += format_double(map.u_m_values[mi]);
            out += ',';
            out += format_double(map.u_s_values[si]);
            out += ',';
            const auto& v = map.values[si * nm + mi];
            out += v ? format_double(*v) : "NA";
            out += '\n';
        }
    detail::write_text_file(path, out);
}

// Dense matrix form: rows are u_s ascending, columns u_m ascending.
inline void write_phase_map_matrix(const PhaseMap& map, const std::filesystem::path& path,
                                   std::span<const std::string> meta = {}) {
    std::string out;
    out += "# normsim phasemap-matrix v" + std::to_string(kFormatVersion) + '\n';
    out += meta_line("quantity", map_quantity_name(map.quantity)) + '\n';
    out += meta_line("h", format_double(map.h)) + '\n';
    out += meta_line("bounded", map.bounded ? "true" : "false") + '\n';
    for (const std::string& m : meta) {
        out += m;
        out += '\n';
    }
    out += "u_s";
    for (const double um : map.u_m_values) {
        out += ',';
        out += format_double(um);
    }
    out += '\n';
    const std::size_t nm = map.u_m_values.size();
    for (std::size_t si = 0; si < map.u_s_values.size(); ++si) {
        out += format_double(map.u_s_values[si]);
        for (std::size_t mi = 0; mi < nm; ++mi) {
            out += ',';
            const auto& v = map.values[si * nm + mi];
            out += v ? format_double(*v) : "NA";
        }
        out += '\n';
    }
    detail::write_text_file(path, out);
}

// Aggregated cells, one row per (u_m, u_s, h, boundedness) cell.
inline void write_cells(std::span<const PatternCell> cells, const std::filesystem::path& path,
                        std::span<const std::string> meta = {}) {
    std::string out;
    out += "# normsim cells v" + std::to_string(kFormatVersion) + '\n';
    for (const std::string& m : meta) {
        out += m;
        out += '\n';
    }
    out += "u_m,u_s,h,bounded,replicates,mean_avg_abs_main,mean_avg_abs_secondary,"
           "std_avg_abs_main,std_avg_abs_secondary,mean_n_major,"
           "majority_pattern_main,majority_pattern_secondary,failed,error\n";
    for (const PatternCell& c : cells) {
        std::string error = c.error;
        for (char& ch : error)
            if (ch == ',' || ch == '\n') ch = ';';
        out += format_double(c.u_m); out += ',';
        out += format_double(c.u_s); out += ',';
        out += format_double(c.h); out += ',';
        out += c.bounded ? "true" : "false"; out += ',';
        out += std::to_string(c.per_replicate.size()); out += ',';
        out += format_double(c.mean_avg_abs_main); out += ',';
        out += format_double(c.mean_avg_abs_secondary); out += ',';
        out += format_double(c.std_avg_abs_main); out += ',';
        out += format_double(c.std_avg_abs_secondary); out += ',';
        out += format_double(c.mean_n_major); out += ',';
        out += std::to_string(static_cast<int>(c.majority_main)); out += ',';
        out += std::to_string(static_cast<int>(c.majority_secondary)); out += ',';
        out += c.failed ? "true" : "false"; out += ',';
        out += error;
        out += '\n';
    }
    detail::write_text_file(path, out);
}

// Per-replicate outcomes behind the aggregated cells.
inline void write_replicates(std::span<const PatternCell> cells, const std::filesystem::path& path,
                             std::span<const std::string> meta = {}) {
    std::string out;
    out += "# normsim replicates v" + std::to_string(kFormatVersion) + '\n';
    for (const std::string& m : meta) {
        out += m;
        out += '\n';
    }
    out += "u_m,u_s,h,bounded,replicate,avg_abs_main,avg_abs_secondary,"
           "n_clusters,n_major_clusters,pattern_main,pattern_secondary\n";
    for (const PatternCell& c : cells)
        for (const ReplicateOutcome& r : c.per_replicate) {
            out += format_double(c.u_m); out += ',';
            out += format_double(c.u_s); out += ',';
            out += format_double(c.h); out += ',';
            out += c.bounded ? "true" : "false"; out += ',';
            out += std::to_string(r.replicate); out += ',';
            out += format_double(r.report.avg_abs_main); out += ',';
            out += format_double(r.report.avg_abs_secondary); out += ',';
            out += std::to_string(r.report.clusters.size()); out += ',';
            out += std::to_string(r.report.n_major_clusters); out += ',';
            out += std::to_string(static_cast<int>(r.pattern_main)); out += ',';
            out += std::to_string(static_cast<int>(r.pattern_secondary));
            out += '\n';
        }
    detail::write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Classification and densities
// ---------------------------------------------------------------------------

struct ClassificationRow {
    std::string source;
    std::uint64_t sweep = 0;
    std::uint64_t n_clusters = 0;
    std::uint64_t n_major_clusters = 0;
    double avg_abs_main = 0.0;
    double avg_abs_secondary = 0.0;
    PatternCode pattern_main = PatternCode::unclassified;
    PatternCode pattern_secondary = PatternCode::unclassified;
};

inline std::string classification_csv(std::span<const ClassificationRow> rows,
                                      std::span<const std::string> meta = {}) {
    std::string out;
    out += "# normsim classification v" + std::to_string(kFormatVersion) + '\n';
    for (const std::string& m : meta) {
        out += m;
        out += '\n';
    }
    out += "source,sweep,n_clusters,n_major_clusters,avg_abs_main,avg_abs_secondary,"
           "pattern_main,pattern_secondary\n";
    for (const ClassificationRow& r : rows) {
        out += r.source; out += ',';
        out += std::to_string(r.sweep); out += ',';
        out += std::to_string(r.n_clusters); out += ',';
        out += std::to_string(r.n_major_clusters); out += ',';
        out += format_double(r.avg_abs_main); out += ',';
        out += format_double(r.avg_abs_secondary); out += ',';
        out += std::to_string(static_cast<int>(r.pattern_main)); out += ',';
        out += std::to_string(static_cast<int>(r.pattern_secondary));
        out += '\n';
    }
    return out;
}

inline void write_density(const DensityHistogram& h, const std::filesystem::path& hist_path,
                          const std::filesystem::path& grid_path,
                          std::span<const std::string> meta = {}) {
    std::string out;
    out += "# normsim density v" + std::to_string(kFormatVersion) + '\n';
    out += meta_line("bins", std::to_string(h.bins)) + '\n';
    out += meta_line("main_bounds", format_double(h.main_lo) + ":" + format_double(h.main_hi)) + '\n';
    out += meta_line("secondary_bounds",
                     format_double(h.secondary_lo) + ":" + format_double(h.secondary_hi)) + '\n';
    for (const std::string& m : meta) {
        out += m;
        out += '\n';
    }
    out += "bin,main_lo,main_hi,main_count,secondary_lo,secondary_hi,secondary_count\n";
    const double wm = (h.main_hi - h.main_lo) / static_cast<double>(h.bins);
    const double ws = (h.secondary_hi - h.secondary_lo) / static_cast<double>(h.bins);
    for (std::uint64_t b = 0; b < h.bins; ++b) {
        out += std::to_string(b); out += ',';
        out += format_double(h.main_lo + static_cast<double>(b) * wm); out += ',';
        out += format_double(h.main_lo + static_cast<double>(b + 1) * wm); out += ',';
        out += std::to_string(h.main_counts[b]); out += ',';
        out += format_double(h.secondary_lo + static_cast<double>(b) * ws); out += ',';
        out += format_double(h.secondary_lo + static_cast<double>(b + 1) * ws); out += ',';
        out += std::to_string(h.secondary_counts[b]);
        out += '\n';
    }
    detail::write_text_file(hist_path, out);

    std::string grid;
    grid += "# normsim density-grid v" + std::to_string(kFormatVersion) + '\n';
    grid += "# rows: secondary bins ascending; columns: main bins ascending\n";
    for (const std::string& m : meta) {
        grid += m;
        grid += '\n';
    }
    for (std::uint64_t s = 0; s < h.bins; ++s) {
        for (std::uint64_t m = 0; m < h.bins; ++m) {
            if (m) grid += ',';
            grid += std::to_string(h.grid[s * h.bins + m]);
        }
        grid += '\n';
    }
    detail::write_text_file(grid_path, grid);
}

}  // namespace normsim
