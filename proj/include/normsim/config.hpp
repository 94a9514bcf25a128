#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "normsim/engine.hpp"
#include "normsim/experiment.hpp"
#include "normsim/indicators.hpp"
#include "normsim/model.hpp"

namespace normsim {

// A validated flat key=value configuration. Every key has a documented
// default except u_m and u_s; keys left to their defaults are listed in
// defaulted_keys so output metadata can echo them.
struct ConfigDocument {
    ModelParams params;
    std::uint64_t max_sweeps = 100000;
    std::uint64_t snapshot_every = 1000;
    double convergence_eps = 0.0;
    std::uint64_t convergence_window = 100;
    double cluster_epsilon = 0.02;
    double major_share_threshold = 0.02;
    ClassifierThresholds classifier;
    std::uint64_t replicates = 10;
    std::uint64_t base_seed = 1;
    std::vector<double> u_m_grid;  // defaults to 0.05..1.00 step 0.05
    std::vector<double> u_s_grid;
    std::vector<double> h_grid;    // defaults to {0.1}
    bool run_bounded = true;
    bool run_unbounded = true;
    std::vector<std::string> defaulted_keys;

    RunConfig to_run_config() const {
        RunConfig rc;
        rc.params = params;
        rc.max_sweeps = max_sweeps;
        rc.snapshot_every = snapshot_every;
        rc.convergence_eps = convergence_eps;
        rc.convergence_window = convergence_window;
        rc.cluster_epsilon = cluster_epsilon;
        rc.major_share_threshold = major_share_threshold;
        return rc;
    }

    ExperimentPlan to_plan() const {
        ExperimentPlan plan;
        plan.u_m_values = u_m_grid;
        plan.u_s_values = u_s_grid;
        plan.h_values = h_grid;
        plan.replicates = replicates;
        plan.base_seed = base_seed;
        plan.run_template = to_run_config();
        plan.run_template.capture_snapshots = false;
        plan.run_bounded = run_bounded;
        plan.run_unbounded = run_unbounded;
        plan.classifier = classifier;
        return plan;
    }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_real(const std::string& key, std::string_view value) {
    const std::string v(value);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE || !std::isfinite(x))
        config_error("invalid number for key '" + key + "': '" + v + "'");
    return x;
}

inline std::uint64_t parse_uint(const std::string& key, std::string_view value) {
    const std::string v(value);
    if (v.empty() || v[0] == '-') config_error("invalid non-negative integer for key '" + key + "': '" + v + "'");
    char* end = nullptr;
    errno = 0;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size() || errno == ERANGE)
        config_error("invalid non-negative integer for key '" + key + "': '" + v + "'");
    return static_cast<std::uint64_t>(x);
}

inline bool parse_bool(const std::string& key, std::string_view value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    config_error("invalid boolean for key '" + key + "' (use true/false/1/0), got '" +
                 std::string(value) + "'");
}

// Grid values: either a lo:hi:step range (inclusive, snapped to 12 decimal
// digits) or a space-separated list of reals.
inline std::vector<double> parse_grid(const std::string& key, std::string_view value) {
    std::vector<double> out;
    const std::string v(value);
    if (v.find(':') != std::string::npos) {
        const auto c1 = v.find(':');
        const auto c2 = v.find(':', c1 + 1);
        if (c2 == std::string::npos || v.find(':', c2 + 1) != std::string::npos)
            config_error("grid range for key '" + key + "' must be lo:hi:step, got '" + v + "'");
        const double lo = parse_real(key, trim(std::string_view(v).substr(0, c1)));
        const double hi = parse_real(key, trim(std::string_view(v).substr(c1 + 1, c2 - c1 - 1)));
        const double step = parse_real(key, trim(std::string_view(v).substr(c2 + 1)));
        if (!(step > 0.0) || hi < lo)
            config_error("grid range for key '" + key + "' must satisfy lo <= hi, step > 0");
        for (int i = 0;; ++i) {
            const double raw = lo + static_cast<double>(i) * step;
            if (raw > hi + step * 1e-9) break;
            out.push_back(std::round(raw * 1e12) / 1e12);
            if (i > 1000000) config_error("grid range for key '" + key + "' has too many points");
        }
    } else {
        std::size_t pos = 0;
        while (pos < v.size()) {
            while (pos < v.size() && (v[pos] == ' ' || v[pos] == '\t')) ++pos;
            if (pos >= v.size()) break;
            std::size_t end = pos;
            while (end < v.size() && v[end] != ' ' && v[end] != '\t') ++end;
            out.push_back(parse_real(key, std::string_view(v).substr(pos, end - pos)));
            pos = end;
        }
    }
    if (out.empty()) config_error("grid for key '" + key + "' is empty");
    return out;
}

}  // namespace detail

// Parses flat key=value text: one pair per line, '#' starts a comment, commas
// may separate several pairs on one line. Unknown and duplicate keys are
// errors; u_m and u_s are required, everything else falls back to documented
// defaults.
inline ConfigDocument parse_config(const std::string& text) {
    using detail::config_error;

    static const std::vector<std::string> known_keys = {
        "n_agents", "h", "u_m", "u_s", "mu", "bounded", "seed",
        "max_sweeps", "snapshot_every", "convergence_eps", "convergence_window",
        "cluster_epsilon", "major_share_threshold",
        "single_moderate_max", "moderate_margin", "dip_threshold", "rise_threshold",
        "replicates", "base_seed", "u_m_grid", "u_s_grid", "h_grid", "boundedness"};

    std::map<std::string, std::string> pairs;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::string line = text.substr(line_start, line_end - line_start);
        line_start = line_end + 1;

        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::size_t frag_start = 0;
        while (frag_start <= line.size()) {
            std::size_t frag_end = line.find(',', frag_start);
            if (frag_end == std::string::npos) frag_end = line.size();
            const std::string_view frag =
                detail::trim(std::string_view(line).substr(frag_start, frag_end - frag_start));
            frag_start = frag_end + 1;
            if (frag.empty()) continue;

            const auto eq = frag.find('=');
            if (eq == std::string_view::npos)
                config_error("expected key=value, got '" + std::string(frag) + "'");
            const std::string key(detail::trim(frag.substr(0, eq)));
            const std::string value(detail::trim(frag.substr(eq + 1)));
            if (std::find(known_keys.begin(), known_keys.end(), key) == known_keys.end())
                config_error("unknown key '" + key + "'");
            if (!pairs.emplace(key, value).second) config_error("duplicate key '" + key + "'");
        }
    }

    if (!pairs.count("u_m")) config_error("missing required key 'u_m'");
    if (!pairs.count("u_s")) config_error("missing required key 'u_s'");

    ConfigDocument doc;
    // Spec'd defaults for the grids; scalars carry theirs as member initializers.
    for (int i = 1; i <= 20; ++i) doc.u_m_grid.push_back(static_cast<double>(i) / 20.0);
    doc.u_s_grid = doc.u_m_grid;
    doc.h_grid = {0.1};

    const auto take = [&](const char* key) -> const std::string* {
        const auto it = pairs.find(key);
        if (it == pairs.end()) {
            doc.defaulted_keys.emplace_back(key);
            return nullptr;
        }
        return &it->second;
    };

    if (const auto* v = take("n_agents")) doc.params.n_agents = detail::parse_uint("n_agents", *v);
    if (const auto* v = take("h")) doc.params.h = detail::parse_real("h", *v);
    if (const auto* v = take("u_m")) doc.params.u_m = detail::parse_real("u_m", *v);
    if (const auto* v = take("u_s")) doc.params.u_s = detail::parse_real("u_s", *v);
    if (const auto* v = take("mu")) doc.params.mu = detail::parse_real("mu", *v);
    if (const auto* v = take("bounded")) doc.params.bounded = detail::parse_bool("bounded", *v);
    if (const auto* v = take("seed")) doc.params.seed = detail::parse_uint("seed", *v);
    if (const auto* v = take("max_sweeps")) doc.max_sweeps = detail::parse_uint("max_sweeps", *v);
    if (const auto* v = take("snapshot_every"))
        doc.snapshot_every = detail::parse_uint("snapshot_every", *v);
    if (const auto* v = take("convergence_eps"))
        doc.convergence_eps = detail::parse_real("convergence_eps", *v);
    if (const auto* v = take("convergence_window"))
        doc.convergence_window = detail::parse_uint("convergence_window", *v);
    if (const auto* v = take("cluster_epsilon"))
        doc.cluster_epsilon = detail::parse_real("cluster_epsilon", *v);
    if (const auto* v = take("major_share_threshold"))
        doc.major_share_threshold = detail::parse_real("major_share_threshold", *v);
    if (const auto* v = take("single_moderate_max"))
        doc.classifier.single_moderate_max = detail::parse_real("single_moderate_max", *v);
    if (const auto* v = take("moderate_margin"))
        doc.classifier.moderate_margin = detail::parse_real("moderate_margin", *v);
    if (const auto* v = take("dip_threshold"))
        doc.classifier.dip_threshold = detail::parse_real("dip_threshold", *v);
    if (const auto* v = take("rise_threshold"))
        doc.classifier.rise_threshold = detail::parse_real("rise_threshold", *v);
    if (const auto* v = take("replicates")) doc.replicates = detail::parse_uint("replicates", *v);
    if (const auto* v = take("base_seed")) doc.base_seed = detail::parse_uint("base_seed", *v);
    if (const auto* v = take("u_m_grid")) doc.u_m_grid = detail::parse_grid("u_m_grid", *v);
    if (const auto* v = take("u_s_grid")) doc.u_s_grid = detail::parse_grid("u_s_grid", *v);
    if (const auto* v = take("h_grid")) doc.h_grid = detail::parse_grid("h_grid", *v);
    if (const auto* v = take("boundedness")) {
        if (*v == "both") {
            doc.run_bounded = doc.run_unbounded = true;
        } else if (*v == "bounded") {
            doc.run_bounded = true;
            doc.run_unbounded = false;
        } else if (*v == "unbounded") {
            doc.run_bounded = false;
            doc.run_unbounded = true;
        } else {
            config_error("boundedness must be both, bounded or unbounded, got '" + *v + "'");
        }
    }

    // Range validation, phrased with the legal interval per key.
    try {
        doc.params.validate();
    } catch (const std::invalid_argument& e) {
        config_error(e.what());
    }
    if (doc.max_sweeps < 1) config_error("max_sweeps must be >= 1");
    if (doc.snapshot_every < 1 || doc.snapshot_every > doc.max_sweeps)
        config_error("snapshot_every must lie in [1, max_sweeps]");
    if (!(doc.convergence_eps >= 0.0)) config_error("convergence_eps must be >= 0");
    if (doc.convergence_window < 1) config_error("convergence_window must be >= 1");
    if (!(doc.cluster_epsilon > 0.0)) config_error("cluster_epsilon must be > 0");
    if (!(doc.major_share_threshold >= 0.0 && doc.major_share_threshold < 1.0))
        config_error("major_share_threshold must lie in [0, 1)");
    try {
        doc.classifier.validate();
    } catch (const std::invalid_argument& e) {
        config_error(e.what());
    }
    if (doc.replicates < 1) config_error("replicates must be >= 1");
    for (const double v : doc.u_m_grid)
        if (!(v > 0.0)) config_error("u_m_grid values must be > 0");
    for (const double v : doc.u_s_grid)
        if (!(v > 0.0)) config_error("u_s_grid values must be > 0");
    for (const double v : doc.h_grid)
        if (!(v >= 0.0 && v <= 1.0)) config_error("h_grid values must lie in [0, 1]");
    return doc;
}

}  // namespace normsim
