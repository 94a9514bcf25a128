#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace normsim {

// Position of one agent on the two discussion issues. Both coordinates are
// initialized in [-1, +1]; bounded runs keep them there, unbounded runs let
// them leave after initialization. Coordinates are always finite.
struct Attitude {
    double main = 0.0;
    double secondary = 0.0;

    friend bool operator==(const Attitude&, const Attitude&) = default;
};

// Fixed for the lifetime of an agent.
enum class Involvement : std::uint8_t { non_hsi = 0, hsi = 1 };

struct Agent {
    Attitude attitude;
    Involvement involvement = Involvement::non_hsi;

    friend bool operator==(const Agent&, const Agent&) = default;
};

// Full parameter set of a single run.
struct ModelParams {
    std::uint64_t n_agents = 10000;
    double h = 0.1;        // proportion of HSI agents, in [0, 1]
    double u_m = 0.0;      // closeness threshold on the main dimension, > 0
    double u_s = 0.0;      // closeness threshold on the secondary dimension, > 0
    double mu = 0.5;       // influence intensity, in (0, 0.5]
    bool bounded = true;   // clip both coordinates to [-1, +1] after each update
    std::uint64_t seed = 1;

    void validate() const {
        if (n_agents < 2)
            throw std::invalid_argument("n_agents must be >= 2, got " + std::to_string(n_agents));
        if (!(h >= 0.0 && h <= 1.0))
            throw std::invalid_argument("h must lie in [0, 1], got " + std::to_string(h));
        if (!(u_m > 0.0))
            throw std::invalid_argument("u_m must be > 0, got " + std::to_string(u_m));
        if (!(u_s > 0.0))
            throw std::invalid_argument("u_s must be > 0, got " + std::to_string(u_s));
        if (!(mu > 0.0 && mu <= 0.5))
            throw std::invalid_argument("mu must lie in (0, 0.5], got " + std::to_string(mu));
    }
};

// Attraction step shared by both agent kinds: move toward the peer by mu of
// the gap on each dimension.
inline Attitude attract(const Attitude& self, const Attitude& peer, double mu) {
    return {self.main + mu * (peer.main - self.main),
            self.secondary + mu * (peer.secondary - self.secondary)};
}

// Influence of `peer` on a non-HSI `self`: attraction when close on both
// dimensions at once (non-strict thresholds), indifference otherwise.
// Pure; never touches a random stream.
inline Attitude influence_on_non_hsi(const Attitude& self, const Attitude& peer,
                                     const ModelParams& p) {
    if (std::fabs(self.main - peer.main) <= p.u_m &&
        std::fabs(self.secondary - peer.secondary) <= p.u_s) {
        return attract(self, peer, p.mu);
    }
    return self;
}

// Influence of `peer` on an HSI `self`.
//
// Close on main: attraction on both dimensions, whatever the secondary gap.
// Far on main but close on secondary: rejection on the secondary dimension
// only, scaled by the distance left to the rejection threshold. The main
// coordinate never changes on the rejection branches.
//
// `tie_break` must yield +1 or -1 equiprobably; it is invoked exactly once
// when the two secondary coordinates are exactly equal (no epsilon: the
// branch exists for the measure-zero tie) and never otherwise.
template <class TieBreak>
Attitude influence_on_hsi(const Attitude& self, const Attitude& peer,
                          const ModelParams& p, TieBreak&& tie_break) {
    if (std::fabs(self.main - peer.main) <= p.u_m)
        return attract(self, peer, p.mu);
    if (std::fabs(self.secondary - peer.secondary) <= p.u_s) {
        const double gap = peer.secondary - self.secondary;
        Attitude out = self;
        if (self.secondary - peer.secondary < 0.0)
            out.secondary = self.secondary - p.mu * (p.u_s - gap);
        else if (peer.secondary != self.secondary)
            out.secondary = self.secondary + p.mu * (p.u_s + gap);
        else
            out.secondary = self.secondary + tie_break() * p.mu * p.u_s;
        return out;
    }
    return self;
}

// Bounded mode clips both coordinates to [-1, +1]; unbounded mode is the
// identity (neither dimension is confined, matching the two experimental
// cases selected by ModelParams::bounded).
inline Attitude clamp_attitude(const Attitude& a, const ModelParams& p) {
    if (!p.bounded) return a;
    return {std::clamp(a.main, -1.0, 1.0), std::clamp(a.secondary, -1.0, 1.0)};
}

}  // namespace normsim
