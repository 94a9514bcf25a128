#include <catch2/catch.hpp>

#include <chrono>
#include <cmath>

#include "normsim/model.hpp"
#include "normsim/rng.hpp"
#include "reference_model.hpp"

using namespace normsim;

namespace {

ModelParams params(double u_m, double u_s, double mu = 0.5, bool bounded = true) {
    ModelParams p;
    p.n_agents = 2;
    p.u_m = u_m;
    p.u_s = u_s;
    p.mu = mu;
    p.bounded = bounded;
    return p;
}

// Tie-break stub that also counts how often it gets consumed.
struct CountingTie {
    double value = 1.0;
    int* calls = nullptr;
    double operator()() const {
        if (calls) ++*calls;
        return value;
    }
};

}  // namespace

TEST_CASE("non-HSI attraction moves both coordinates toward the peer") {
    const Attitude out = influence_on_non_hsi({0.0, 0.0}, {0.4, 0.2}, params(0.5, 0.3));
    CHECK(out.main == Approx(0.2).margin(1e-12));
    CHECK(out.secondary == Approx(0.1).margin(1e-12));
}

TEST_CASE("non-HSI partial agreement leaves the agent indifferent") {
    const Attitude self{0.0, 0.0};
    CHECK(influence_on_non_hsi(self, {0.6, 0.2}, params(0.5, 0.3)) == self);  // far on main
    CHECK(influence_on_non_hsi(self, {0.2, 0.6}, params(0.5, 0.3)) == self);  // far on secondary
    CHECK(influence_on_non_hsi(self, {0.6, 0.6}, params(0.5, 0.3)) == self);  // far on both
}

TEST_CASE("zero-distance pair is a fixed point for both kinds") {
    SplitMix64 rng(11);
    for (int i = 0; i < 50; ++i) {
        const Attitude a{rng.next_symmetric(), rng.next_symmetric()};
        const auto p = params(rng.next_double() + 0.01, rng.next_double() + 0.01,
                              0.5 * rng.next_double() + 1e-6);
        int tie_calls = 0;
        CHECK(influence_on_non_hsi(a, a, p) == a);
        CHECK(influence_on_hsi(a, a, p, CountingTie{1.0, &tie_calls}) == a);
        CHECK(tie_calls == 0);  // distance 0 on main takes the attraction branch
    }
}

TEST_CASE("HSI rejection, self below peer on secondary") {
    const Attitude out = influence_on_hsi({0.0, 0.1}, {0.8, 0.2}, params(0.5, 0.3), CountingTie{});
    CHECK(out.main == 0.0);
    CHECK(out.secondary == Approx(0.0).margin(1e-12));
}

TEST_CASE("HSI rejection, self above peer on secondary") {
    const Attitude out = influence_on_hsi({0.0, 0.3}, {0.8, 0.2}, params(0.5, 0.3), CountingTie{});
    CHECK(out.main == 0.0);
    CHECK(out.secondary == Approx(0.4).margin(1e-12));
}

TEST_CASE("HSI exact secondary tie consumes the tie-break exactly once") {
    const Attitude self{0.0, 0.2};
    const Attitude peer{0.8, 0.2};
    int calls = 0;
    const Attitude up = influence_on_hsi(self, peer, params(0.5, 0.3), CountingTie{1.0, &calls});
    CHECK(calls == 1);
    CHECK(up.secondary == Approx(0.35).margin(1e-12));
    const Attitude down = influence_on_hsi(self, peer, params(0.5, 0.3), CountingTie{-1.0, &calls});
    CHECK(calls == 2);
    CHECK(down.secondary == Approx(0.05).margin(1e-12));
    CHECK(up.main == 0.0);
    CHECK(down.main == 0.0);
}

TEST_CASE("HSI close on main attracts on both dimensions whatever the secondary gap") {
    int calls = 0;
    const Attitude out =
        influence_on_hsi({0.0, 0.9}, {0.4, -0.9}, params(0.5, 0.3), CountingTie{1.0, &calls});
    CHECK(out.main == Approx(0.2).margin(1e-12));
    CHECK(out.secondary == Approx(0.0).margin(1e-12));
    CHECK(calls == 0);
}

TEST_CASE("HSI far on both dimensions is unchanged") {
    const Attitude self{0.0, 0.0};
    CHECK(influence_on_hsi(self, {0.8, 0.9}, params(0.5, 0.3), CountingTie{}) == self);
}

TEST_CASE("threshold comparisons are non-strict") {
    // Distance exactly u_m / u_s still counts as close.
    const auto p = params(0.5, 0.25);
    CHECK(influence_on_non_hsi({0.0, 0.0}, {0.5, 0.25}, p).main == Approx(0.25).margin(1e-12));
    const Attitude r = influence_on_hsi({0.0, 0.0}, {0.75, 0.25}, p, CountingTie{});
    CHECK(r.secondary == Approx(0.0).margin(1e-12));  // shift magnitude mu*(u_s - |gap|) = 0
}

TEST_CASE("clamp clips only in bounded mode") {
    CHECK(clamp_attitude({0.3, 1.15}, params(1, 1, 0.5, true)) == Attitude{0.3, 1.0});
    CHECK(clamp_attitude({-1.4, 0.2}, params(1, 1, 0.5, true)) == Attitude{-1.0, 0.2});
    CHECK(clamp_attitude({0.3, 1.15}, params(1, 1, 0.5, false)) == Attitude{0.3, 1.15});
}

TEST_CASE("ModelParams validation names the offending field") {
    ModelParams p;
    p.u_m = 0.5;
    p.u_s = 0.5;
    CHECK_NOTHROW(p.validate());

    auto reject = [](ModelParams bad, const char* fragment) {
        CHECK_THROWS_WITH(bad.validate(), Catch::Contains(fragment));
    };
    ModelParams bad = p;
    bad.n_agents = 1;
    reject(bad, "n_agents");
    bad = p;
    bad.mu = 0.7;
    reject(bad, "mu");
    bad = p;
    bad.mu = 0.0;
    reject(bad, "mu");
    bad = p;
    bad.h = 1.1;
    reject(bad, "h");
    bad = p;
    bad.u_m = 0.0;
    reject(bad, "u_m");
    bad = p;
    bad.u_s = -0.1;
    reject(bad, "u_s");
}

TEST_CASE("attraction contracts the distance to the peer by exactly (1 - mu)") {
    SplitMix64 rng(101);
    for (int i = 0; i < 2000; ++i) {
        const Attitude self{1.5 * rng.next_symmetric(), 1.5 * rng.next_symmetric()};
        const Attitude peer{1.5 * rng.next_symmetric(), 1.5 * rng.next_symmetric()};
        const double mu = 0.5 * rng.next_double() + 1e-9;
        const auto p = params(3.1, 3.1, mu, false);  // thresholds wide: attraction always fires
        const Attitude out = influence_on_non_hsi(self, peer, p);
        CHECK(std::fabs(out.main - peer.main) ==
              Approx((1 - mu) * std::fabs(self.main - peer.main)).margin(1e-12));
        CHECK(std::fabs(out.secondary - peer.secondary) ==
              Approx((1 - mu) * std::fabs(self.secondary - peer.secondary)).margin(1e-12));
    }
}

TEST_CASE("rejection shift obeys the magnitude and direction bounds") {
    SplitMix64 rng(202);
    int rejections = 0;
    for (int i = 0; i < 20000; ++i) {
        Attitude self{1.5 * rng.next_symmetric(), 1.5 * rng.next_symmetric()};
        Attitude peer{1.5 * rng.next_symmetric(), 1.5 * rng.next_symmetric()};
        const double mu = 0.5 * rng.next_double() + 1e-9;
        const auto p = params(0.3 * rng.next_double() + 0.01, rng.next_double() + 0.01, mu, false);
        if (std::fabs(self.main - peer.main) <= p.u_m) continue;           // attraction branch
        if (std::fabs(self.secondary - peer.secondary) > p.u_s) continue;  // no-change branch
        ++rejections;
        const Attitude out = influence_on_hsi(self, peer, p, CountingTie{1.0});
        CHECK(out.main == self.main);  // rejection never touches the main coordinate
        const double shift = std::fabs(out.secondary - self.secondary);
        if (peer.secondary == self.secondary) {
            CHECK(shift == Approx(p.mu * p.u_s).margin(1e-12));
        } else {
            CHECK(shift >= 0.0);
            CHECK(shift <= p.mu * p.u_s + 1e-12);
            // Never moves closer to the (pre-update) peer.
            CHECK(std::fabs(out.secondary - peer.secondary) + 1e-12 >=
                  std::fabs(self.secondary - peer.secondary));
        }
    }
    CHECK(rejections > 500);
}

TEST_CASE("influence functions are pure: repeated calls give identical bits") {
    SplitMix64 rng(303);
    for (int i = 0; i < 200; ++i) {
        const Attitude self{rng.next_symmetric(), rng.next_symmetric()};
        const Attitude peer{rng.next_symmetric(), rng.next_symmetric()};
        const auto p = params(rng.next_double() + 0.01, rng.next_double() + 0.01,
                              0.5 * rng.next_double() + 1e-9);
        CHECK(influence_on_non_hsi(self, peer, p) == influence_on_non_hsi(self, peer, p));
        CHECK(influence_on_hsi(self, peer, p, CountingTie{-1.0}) ==
              influence_on_hsi(self, peer, p, CountingTie{-1.0}));
    }
}

TEST_CASE("oracle equivalence over 10^4 randomized tuples, all five branches covered") {
    SplitMix64 rng(404);
    int attraction_non_hsi = 0, attraction_hsi = 0, reject_down = 0, reject_up = 0, ties = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 10000; ++i) {
        double xm = 1.5 * rng.next_symmetric(), xs = 1.5 * rng.next_symmetric();
        double ym = 1.5 * rng.next_symmetric(), ys = 1.5 * rng.next_symmetric();
        if (i % 5 == 0) ys = xs;  // seed exact secondary ties
        const double um = rng.next_double() + 0.01;
        const double us = rng.next_double() + 0.01;
        const double mu = 0.5 * rng.next_double() + 1e-9;
        const double tie_sign = rng.next_sign();
        const auto p = params(um, us, mu, false);

        const auto expected_n = reference::update_non_hsi(xm, xs, ym, ys, um, us, mu);
        const Attitude got_n = influence_on_non_hsi({xm, xs}, {ym, ys}, p);
        REQUIRE(got_n.main == Approx(expected_n.m).margin(1e-12));
        REQUIRE(got_n.secondary == Approx(expected_n.s).margin(1e-12));

        const auto expected_h = reference::update_hsi(xm, xs, ym, ys, um, us, mu, tie_sign);
        const Attitude got_h =
            influence_on_hsi({xm, xs}, {ym, ys}, p, [tie_sign] { return tie_sign; });
        REQUIRE(got_h.main == Approx(expected_h.m).margin(1e-12));
        REQUIRE(got_h.secondary == Approx(expected_h.s).margin(1e-12));

        if (std::fabs(xm - ym) <= um) {
            ++attraction_hsi;
            if (std::fabs(xs - ys) <= us) ++attraction_non_hsi;
        } else if (std::fabs(xs - ys) <= us) {
            if (xs < ys) ++reject_down;
            else if (xs > ys) ++reject_up;
            else ++ties;
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(attraction_non_hsi > 0);
    CHECK(attraction_hsi > 0);
    CHECK(reject_down > 0);
    CHECK(reject_up > 0);
    CHECK(ties > 0);
    CHECK(seconds < 1.0);
}
