// Copyright 2026 The detsched Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "detsched/certify.hpp"
#include "detsched/construction.hpp"
#include "detsched/simulator.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace detsched;

namespace {

PiecewiseDensity lp_density(int bins, double dth) {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, bins);
    const auto sol = solve_constrained(cfg, disc, dth);
    REQUIRE(sol.status == LpStatus::kOptimal);
    return density_from_measure(*sol.measure);
}

// Two pieces on (1, 2]: q = 0 sends 0 on the left half, 1 on the right.
PiecewiseDensity two_piece() {
    PiecewiseDensity d(tiny_config(), {1.0, 1.5, 2.0});
    d.value(0, 0, 0) = 0.2;
    d.value(0, 1, 1) = 0.6;
    return d;
}

}  // namespace

TEST_CASE("envelope and inversion by hand") {
    const auto d = two_piece();
    const auto U = compute_envelope(d, 0);
    CHECK(U(1.0) == 0.0);
    CHECK(U(1.5) == doctest::Approx(0.1));
    CHECK(U(1.75) == doctest::Approx(0.25));
    CHECK(U.total() == doctest::Approx(0.4));
    CHECK(invert_envelope(U, 0.05) == doctest::Approx(1.25));
    CHECK(invert_envelope(U, 0.1) == doctest::Approx(1.5));
    CHECK(invert_envelope(U, 0.4) == doctest::Approx(2.0));
    CHECK_THROWS_WITH(invert_envelope(U, 0.5), "mass out of range");

    // Flat start: inversion picks the leftmost point.
    PiecewiseDensity flat(tiny_config(), {1.0, 1.5, 2.0});
    flat.value(1, 1, 1) = 0.6;
    const auto F = compute_envelope(flat, 1);
    CHECK(invert_envelope(F, 0.0) == 1.0);
    CHECK(invert_envelope(F, 0.15) == doctest::Approx(1.75));
}

TEST_CASE("inversion round trip on random step envelopes") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> breaks = {1.0};
        const int pieces = 1 + t % 7;
        for (int i = 0; i < pieces; ++i) breaks.push_back(breaks.back() + 0.1 + u(rng));
        PiecewiseDensity d(tiny_config(), breaks);
        for (int i = 0; i < pieces; ++i)
            for (int s = 0; s <= 1; ++s) d.value(0, s, i) = u(rng) < 0.3 ? 0.0 : u(rng);
        const auto U = compute_envelope(d, 0);
        for (int j = 0; j < 20; ++j) {
            const double v = u(rng) * U.total();
            const double h = invert_envelope(U, v);
            CHECK(h >= breaks.front());
            CHECK(h <= breaks.back());
            CHECK(std::abs(U(h) - v) <= 1e-12);
        }
    }
}

TEST_CASE("one cell splits at the hand-computed threshold") {
    // Constant rate densities c0, c1 on (1, 2]: the rate-0 stretch ends at
    // 1 + c0 / (c0 + c1).
    PiecewiseDensity d(tiny_config(), {1.0, 2.0});
    d.value(1, 0, 0) = 0.15;
    d.value(1, 1, 0) = 0.35;
    const auto t = compute_thresholds(d, 1);
    CHECK(t.upper(1, 0, 0) == doctest::Approx(1.3));
    CHECK(t.upper(1, 0, 1) == 2.0);
    CHECK(t.lower(1, 0, 1) == doctest::Approx(1.3));
}

TEST_CASE("zero-mass rates get empty stretches; sole rates take the cell") {
    const auto d = two_piece();
    const auto t = compute_thresholds(d, 2);
    // Cell 0 = (1, 1.5]: only rate 0.
    CHECK(t.upper(0, 0, 0) == doctest::Approx(1.5));
    CHECK(t.upper(0, 0, 1) == 1.5);
    CHECK(t.lower(0, 0, 1) == t.upper(0, 0, 1));
    // Cell 1 = (1.5, 2]: rate 0 empty.
    CHECK(t.upper(0, 1, 0) == doctest::Approx(1.5));
    CHECK(t.upper(0, 1, 1) == 2.0);
    // q = 2 carries nothing: everything below S_max is empty.
    for (int k = 0; k < 2; ++k) {
        CHECK(t.upper(2, k, 0) == t.cell_min(k));
        CHECK(t.upper(2, k, 1) == t.cell_max(k));
    }
}

TEST_CASE("an aligned deterministic source is reproduced exactly") {
    const auto d = two_piece();
    const auto y = construct_yM(d, 2);
    for (int j = 0; j < 1000; ++j) {
        const double h = 1.0 + (j + 0.5) / 1000.0;
        for (int q = 0; q <= 2; ++q)
            for (int s = 0; s <= 1; ++s) CHECK(y.value(q, s, h) == doctest::Approx(d.at(q, s, h)).epsilon(1e-14));
    }
}

TEST_CASE("density from a measure keeps every cell mass") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 8);
    const auto sol = solve_constrained(cfg, disc, 2.0);
    const auto d = density_from_measure(*sol.measure);
    for (int q = 0; q <= 10; ++q)
        for (int s = 0; s <= 2; ++s)
            for (int k = 0; k < 8; ++k)
                CHECK(std::abs(d.mass(q, s, disc.edges[k], disc.edges[k + 1]) - sol.measure->at(q, s, k)) <= 1e-14);
    CHECK(std::abs(density_power(d) - sol.objective) <= 1e-10);
    CHECK(std::abs(density_delay(d) - evaluate_measure(*sol.measure).delay) <= 1e-12);
}

TEST_CASE("construction is feasible and deterministic") {
    const auto d = lp_density(16, 3.0);
    for (int cells : {1, 4, 8, 64}) {
        const auto y = construct_yM(d, cells);
        const auto r = verify_feasibility(y, 10000, 3.0);
        CHECK(r.channel_marginal <= 1e-8);
        CHECK(r.queue_balance <= 1e-8);
        CHECK(r.delay_match <= 1e-8);
        CHECK(r.delay_excess <= 1e-8);
        CHECK(r.nonnegativity == 0.0);
        CHECK(r.structural_zeros <= 1e-10);
        CHECK(r.rate_preservation <= 1e-10);
        CHECK(r.partition <= 1e-12);
        CHECK(r.telescoping == 0.0);
        CHECK(r.total_mass_error <= 1e-10);

        const auto det = verify_deterministic(y);
        CHECK(det.deterministic);
        CHECK(det.exact_ok);
        CHECK_FALSE(det.witness.has_value());
    }
}

TEST_CASE("a corrupted interval is caught") {
    const auto d = lp_density(4, 3.0);
    auto y = construct_yM(d, 4);
    // Widen a stretch of q = 1 into its neighbour.
    for (auto& iv : y.intervals[1]) {
        if (iv.hi > iv.lo && iv.hi < d.h_max()) {
            iv.hi += 0.3;
            break;
        }
    }
    const auto r = verify_feasibility(y);
    CHECK(r.channel_marginal > 1e-3);
    CHECK(r.partition > 0.1);
    CHECK(r.rate_preservation > 1e-4);
}

TEST_CASE("the mixed source itself is not deterministic") {
    const auto d = lp_density(16, 3.0);
    const auto raw = source_as_solution(d);
    const auto det = verify_deterministic(raw);
    CHECK_FALSE(det.deterministic);
    REQUIRE(det.witness.has_value());
    CHECK(det.witness->rate_a != det.witness->rate_b);
    CHECK(d.at(det.witness->queue, det.witness->rate_a, det.witness->h) > 0.0);
    CHECK(d.at(det.witness->queue, det.witness->rate_b, det.witness->h) > 0.0);
    CHECK_THROWS_AS(yM_to_policy(raw), DeterminismError);
}

TEST_CASE("power ratio") {
    SystemConfig idle;
    idle.arrival.alphas = {1.0};
    idle.channel = ChannelModel::uniform(1.0, 2.0);
    idle.buffer_size = 1;
    idle.max_rate = 1;
    idle.energy = {0.0, 1.0};
    PiecewiseDensity d0(idle, {1.0, 2.0});
    d0.value(0, 0, 0) = 1.0;
    const auto r0 = power_ratio(construct_yM(d0, 3), d0);
    CHECK(r0.source == 0.0);
    CHECK(r0.ratio == 1.0);
    CHECK(r0.within_bound);

    const auto d = lp_density(16, 3.0);
    CHECK(power_ratio(construct_yM(d, 19), d).bound == doctest::Approx(2.0).epsilon(1e-15));
    for (int cells : {1, 2, 8, 64}) {
        const auto r = power_ratio(construct_yM(d, cells), d);
        CHECK(r.ratio <= r.bound + 1e-10);
        CHECK(r.constructed > 0.0);
    }
}

TEST_CASE("threshold policy uses (lo, hi] stretches") {
    const auto d = two_piece();
    const auto pol = yM_to_policy(construct_yM(d, 2));
    CHECK(pol.rate(0, 1.2) == 0);
    CHECK(pol.rate(0, 1.5) == 0);
    CHECK(pol.rate(0, 1.5000001) == 1);
    CHECK(pol.rate(0, 2.0) == 1);
    CHECK(pol.transient[1]);
    CHECK(pol.rate(1, 1.7) == 1);  // transient rows send min(q, S_max)
    CHECK(pol.rate(2, 1.1) == 1);
}

TEST_CASE("the threshold policy simulates to its exact value") {
    const auto cfg = builtin_config("paper_iv");
    const auto pol = yM_to_policy(construct_yM(lp_density(16, 3.0), 64));
    const auto exact = evaluate_threshold_policy(cfg, pol);
    SimOptions opt;
    opt.slots = 1'000'000;
    opt.seed = 3;
    const auto sim = run_sim(cfg, pol, opt);
    CHECK(std::abs(sim.delay - exact.delay) <= 0.01 * exact.delay);
    CHECK(std::abs(sim.power - exact.power) <= 0.01 * exact.power);
    CHECK(sim.drops == 0);
    CHECK(sim.underflow_overrides == 0);
}
