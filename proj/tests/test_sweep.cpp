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
#include "detsched/sweep.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace detsched;

namespace {

Vertex at(double d, double p) {
    Vertex v;
    v.delay = d;
    v.power = p;
    return v;
}

}  // namespace

TEST_CASE("distances between consecutive vertices") {
    const auto d = vertex_distances({at(1.0, 5.0), at(2.0, 4.0)});
    REQUIRE(d.size() == 1u);
    CHECK(d[0].euclidean == doctest::Approx(std::sqrt(2.0)));
    CHECK(d[0].delay_axis == doctest::Approx(1.0));
    CHECK(vertex_distances({at(1.0, 5.0)}).empty());
    CHECK(vertex_distances({}).empty());
}

TEST_CASE("interpolation between vertices") {
    const std::vector<Vertex> v = {at(1.0, 5.0), at(2.0, 4.0), at(4.0, 3.0)};
    CHECK(interpolate_vertices(v, 1.5) == doctest::Approx(4.5));
    CHECK(interpolate_vertices(v, 3.0) == doctest::Approx(3.5));
    CHECK(interpolate_vertices(v, 2.0) == doctest::Approx(4.0));
    CHECK(std::isnan(interpolate_vertices(v, 0.5)));
    CHECK(std::isnan(interpolate_vertices(v, 5.0)));
}

TEST_CASE("default grid") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 4);
    const auto g = default_grid(cfg, disc);
    REQUIRE(g.size() == 60u);
    const double dmin = min_delay(cfg, disc);
    CHECK(g.front() == doctest::Approx(dmin));
    CHECK(g.back() == doctest::Approx(3.0 * dmin));
    for (size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
    CHECK(default_lambda_max(cfg) == doctest::Approx(1e4 * 3.0 / 0.5));
}

TEST_CASE("sweep on a single point and on infeasible budgets") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 2);
    const auto one = sweep_curve(cfg, disc, {2.0});
    REQUIRE(one.points.size() == 1u);
    CHECK(one.points[0].delay_bound == 2.0);
    CHECK(one.points[0].power == doctest::Approx(solve_constrained(cfg, disc, 2.0).objective).epsilon(1e-14));

    const auto mixed = sweep_curve(cfg, disc, {0.2, 0.5, 2.0, 3.0});
    CHECK(mixed.points.size() == 2u);
    CHECK(mixed.notes.size() == 2u);
    CHECK_THROWS_WITH(sweep_curve(cfg, disc, {0.2, 0.5}), "empty curve");
}

TEST_CASE("vertices trace the lower hull") {
    const auto cfg = builtin_config("paper_iv");
    for (int m : {2, 4}) {
        const auto disc = discretize_channel(cfg.channel, m);
        const auto v = enumerate_vertices(cfg, disc, default_lambda_max(cfg));
        REQUIRE(v.size() >= 2u);
        CHECK(std::abs(v.front().delay - min_delay(cfg, disc)) <= 1e-8);
        const auto free_run = solve_constrained(cfg, disc, kNoDelayBound);
        CHECK(std::abs(v.back().power - free_run.objective) <= 1e-8);
        for (size_t i = 1; i < v.size(); ++i) {
            CHECK(v[i].delay > v[i - 1].delay);
            CHECK(v[i].power < v[i - 1].power);
            CHECK(v[i].weight < v[i - 1].weight);
        }
        for (size_t i = 1; i + 1 < v.size(); ++i) {
            const double s1 = (v[i].power - v[i - 1].power) / (v[i].delay - v[i - 1].delay);
            const double s2 = (v[i + 1].power - v[i].power) / (v[i + 1].delay - v[i].delay);
            CHECK(s1 < s2);  // strictly convex corners only
        }
        for (const auto& x : v) {
            CHECK(x.policy.kind() == PolicyKind::kDeterministic);
            // The stored policy reproduces the vertex exactly.
            const auto met = evaluate_measure(policy_to_measure(cfg, disc, x.policy));
            CHECK(std::abs(met.delay - x.delay) <= 1e-8);
            CHECK(std::abs(met.power - x.power) <= 1e-8);
        }

        const auto grid = default_grid(cfg, disc, 25);
        const auto curve = sweep_curve(cfg, disc, grid);
        CHECK(curve.nonincreasing);
        CHECK(curve.convex);
        for (const auto& p : curve.points) {
            const double hull = interpolate_vertices(v, p.delay_bound);
            CHECK(std::abs(p.power - hull) <= 1e-6);
            CHECK(p.power >= hull - 1e-8);
        }
    }
}

TEST_CASE("tiny instance vertices match the exposed deterministic points") {
    const auto cfg = tiny_config();
    for (int m : {1, 2}) {
        const auto disc = discretize_channel(cfg.channel, m);
        const auto v = enumerate_vertices(cfg, disc, default_lambda_max(cfg));
        const auto ref = oracle::exposed_points(oracle::all_deterministic(cfg, m));
        REQUIRE(v.size() == ref.size());
        for (size_t i = 0; i < v.size(); ++i) {
            CHECK(std::abs(v[i].delay - ref[i].delay) <= 1e-8);
            CHECK(std::abs(v[i].power - ref[i].power) <= 1e-8);
        }
    }
}

TEST_CASE("a short weight range does not reach the fastest vertex") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 2);
    CHECK_THROWS_AS(enumerate_vertices(cfg, disc, 1e-3), VertexError);
}

TEST_CASE("window selection") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 2);
    const auto all = enumerate_vertices(cfg, disc, default_lambda_max(cfg));
    TradeoffCurve curve;
    attach_vertices(curve, all, 1.0, 3.0);
    CHECK(curve.window_lo == 1.0);
    CHECK(curve.window_hi == 3.0);
    REQUIRE(!curve.vertices.empty());
    for (const auto& v : curve.vertices) {
        CHECK(v.delay >= 1.0 - 1e-9);
        CHECK(v.delay <= 3.0 + 1e-9);
    }
    CHECK(curve.distances.size() == curve.vertices.size() - 1);
    CHECK(curve.vertices.size() < all.size());
}

TEST_CASE("convergence study") {
    const auto cfg = builtin_config("paper_iv");
    const auto grid = default_grid(cfg, discretize_channel(cfg.channel, 16), 15);

    const auto same = convergence_study(cfg, {4, 4}, grid);
    REQUIRE(same.sup_gaps.size() == 1u);
    CHECK(same.sup_gaps[0] == 0.0);

    const auto s = convergence_study(cfg, {2, 4, 8}, grid);
    CHECK(s.curves.size() == 3u);
    CHECK(s.dominance_violation <= 1e-8);
    REQUIRE(s.sup_gaps.size() == 2u);
    CHECK(s.sup_gaps[1] < s.sup_gaps[0]);
}
