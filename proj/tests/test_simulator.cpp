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

#include "detsched/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace detsched;

namespace {

BinPolicy greedy(const SystemConfig& cfg, const ChannelDiscretization& disc) {
    std::vector<std::vector<int>> a(cfg.num_queue_states(), std::vector<int>(disc.bins()));
    for (int q = 0; q < cfg.num_queue_states(); ++q)
        for (int k = 0; k < disc.bins(); ++k) a[q][k] = std::min(q, cfg.max_rate);
    return BinPolicy::deterministic(cfg, disc, a);
}

}  // namespace

TEST_CASE("queue update clips at zero and at the buffer") {
    long dropped = 0;
    CHECK(step(1, 0, 2, 10, dropped) == 0);
    CHECK(dropped == 0);
    CHECK(step(10, 2, 0, 10, dropped) == 10);
    CHECK(dropped == 2);
    CHECK(step(5, 1, 2, 10, dropped) == 4);
    CHECK(dropped == 2);
}

TEST_CASE("same seed, same bytes") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 4);
    SimOptions opt;
    opt.slots = 20000;
    opt.seed = 99;
    const auto a = run_sim(cfg, greedy(cfg, disc), opt);
    const auto b = run_sim(cfg, greedy(cfg, disc), opt);
    CHECK(to_key_value(a) == to_key_value(b));
    CHECK(to_csv_row(a) == to_csv_row(b));
    opt.seed = 100;
    CHECK(to_key_value(run_sim(cfg, greedy(cfg, disc), opt)) != to_key_value(a));
}

TEST_CASE("warmup defaults and option checks") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 2);
    const auto pol = greedy(cfg, disc);
    SimOptions opt;
    opt.slots = 50000;
    CHECK(run_sim(cfg, pol, opt).warmup == 5000);
    opt.slots = 5000;
    CHECK(run_sim(cfg, pol, opt).warmup == 1000);
    opt.slots = 800;
    CHECK(run_sim(cfg, pol, opt).warmup == 80);
    opt.warmup = 800;
    CHECK_THROWS_AS(run_sim(cfg, pol, opt), std::invalid_argument);
    opt.warmup.reset();
    opt.slots = 0;
    CHECK_THROWS_AS(run_sim(cfg, pol, opt), std::invalid_argument);
}

TEST_CASE("always-max policy matches the exact chain") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 8);
    const auto pol = greedy(cfg, disc);
    const auto exact = evaluate_measure(policy_to_measure(cfg, disc, pol));
    SimOptions opt;
    opt.slots = 1'000'000;
    opt.seed = 7;
    const auto sim = run_sim(cfg, pol, opt);
    CHECK(std::abs(sim.delay - exact.delay) <= 0.01 * exact.delay);
    CHECK(std::abs(sim.power - exact.power) <= 0.01 * exact.power);
    CHECK(sim.drops == 0);
    CHECK(sim.underflow_overrides == 0);
    CHECK(sim.delay_se > 0.0);
    CHECK(sim.batches == 50);
    // Little's law with no drops: mean sojourn equals E[q] / abar.
    CHECK(std::abs(sim.sojourn - sim.delay) <= 0.01 * sim.delay);
    CHECK(sim.packets > 800000);
}

TEST_CASE("randomized rows are sampled with their probabilities") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 2);
    const auto sol = solve_constrained(cfg, disc, 2.2);
    const auto pol = extract_policy(*sol.measure);
    SimOptions opt;
    opt.slots = 1'000'000;
    opt.seed = 11;
    const auto sim = run_sim(cfg, pol, opt);
    const auto exact = evaluate_measure(policy_to_measure(cfg, disc, pol));
    CHECK(std::abs(sim.delay - exact.delay) <= 0.01 * exact.delay);
    CHECK(std::abs(sim.power - exact.power) <= 0.01 * exact.power);
}

TEST_CASE("overrides and drops are counted") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 1);
    std::vector<std::vector<int>> idle(11, std::vector<int>(1, 0));
    const auto pol = BinPolicy::deterministic(cfg, disc, idle);
    SimOptions opt;
    opt.slots = 2000;
    const auto sim = run_sim(cfg, pol, opt);
    CHECK(sim.drops > 0);
    CHECK(sim.mean_queue > 9.0);
    CHECK(sim.power == 0.0);

    std::vector<std::vector<int>> pushy(11, std::vector<int>(1, 2));
    CHECK(run_sim(cfg, BinPolicy::deterministic(cfg, disc, pushy), opt).underflow_overrides > 0);
}

TEST_CASE("trace has one row per slot") {
    const auto cfg = builtin_config("paper_iv");
    const auto disc = discretize_channel(cfg.channel, 2);
    std::ostringstream trace;
    SimOptions opt;
    opt.slots = 300;
    opt.trace = &trace;
    run_sim(cfg, greedy(cfg, disc), opt);
    std::istringstream in(trace.str());
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        int commas = 0;
        for (char c : line) commas += c == ',';
        CHECK(commas == 5);
        ++rows;
    }
    CHECK(rows == 300);
}
