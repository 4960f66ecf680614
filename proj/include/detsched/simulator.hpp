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

// Slot-level Monte Carlo of the queue under a scheduling policy.
//
// Each slot: read q, draw h, choose s from the policy, pay xi(s) / h, then
// apply q' = min(max(q - s, 0) + a, Q) with a fresh arrival draw a. Three
// independent generator streams are derived from the seed: stream 0 for
// arrivals, stream 1 for the channel and stream 2 for randomized policy rows.

#pragma once

#include "detsched/construction.hpp"
#include "detsched/model.hpp"
#include "detsched/occupancy.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>

namespace detsched {

/// Seedable generator with named independent streams.
class StreamRng {
  public:
    enum Stream : std::uint32_t { kArrivals = 0, kChannel = 1, kPolicy = 2 };

    StreamRng(std::uint64_t seed, Stream stream);

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  private:
    std::mt19937_64 engine_;
};

struct SimOptions {
    long slots = 1'000'000;
    /// Defaults to max(slots / 10, 1000), or slots / 10 when that would not
    /// leave any measured slot.
    std::optional<long> warmup;
    std::uint64_t seed = 1;
    int batches = 50;
    int initial_queue = 0;
    /// Optional per-slot trace: slot,q,a,h,s,energy.
    std::ostream* trace = nullptr;
};

struct SimReport {
    long slots = 0;
    long warmup = 0;
    int batches = 0;
    std::uint64_t seed = 0;
    double mean_queue = 0.0;
    double delay = 0.0;  // mean_queue / abar
    double delay_se = 0.0;
    double power = 0.0;
    double power_se = 0.0;
    /// Mean FIFO sojourn (slots counted in the queue) of packets that arrived
    /// after warmup and departed before the end.
    double sojourn = 0.0;
    double sojourn_se = 0.0;
    long packets = 0;
    long drops = 0;
    long underflow_overrides = 0;
};

/// Queue update that also reports lost packets.
int step(int q, int a, int s, int buffer_size, long& dropped);

SimReport run_sim(const SystemConfig& cfg, const BinPolicy& policy, const SimOptions& options);
SimReport run_sim(const SystemConfig& cfg, const ThresholdPolicy& policy, const SimOptions& options);

std::string to_key_value(const SimReport& report);
std::string sim_csv_header();
std::string to_csv_row(const SimReport& report);

}  // namespace detsched
