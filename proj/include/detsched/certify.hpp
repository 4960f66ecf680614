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

// Numerical certification: the construction's feasibility, determinism and
// power bounds on a concrete LP solution, plus brute-force oracles for the LP
// layer.

#pragma once

#include "detsched/construction.hpp"
#include "detsched/model.hpp"
#include "detsched/occupancy.hpp"
#include "detsched/simplex.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace detsched {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct CertifyOptions {
    int lp_bins = 16;
    /// NaN selects 3 * D_min.
    double delay_bound = std::numeric_limits<double>::quiet_NaN();
    std::vector<int> cells = {1, 2, 4, 8, 16, 32, 64, 380};
    double epsilon = 0.05;
    int samples = 10000;
    int random_lps = 200;
    std::uint64_t seed = 1;
    bool oracles = true;
};

std::vector<CheckResult> certify(const SystemConfig& cfg, const CertifyOptions& options = {});

/// name=...\npass=...\ndetail=...\n blocks separated by blank lines.
std::string checks_to_key_value(const std::vector<CheckResult>& checks);
/// Fixed-width pass/fail table.
std::string checks_to_table(const std::vector<CheckResult>& checks);

/// Exact (D, P) of a threshold policy on the continuous channel.
Metrics evaluate_threshold_policy(const SystemConfig& cfg, const ThresholdPolicy& policy);

// ---- oracles -------------------------------------------------------------

struct PolicyPoint {
    double delay = 0.0;
    double power = 0.0;
};

/// Every deterministic bin policy with admissible actions, evaluated through
/// its exact stationary distribution. Policies with several closed classes
/// are skipped. Exponential in the number of free (q, k) cells.
std::vector<PolicyPoint> enumerate_deterministic(const SystemConfig& cfg, const ChannelDiscretization& disc,
                                                 long limit = 1 << 20);

/// Lower-left convex chain: sorted by delay, power strictly decreasing.
std::vector<PolicyPoint> lower_hull(std::vector<PolicyPoint> points);

/// min P over the hull at delay <= d; +inf if d is left of the hull.
double hull_value(const std::vector<PolicyPoint>& hull, double d);

/// Minimum of an LP by enumerating every basic feasible solution of its
/// slack form. `found` is false when nothing is feasible.
double bfs_oracle(const LinearProgram& lp, bool& found);

/// Small random LP, feasible and bounded by construction. With `degenerate`
/// the witness point sits on several bounds and a redundant row is added.
LinearProgram random_lp(std::mt19937_64& rng, bool degenerate);

/// Q=2, A=1, S_max=1, alpha=(0.5, 0.5), xi=(0, 1), uniform (1, 2].
SystemConfig tiny_config();

}  // namespace detsched
