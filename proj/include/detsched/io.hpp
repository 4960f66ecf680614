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

// Text formats: configuration files, measure and policy dumps.
//
// Configuration (JSON):
//
//   {
//     "arrival": {"alphas": [0.4, 0.3, 0.3]},
//     "channel": {"kind": "uniform", "h_min": 0.5, "h_max": 10},
//     "Q": 10,
//     "S_max": 2,
//     "xi_kind": "exp2minus1"          // or "xi": [0, 1, 3]
//   }
//
// A piecewise-constant channel uses "kind": "piecewise" and
// "table": [[edge, value], ...] where each value holds from its edge up to
// the next edge (the last one up to h_max).
//
// All dumps are comma-separated with a header line; floats carry 17
// significant digits.

#pragma once

#include "detsched/construction.hpp"
#include "detsched/model.hpp"
#include "detsched/occupancy.hpp"

#include <filesystem>
#include <string>

namespace detsched {

/// printf-style %.17g.
std::string format_double(double v);

/// Parses a JSON configuration and validates it. ConfigError messages name
/// the offending field.
SystemConfig parse_config(const std::string& text);
/// A built-in name ("paper_iv") or a path to a JSON file.
SystemConfig load_config(const std::string& name_or_path);
std::string config_to_json(const SystemConfig& cfg);

/// Header q,s,k,g
std::string measure_to_csv(const OccupancyMeasure& m);
/// Header q,k,h_lo,h_hi,transient,f_0,...,f_S
std::string bin_policy_to_csv(const BinPolicy& policy);
/// Header q,h_lo,h_hi,s
std::string threshold_policy_to_csv(const ThresholdPolicy& policy);

/// Reads either policy dump; the header decides which.
BinPolicy parse_bin_policy(const SystemConfig& cfg, const std::string& text);
ThresholdPolicy parse_threshold_policy(const SystemConfig& cfg, const std::string& text);
bool is_threshold_policy_csv(const std::string& text);

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace detsched
