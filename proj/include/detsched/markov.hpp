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

// Queue-length Markov chains induced by stationary policies.

#pragma once

#include "detsched/model.hpp"

#include <vector>

namespace detsched {

using TransitionMatrix = std::vector<std::vector<double>>;

/// Queue update q' = min(max(q - s, 0) + a, Q).
inline int step(int q, int a, int s, int buffer_size) {
    const int left = q - s > 0 ? q - s : 0;
    const int next = left + a;
    return next < buffer_size ? next : buffer_size;
}

/// Transition matrix of q given rate_probs[q][s] = Pr{s | q} (the channel
/// already averaged out).
TransitionMatrix queue_transitions(const SystemConfig& cfg,
                                   const std::vector<std::vector<double>>& rate_probs);

/// Closed communicating classes, each sorted, ordered by smallest member.
std::vector<std::vector<int>> closed_classes(const TransitionMatrix& P);

/// Unique stationary distribution; throws ReducibleChainError naming two
/// closed classes when there is more than one.
std::vector<double> stationary_distribution(const TransitionMatrix& P);

}  // namespace detsched
