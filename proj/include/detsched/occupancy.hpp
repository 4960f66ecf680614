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

// Occupation-measure linear program for the delay-constrained power
// minimization, with the channel discretized into bins.
//
// Decision variable g[q][s][k] is the stationary probability of being in
// queue state q, sending s packets, with the channel in bin k. With
// abar = E[a] the LP reads
//
//   min   sum xi(s) r_k g[q][s][k]                            (average power)
//   s.t.  (1/abar) sum q g[q][s][k] <= D_th                   (average delay)
//         sum_{q,s} g[q][s][k] = p_k                  for each bin k
//         sum_a sum_s alpha_a g[q+s-a][s][.] = sum_s g[q][s][.]   for each q
//         sum_s g[q][s][k] = p_k sum_{s,k'} g[q][s][k']   for each q, k
//         g >= 0, g = 0 unless 0 <= q - s <= Q - A.
//
// The last family states that the channel draw of a slot is independent of
// the queue length at that slot. Without it the LP may pair queue states with
// channel bins, and its optimum is not achievable by any scheduler.

#pragma once

#include "detsched/model.hpp"
#include "detsched/simplex.hpp"

#include <array>
#include <limits>
#include <optional>
#include <vector>

namespace detsched {

/// Discretized occupation measure g[q][s][k].
class OccupancyMeasure {
  public:
    OccupancyMeasure(SystemConfig cfg, ChannelDiscretization disc);

    const SystemConfig& config() const { return cfg_; }
    const ChannelDiscretization& discretization() const { return disc_; }

    double& at(int q, int s, int k) { return values_[index(q, s, k)]; }
    double at(int q, int s, int k) const { return values_[index(q, s, k)]; }

    /// sum_s g[q][s][k]
    double cell_mass(int q, int k) const;
    /// sum_{s,k} g[q][s][k]
    double queue_mass(int q) const;
    /// sum_k g[q][s][k]
    double rate_mass(int q, int s) const;

    const std::vector<double>& values() const { return values_; }

  private:
    size_t index(int q, int s, int k) const {
        return (static_cast<size_t>(q) * cfg_.num_rates() + s) * disc_.bins() + k;
    }

    SystemConfig cfg_;
    ChannelDiscretization disc_;
    std::vector<double> values_;
};

struct Metrics {
    double delay = 0.0;  // slots, E[q] / abar
    double power = 0.0;  // energy per slot
};

/// Delay via Little's law and average power. abar = 0 gives delay 0.
Metrics evaluate_measure(const OccupancyMeasure& m);

/// Largest violation of the measure's invariants: nonnegativity, bin masses,
/// queue balance, channel independence and structural zeros.
double measure_residual(const OccupancyMeasure& m);

enum class PolicyKind { kProbabilistic, kDeterministic };

/// Stationary scheduling rule on (queue state, channel bin).
///
/// Rows with no stationary mass are flagged transient and send
/// min(q, S_max) so the rule stays total.
class BinPolicy {
  public:
    BinPolicy() = default;
    BinPolicy(const SystemConfig& cfg, ChannelDiscretization disc);

    /// One-hot policy from an action table indexed [q][k].
    static BinPolicy deterministic(const SystemConfig& cfg, ChannelDiscretization disc,
                                   const std::vector<std::vector<int>>& actions);

    int num_queue_states() const { return queue_states_; }
    int num_rates() const { return rates_; }
    int bins() const { return disc_.bins(); }
    const ChannelDiscretization& discretization() const { return disc_; }

    double& prob(int q, int k, int s) { return prob_[(static_cast<size_t>(q) * bins() + k) * rates_ + s]; }
    double prob(int q, int k, int s) const { return prob_[(static_cast<size_t>(q) * bins() + k) * rates_ + s]; }
    bool transient(int q, int k) const { return transient_[static_cast<size_t>(q) * bins() + k] != 0; }
    void set_transient(int q, int k, bool flag) { transient_[static_cast<size_t>(q) * bins() + k] = flag; }

    PolicyKind kind() const { return kind_; }
    void set_kind(PolicyKind kind) { kind_ = kind; }

    /// Most likely rate of row (q, k); the rate itself for one-hot rows.
    int action(int q, int k) const;
    /// True when every non-transient row is one-hot within `tol`.
    bool one_hot(double tol = 1e-9) const;

  private:
    int queue_states_ = 0;
    int rates_ = 0;
    ChannelDiscretization disc_;
    std::vector<double> prob_;
    std::vector<char> transient_;
    PolicyKind kind_ = PolicyKind::kProbabilistic;
};

/// A row whose off-argmax mass is below this (or below 1e-9 of the row) is
/// one-hot.
inline constexpr double kOneHotMass = 1e-10;

/// Conditional rate distribution f(s | q, k) = g[q][s][k] / sum_x g[q][x][k].
/// kind = deterministic when every non-transient row is one-hot; such rows
/// are then snapped to exact indicators.
BinPolicy extract_policy(const OccupancyMeasure& m);

/// Raised when a policy induces more than one closed class of queue states.
class ReducibleChainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Exact stationary occupation measure of `policy`.
OccupancyMeasure policy_to_measure(const SystemConfig& cfg, const ChannelDiscretization& disc,
                                   const BinPolicy& policy);

struct LpOptions {
    /// Adds the queue/channel independence rows. Disabling reproduces the
    /// relaxation that only fixes the channel marginal.
    bool couple_channel = true;
    SimplexOptions simplex;
};

/// LP in matrix form together with the variable and row layout.
struct OccupancyLp {
    LinearProgram lp;
    std::vector<std::array<int, 3>> cells;  // variable -> (q, s, k), q-major then s then k
    int delay_row = -1;
    int first_mass_row = 0;
    int first_balance_row = 0;
    int first_coupling_row = -1;
};

/// to_measure rounds LP values at or below this to zero.
inline constexpr double kResidueMass = 1e-13;

inline constexpr double kNoDelayBound = std::numeric_limits<double>::infinity();

/// Power-minimization LP; an infinite `delay_bound` omits the delay row, as
/// does abar = 0.
OccupancyLp build_lp(const SystemConfig& cfg, const ChannelDiscretization& disc,
                     double delay_bound, const LpOptions& options = {});

/// Same feasible set as build_lp, objective power_weight * P + delay_weight * D.
OccupancyLp build_weighted_lp(const SystemConfig& cfg, const ChannelDiscretization& disc,
                              double power_weight, double delay_weight, double delay_bound,
                              const LpOptions& options = {});

/// Copies an LP primal solution into a measure.
OccupancyMeasure to_measure(const SystemConfig& cfg, const ChannelDiscretization& disc,
                            const OccupancyLp& model, const std::vector<double>& x);

struct LpSolution {
    LpStatus status = LpStatus::kInfeasible;
    double objective = 0.0;  // average power
    std::optional<OccupancyMeasure> measure;
    /// Marginal power saved per slot of extra delay budget (>= 0); zero when
    /// the delay row is absent or slack.
    double delay_dual = 0.0;
    double residual = 0.0;
    long iterations = 0;
};

LpSolution solve_constrained(const SystemConfig& cfg, const ChannelDiscretization& disc,
                             double delay_bound, const LpOptions& options = {});

/// Least average delay over all stationary policies at this discretization.
double min_delay(const SystemConfig& cfg, const ChannelDiscretization& disc,
                 const LpOptions& options = {});

struct LagrangianSolution {
    LpStatus status = LpStatus::kInfeasible;
    double weight = 0.0;  // lambda
    double value = 0.0;   // P + lambda * D
    Metrics metrics;
    std::optional<OccupancyMeasure> measure;
    BinPolicy policy;
};

/// Minimizes P + lambda * D without a delay budget. The basic optimum is a
/// vertex of the achievable (D, P) region.
LagrangianSolution solve_lagrangian(const SystemConfig& cfg, const ChannelDiscretization& disc,
                                    double lambda, const LpOptions& options = {});

}  // namespace detsched
