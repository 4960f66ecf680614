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

// Physical and queueing model of a single wireless link.
//
// Time is slotted. In slot n the transmitter observes the queue length q[n]
// and the channel energy gain h[n], sends s[n] packets at an energy cost of
// xi(s[n]) / h[n], and the queue evolves as
//
//   q[n+1] = min(max(q[n] - s[n], 0) + a[n+1], Q),
//
// where a[n] are i.i.d. arrivals on {0, ..., A} and h[n] are i.i.d. draws from
// a bounded density on (h_min, h_max]. Queue states are {0, ..., Q} and rates
// are {0, ..., S_max}.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace detsched {

/// Absolute tolerance used for probability comparisons.
inline constexpr double kProbTol = 1e-10;

/// Raised when a configuration violates a model invariant. The message names
/// the violated invariant (or the offending field for parse errors).
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Distribution of the number of packets arriving in one slot.
struct ArrivalModel {
    /// alphas[k] = Pr{a = k}, k = 0..A.
    std::vector<double> alphas;

    int max_arrivals() const { return static_cast<int>(alphas.size()) - 1; }
};

/// Average number of arrivals per slot.
double mean_arrival_rate(const ArrivalModel& arrival);

enum class DensityKind { kUniform, kPiecewiseConstant };

/// Channel energy gain distribution on (h_min, h_max].
///
/// The density is stored as a step function: piece i covers
/// (breaks[i], breaks[i+1]] with constant value values[i]. A uniform density
/// is the single-piece case.
class ChannelModel {
  public:
    ChannelModel() = default;

    static ChannelModel uniform(double h_min, double h_max);

    /// `table` holds (left edge, value) pairs. The first edge must be h_min;
    /// the last piece extends to h_max.
    static ChannelModel piecewise(double h_min, double h_max,
                                  const std::vector<std::pair<double, double>>& table);

    DensityKind kind() const { return kind_; }
    double h_min() const { return breaks_.front(); }
    double h_max() const { return breaks_.back(); }
    const std::vector<double>& breaks() const { return breaks_; }
    const std::vector<double>& values() const { return values_; }

    /// f_H(h); zero outside (h_min, h_max].
    double density(double h) const;
    double cdf(double h) const;
    /// Integral of f_H over (a, b], clipped to the support.
    double mass(double a, double b) const;
    /// Integral of f_H(h) / h over (a, b], exact for step densities.
    double inverse_moment(double a, double b) const;

  private:
    DensityKind kind_ = DensityKind::kUniform;
    std::vector<double> breaks_;
    std::vector<double> values_;
};

struct SystemConfig {
    ArrivalModel arrival;
    ChannelModel channel;
    int buffer_size = 0;  // Q
    int max_rate = 0;     // S_max
    /// energy[s] = xi(s) for s = 0..S_max.
    std::vector<double> energy;

    int max_arrivals() const { return arrival.max_arrivals(); }
    int num_queue_states() const { return buffer_size + 1; }
    int num_rates() const { return max_rate + 1; }

    /// True when g(q, s, .) may be positive: 0 <= q - s <= Q - A and
    /// s <= S_max. Anything else would under- or overflow the buffer.
    bool admissible(int q, int s) const {
        if (q < 0 || q > buffer_size || s < 0 || s > max_rate) return false;
        const int left = q - s;
        return left >= 0 && left <= buffer_size - max_arrivals();
    }
};

/// Returns `cfg` unchanged or throws ConfigError naming the first violated
/// invariant.
const SystemConfig& validate_config(const SystemConfig& cfg);

/// xi(s) = 2^s - 1 for s = 0..max_rate.
std::vector<double> exp2_minus_one_energy(int max_rate);

/// Built-in configurations by name. Currently only "paper_iv":
/// A = 2, S_max = 2, alpha = (0.4, 0.3, 0.3), Q = 10, xi(s) = 2^s - 1,
/// uniform gain on (0.5, 10].
SystemConfig builtin_config(const std::string& name);

/// Equal-width partition of the channel support into bins with exact
/// per-bin probability mass and conditional mean inverse gain.
struct ChannelDiscretization {
    std::vector<double> edges;     // M + 1 edges, edges.front() = h_min
    std::vector<double> mass;      // p_k
    std::vector<double> inv_mean;  // r_k = E[1/h | h in bin k]

    int bins() const { return static_cast<int>(mass.size()); }
    double width(int k) const { return edges[k + 1] - edges[k]; }
    /// Bin index of h in (h_min, h_max]; h <= h_min maps to 0, h > h_max to
    /// the last bin.
    int bin_of(double h) const;
};

/// Throws ConfigError("empty channel bin") when a bin carries no mass.
ChannelDiscretization discretize_channel(const ChannelModel& channel, int bins);

/// Leftmost h with CDF(h) >= u.
double channel_cdf_inverse(const ChannelModel& channel, double u);

}  // namespace detsched
