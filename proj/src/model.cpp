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

#include "detsched/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace detsched {

double mean_arrival_rate(const ArrivalModel& arrival) {
    double rate = 0.0;
    for (size_t k = 0; k < arrival.alphas.size(); ++k) rate += static_cast<double>(k) * arrival.alphas[k];
    return rate;
}

ChannelModel ChannelModel::uniform(double h_min, double h_max) {
    ChannelModel ch;
    ch.kind_ = DensityKind::kUniform;
    ch.breaks_ = {h_min, h_max};
    ch.values_ = {h_max > h_min ? 1.0 / (h_max - h_min) : 0.0};
    return ch;
}

ChannelModel ChannelModel::piecewise(double h_min, double h_max,
                                     const std::vector<std::pair<double, double>>& table) {
    if (table.empty()) throw ConfigError("channel.table: empty");
    if (table.front().first != h_min) throw ConfigError("channel.table: first edge must equal h_min");
    ChannelModel ch;
    ch.kind_ = DensityKind::kPiecewiseConstant;
    for (const auto& [edge, value] : table) {
        if (!ch.breaks_.empty() && edge <= ch.breaks_.back())
            throw ConfigError("channel.table: edges not increasing");
        if (edge >= h_max) throw ConfigError("channel.table: edge beyond h_max");
        ch.breaks_.push_back(edge);
        ch.values_.push_back(value);
    }
    ch.breaks_.push_back(h_max);
    return ch;
}

double ChannelModel::density(double h) const {
    if (h <= h_min() || h > h_max()) return 0.0;
    // piece i covers (breaks[i], breaks[i+1]]
    const auto it = std::lower_bound(breaks_.begin() + 1, breaks_.end(), h);
    return values_[static_cast<size_t>(it - breaks_.begin() - 1)];
}

double ChannelModel::mass(double a, double b) const {
    double total = 0.0;
    for (size_t i = 0; i < values_.size(); ++i) {
        const double lo = std::max(a, breaks_[i]);
        const double hi = std::min(b, breaks_[i + 1]);
        if (hi > lo) total += values_[i] * (hi - lo);
    }
    return total;
}

double ChannelModel::cdf(double h) const { return mass(h_min(), h); }

double ChannelModel::inverse_moment(double a, double b) const {
    double total = 0.0;
    for (size_t i = 0; i < values_.size(); ++i) {
        const double lo = std::max(a, breaks_[i]);
        const double hi = std::min(b, breaks_[i + 1]);
        if (hi > lo && values_[i] != 0.0) total += values_[i] * std::log(hi / lo);
    }
    return total;
}

const SystemConfig& validate_config(const SystemConfig& cfg) {
    const auto& alphas = cfg.arrival.alphas;
    if (alphas.empty()) throw ConfigError("arrival distribution is empty");
    for (double a : alphas)
        if (!(a >= 0.0)) throw ConfigError("negative arrival probability");
    const double total = std::accumulate(alphas.begin(), alphas.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("probabilities do not sum to 1");

    const auto& ch = cfg.channel;
    if (ch.breaks().size() < 2) throw ConfigError("channel is undefined");
    if (!(ch.h_min() > 0.0)) throw ConfigError("h_min <= 0");
    if (!(ch.h_min() < ch.h_max())) throw ConfigError("h_min >= h_max");
    for (double v : ch.values()) {
        if (!(v >= 0.0)) throw ConfigError("negative channel density");
        if (!std::isfinite(v)) throw ConfigError("channel density unbounded");
    }
    if (std::abs(ch.mass(ch.h_min(), ch.h_max()) - 1.0) > kProbTol)
        throw ConfigError("channel density does not integrate to 1");

    const int arrivals = cfg.max_arrivals();
    if (cfg.max_rate < arrivals) throw ConfigError("S_max < A");
    if (cfg.buffer_size < arrivals) throw ConfigError("Q < A");
    if (static_cast<int>(cfg.energy.size()) != cfg.num_rates())
        throw ConfigError("xi must have S_max + 1 entries");
    if (!(cfg.energy[0] >= 0.0)) throw ConfigError("xi(0) < 0");
    for (int s = 1; s <= cfg.max_rate; ++s)
        if (!(cfg.energy[s] > cfg.energy[s - 1])) throw ConfigError("xi not strictly increasing");
    return cfg;
}

std::vector<double> exp2_minus_one_energy(int max_rate) {
    std::vector<double> xi(static_cast<size_t>(max_rate + 1));
    for (int s = 0; s <= max_rate; ++s) xi[s] = std::ldexp(1.0, s) - 1.0;
    return xi;
}

SystemConfig builtin_config(const std::string& name) {
    if (name != "paper_iv") throw ConfigError("unknown built-in config: " + name);
    SystemConfig cfg;
    cfg.arrival.alphas = {0.4, 0.3, 0.3};
    cfg.channel = ChannelModel::uniform(0.5, 10.0);
    cfg.buffer_size = 10;
    cfg.max_rate = 2;
    cfg.energy = exp2_minus_one_energy(cfg.max_rate);
    return cfg;
}

int ChannelDiscretization::bin_of(double h) const {
    const auto it = std::lower_bound(edges.begin() + 1, edges.end() - 1, h);
    return static_cast<int>(it - edges.begin() - 1);
}

ChannelDiscretization discretize_channel(const ChannelModel& channel, int bins) {
    if (bins < 1) throw ConfigError("bin count must be >= 1");
    ChannelDiscretization disc;
    const double lo = channel.h_min();
    const double span = channel.h_max() - lo;
    disc.edges.resize(static_cast<size_t>(bins) + 1);
    for (int k = 0; k <= bins; ++k) disc.edges[k] = lo + span * k / bins;
    disc.edges.back() = channel.h_max();
    for (int k = 0; k < bins; ++k) {
        const double p = channel.mass(disc.edges[k], disc.edges[k + 1]);
        if (!(p > 0.0)) throw ConfigError("empty channel bin");
        disc.mass.push_back(p);
        disc.inv_mean.push_back(channel.inverse_moment(disc.edges[k], disc.edges[k + 1]) / p);
    }
    return disc;
}

double channel_cdf_inverse(const ChannelModel& channel, double u) {
    const auto& breaks = channel.breaks();
    const auto& values = channel.values();
    double cum = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        if (u <= cum) return breaks[i];
        const double piece = values[i] * (breaks[i + 1] - breaks[i]);
        if (piece > 0.0 && u <= cum + piece)
            return std::min(breaks[i] + (u - cum) / values[i], breaks[i + 1]);
        cum += piece;
    }
    return channel.h_max();
}

}  // namespace detsched
