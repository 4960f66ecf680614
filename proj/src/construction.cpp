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

#include "detsched/construction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace detsched {

namespace {

constexpr double kMassTol = 1e-12;

}  // namespace

PiecewiseDensity::PiecewiseDensity(SystemConfig cfg, std::vector<double> breaks)
    : cfg_(std::move(cfg)), breaks_(std::move(breaks)) {
    if (breaks_.size() < 2) throw std::invalid_argument("density needs at least one piece");
    values_.assign(static_cast<size_t>(cfg_.num_queue_states()) * cfg_.num_rates() * pieces(), 0.0);
}

int PiecewiseDensity::piece_of(double h) const {
    const auto it = std::lower_bound(breaks_.begin() + 1, breaks_.end() - 1, h);
    return static_cast<int>(it - breaks_.begin() - 1);
}

double PiecewiseDensity::at(int q, int s, double h) const {
    if (h <= h_min() || h > h_max()) return 0.0;
    return value(q, s, piece_of(h));
}

double PiecewiseDensity::total(int q, double h) const {
    if (h <= h_min() || h > h_max()) return 0.0;
    const int i = piece_of(h);
    double sum = 0.0;
    for (int s = 0; s < cfg_.num_rates(); ++s) sum += value(q, s, i);
    return sum;
}

double PiecewiseDensity::mass(int q, int s, double a, double b) const {
    double out = 0.0;
    for (int i = 0; i < pieces(); ++i) {
        const double lo = std::max(a, breaks_[i]);
        const double hi = std::min(b, breaks_[i + 1]);
        if (hi <= lo) continue;
        double v = 0.0;
        if (s >= 0) {
            v = value(q, s, i);
        } else {
            for (int r = 0; r < cfg_.num_rates(); ++r) v += value(q, r, i);
        }
        out += v * (hi - lo);
    }
    return out;
}

double PiecewiseDensity::inverse_moment(int q, int s, double a, double b) const {
    double out = 0.0;
    for (int i = 0; i < pieces(); ++i) {
        const double lo = std::max(a, breaks_[i]);
        const double hi = std::min(b, breaks_[i + 1]);
        if (hi <= lo) continue;
        double v = 0.0;
        if (s >= 0) {
            v = value(q, s, i);
        } else {
            for (int r = 0; r < cfg_.num_rates(); ++r) v += value(q, r, i);
        }
        if (v != 0.0) out += v * std::log(hi / lo);
    }
    return out;
}

PiecewiseDensity density_from_measure(const OccupancyMeasure& m) {
    const auto& cfg = m.config();
    const auto& disc = m.discretization();
    std::vector<double> breaks = disc.edges;
    breaks.insert(breaks.end(), cfg.channel.breaks().begin(), cfg.channel.breaks().end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    PiecewiseDensity d(cfg, breaks);
    for (int i = 0; i < d.pieces(); ++i) {
        const double mid = 0.5 * (breaks[i] + breaks[i + 1]);
        const int k = disc.bin_of(mid);
        const double share = cfg.channel.density(mid) / disc.mass[k];
        for (int q = 0; q < cfg.num_queue_states(); ++q)
            for (int s = 0; s < cfg.num_rates(); ++s) d.value(q, s, i) = m.at(q, s, k) * share;
    }
    return d;
}

double CdfEnvelope::operator()(double h) const {
    if (h <= x.front()) return u.front();
    if (h >= x.back()) return u.back();
    const auto it = std::upper_bound(x.begin(), x.end(), h);
    const size_t i = static_cast<size_t>(it - x.begin()) - 1;
    const double t = (h - x[i]) / (x[i + 1] - x[i]);
    return u[i] + t * (u[i + 1] - u[i]);
}

CdfEnvelope compute_envelope(const PiecewiseDensity& d, int q) {
    CdfEnvelope U;
    U.x = d.breaks();
    U.u.assign(U.x.size(), 0.0);
    for (int i = 0; i < d.pieces(); ++i) {
        double rate_sum = 0.0;
        for (int s = 0; s < d.config().num_rates(); ++s) rate_sum += d.value(q, s, i);
        U.u[i + 1] = U.u[i] + rate_sum * (U.x[i + 1] - U.x[i]);
    }
    return U;
}

double invert_envelope(const CdfEnvelope& U, double v) {
    if (v > U.total() + kMassTol) throw std::domain_error("mass out of range");
    // The tolerance only picks the segment; inside a segment the solve is
    // exact so that stretch masses come out right even where U is shallow.
    for (size_t i = 0; i + 1 < U.x.size(); ++i) {
        if (U.u[i] >= v - kMassTol) return U.x[i];
        if (U.u[i + 1] >= v - kMassTol) {
            const double slope = (U.u[i + 1] - U.u[i]) / (U.x[i + 1] - U.x[i]);
            const double x = U.x[i] + (v - U.u[i]) / slope;
            return std::clamp(x, U.x[i], U.x[i + 1]);
        }
    }
    return U.x.back();
}

Thresholds::Thresholds(int queue_states, int rates, int cells, double h_min, double h_max)
    : rates_(rates), cells_(cells), h_min_(h_min), h_max_(h_max) {
    upper_.assign(static_cast<size_t>(queue_states) * cells * rates, 0.0);
}

double Thresholds::cell_min(int k) const {
    return k == 0 ? h_min_ : h_min_ + (h_max_ - h_min_) * k / cells_;
}

double Thresholds::cell_max(int k) const {
    return k + 1 == cells_ ? h_max_ : h_min_ + (h_max_ - h_min_) * (k + 1) / cells_;
}

Thresholds compute_thresholds(const PiecewiseDensity& d, int cells) {
    if (cells < 1) throw std::invalid_argument("cell count must be >= 1");
    const auto& cfg = d.config();
    Thresholds t(cfg.num_queue_states(), cfg.num_rates(), cells, d.h_min(), d.h_max());
    for (int q = 0; q < cfg.num_queue_states(); ++q) {
        const CdfEnvelope U = compute_envelope(d, q);
        for (int k = 0; k < cells; ++k) {
            const double lo = t.cell_min(k);
            const double hi = t.cell_max(k);
            double target = U(lo);
            double prev = lo;
            for (int s = 0; s < cfg.num_rates(); ++s) {
                target += d.mass(q, s, lo, hi);
                double x = s == cfg.max_rate ? hi : invert_envelope(U, std::min(target, U.total()));
                x = std::clamp(x, prev, hi);
                t.upper(q, k, s) = x;
                prev = x;
            }
        }
    }
    return t;
}

double ConstructedSolution::value(int q, int s, double h) const {
    for (const auto& iv : intervals[q])
        if (iv.rate == s && iv.lo < h && h <= iv.hi) return source.total(q, h);
    return 0.0;
}

double ConstructedSolution::rate_mass(int q, int s) const {
    double total = 0.0;
    for (const auto& iv : intervals[q])
        if (iv.rate == s && iv.hi > iv.lo) total += source.mass(q, -1, iv.lo, iv.hi);
    return total;
}

ConstructedSolution construct_yM(const PiecewiseDensity& d, int cells) {
    ConstructedSolution y;
    y.cells = cells;
    y.source = d;
    y.thresholds = compute_thresholds(d, cells);
    const auto& cfg = d.config();
    y.intervals.resize(cfg.num_queue_states());
    for (int q = 0; q < cfg.num_queue_states(); ++q) {
        auto& list = y.intervals[q];
        list.reserve(static_cast<size_t>(cells) * cfg.num_rates());
        for (int k = 0; k < cells; ++k)
            for (int s = 0; s < cfg.num_rates(); ++s)
                list.push_back({y.thresholds.lower(q, k, s), y.thresholds.upper(q, k, s), s, k});
    }
    return y;
}

ConstructedSolution source_as_solution(const PiecewiseDensity& d) {
    ConstructedSolution y;
    y.cells = d.pieces();
    y.source = d;
    const auto& cfg = d.config();
    y.thresholds = Thresholds(cfg.num_queue_states(), cfg.num_rates(), d.pieces(), d.h_min(), d.h_max());
    y.intervals.resize(cfg.num_queue_states());
    for (int q = 0; q < cfg.num_queue_states(); ++q) {
        for (int i = 0; i < d.pieces(); ++i) {
            for (int s = 0; s < cfg.num_rates(); ++s) {
                if (d.value(q, s, i) > 0.0) y.intervals[q].push_back({d.breaks()[i], d.breaks()[i + 1], s, i});
                y.thresholds.upper(q, i, s) = d.breaks()[i + 1];
            }
        }
    }
    return y;
}

double density_power(const PiecewiseDensity& d) {
    const auto& cfg = d.config();
    double power = 0.0;
    for (int q = 0; q < cfg.num_queue_states(); ++q)
        for (int s = 0; s < cfg.num_rates(); ++s)
            power += cfg.energy[s] * d.inverse_moment(q, s, d.h_min(), d.h_max());
    return power;
}

double density_delay(const PiecewiseDensity& d) {
    const auto& cfg = d.config();
    const double abar = mean_arrival_rate(cfg.arrival);
    if (abar == 0.0) return 0.0;
    double queue = 0.0;
    for (int q = 0; q < cfg.num_queue_states(); ++q) queue += q * d.mass(q, -1, d.h_min(), d.h_max());
    return queue / abar;
}

FeasibilityReport verify_feasibility(const ConstructedSolution& y, int samples,
                                     std::optional<double> delay_bound) {
    const auto& d = y.source;
    const auto& cfg = d.config();
    const int nq = cfg.num_queue_states();
    const int ns = cfg.num_rates();
    FeasibilityReport r;
    r.samples = samples;

    // Channel marginal at stratified midpoints.
    const double span = d.h_max() - d.h_min();
    for (int j = 0; j < samples; ++j) {
        const double h = d.h_min() + span * (j + 0.5) / samples;
        double sum = 0.0;
        for (int q = 0; q < nq; ++q)
            for (const auto& iv : y.intervals[q])
                if (iv.lo < h && h <= iv.hi) sum += d.total(q, h);
        r.channel_marginal = std::max(r.channel_marginal, std::abs(sum - cfg.channel.density(h)));
    }

    std::vector<std::vector<double>> ymass(nq, std::vector<double>(ns, 0.0));
    double total = 0.0, queue = 0.0;
    for (int q = 0; q < nq; ++q) {
        for (int s = 0; s < ns; ++s) {
            ymass[q][s] = y.rate_mass(q, s);
            total += ymass[q][s];
            queue += q * ymass[q][s];
            const double dmass = d.mass(q, s, d.h_min(), d.h_max());
            r.rate_preservation = std::max(r.rate_preservation, std::abs(ymass[q][s] - dmass));
            if (!cfg.admissible(q, s)) r.structural_zeros = std::max(r.structural_zeros, std::abs(ymass[q][s]));
        }
    }
    r.total_mass_error = std::abs(total - 1.0);

    for (int q = 0; q < nq; ++q) {
        double inflow = 0.0, stay = 0.0;
        for (int s = 0; s < ns; ++s) {
            stay += ymass[q][s];
            for (int a = 0; a <= cfg.max_arrivals(); ++a) {
                const int from = q + s - a;
                if (from >= 0 && from < nq) inflow += cfg.arrival.alphas[a] * ymass[from][s];
            }
        }
        r.queue_balance = std::max(r.queue_balance, std::abs(inflow - stay));
    }

    const double abar = mean_arrival_rate(cfg.arrival);
    r.delay = abar > 0.0 ? queue / abar : 0.0;
    r.delay_match = std::abs(r.delay - density_delay(d));
    if (delay_bound) r.delay_excess = std::max(0.0, r.delay - *delay_bound);

    for (int q = 0; q < nq; ++q)
        for (int s = 0; s < ns; ++s)
            for (int i = 0; i < d.pieces(); ++i) r.nonnegativity = std::max(r.nonnegativity, -d.value(q, s, i));
    for (int q = 0; q < nq; ++q) {
        for (const auto& iv : y.intervals[q]) r.nonnegativity = std::max(r.nonnegativity, iv.lo - iv.hi);

        std::vector<RateInterval> live;
        for (const auto& iv : y.intervals[q])
            if (iv.hi > iv.lo) live.push_back(iv);
        std::sort(live.begin(), live.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
        if (live.empty()) {
            r.partition = std::max(r.partition, span);
            continue;
        }
        r.partition = std::max(r.partition, std::abs(live.front().lo - d.h_min()));
        for (size_t i = 1; i < live.size(); ++i)
            r.partition = std::max(r.partition, std::abs(live[i].lo - live[i - 1].hi));
        r.partition = std::max(r.partition, std::abs(live.back().hi - d.h_max()));

        for (int k = 0; k < y.thresholds.cells(); ++k)
            r.telescoping = std::max(r.telescoping,
                                     std::abs(y.thresholds.upper(q, k, cfg.max_rate) - y.thresholds.cell_max(k)));
    }
    return r;
}

DeterminismReport verify_deterministic(const ConstructedSolution& y, int samples) {
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    const auto& d = y.source;
    const int nq = d.config().num_queue_states();
    DeterminismReport rep;

    const auto check_point = [&](int q, double h) {
        ++rep.points_checked;
        if (d.total(q, h) <= 0.0) return;
        int first = -1;
        for (const auto& iv : y.intervals[q]) {
            if (!(iv.lo < h && h <= iv.hi)) continue;
            if (first < 0) {
                first = iv.rate;
            } else if (iv.rate != first) {
                rep.sampled_ok = false;
                if (!rep.witness) rep.witness = DeterminismWitness{q, h, first, iv.rate};
                return;
            }
        }
    };
    const double span = d.h_max() - d.h_min();
    for (int q = 0; q < nq; ++q) {
        for (int j = 0; j < samples; ++j) check_point(q, d.h_min() + span * (j + 0.5) / samples);
        for (const auto& iv : y.intervals[q])
            if (iv.hi > iv.lo) check_point(q, 0.5 * (iv.lo + iv.hi));
    }

    // Exact: no two nonempty intervals with different rates may share a
    // stretch of positive density.
    for (int q = 0; q < nq; ++q) {
        std::vector<RateInterval> live;
        for (const auto& iv : y.intervals[q])
            if (iv.hi > iv.lo) live.push_back(iv);
        std::sort(live.begin(), live.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
        for (size_t i = 0; i < live.size() && rep.exact_ok; ++i) {
            for (size_t j = i + 1; j < live.size() && live[j].lo < live[i].hi - 1e-12; ++j) {
                if (live[j].rate == live[i].rate) continue;
                const double lo = live[j].lo;
                const double hi = std::min(live[i].hi, live[j].hi);
                if (d.mass(q, -1, lo, hi) <= 0.0) continue;
                rep.exact_ok = false;
                if (!rep.witness) rep.witness = DeterminismWitness{q, 0.5 * (lo + hi), live[i].rate, live[j].rate};
                break;
            }
        }
    }
    rep.deterministic = rep.sampled_ok && rep.exact_ok;
    return rep;
}

PowerRatio power_ratio(const ConstructedSolution& y, const PiecewiseDensity& d) {
    const auto& cfg = d.config();
    PowerRatio out;
    for (int q = 0; q < cfg.num_queue_states(); ++q)
        for (const auto& iv : y.intervals[q])
            if (iv.hi > iv.lo) out.constructed += cfg.energy[iv.rate] * y.source.inverse_moment(q, -1, iv.lo, iv.hi);
    out.source = density_power(d);
    out.ratio = out.source > 0.0 ? out.constructed / out.source : 1.0;
    out.bound = 1.0 + (d.h_max() - d.h_min()) / (y.cells * d.h_min());
    out.within_bound = out.ratio >= 1.0 - 1e-10 && out.ratio <= out.bound + 1e-10;
    return out;
}

int ThresholdPolicy::rate(int q, double h) const {
    const auto& list = rules[q];
    const auto it = std::lower_bound(list.begin(), list.end(), h,
                                     [](const ThresholdRule& r, double v) { return r.hi < v; });
    return it == list.end() ? list.back().rate : it->rate;
}

ThresholdPolicy yM_to_policy(const ConstructedSolution& y) {
    const auto rep = verify_deterministic(y, 1000);
    if (!rep.deterministic) {
        const auto& w = *rep.witness;
        std::ostringstream msg;
        msg << "construction is not deterministic: q=" << w.queue << " h=" << w.h << " rates " << w.rate_a
            << " and " << w.rate_b;
        throw DeterminismError(msg.str(), w);
    }
    const auto& d = y.source;
    const auto& cfg = d.config();
    ThresholdPolicy pol;
    pol.h_min = d.h_min();
    pol.h_max = d.h_max();
    pol.rules.resize(cfg.num_queue_states());
    pol.transient.assign(cfg.num_queue_states(), 0);
    for (int q = 0; q < cfg.num_queue_states(); ++q) {
        if (d.mass(q, -1, d.h_min(), d.h_max()) <= kMassTol) {
            pol.transient[q] = 1;
            pol.rules[q].push_back({d.h_min(), d.h_max(), std::min(q, cfg.max_rate)});
            continue;
        }
        for (const auto& iv : y.intervals[q]) {
            if (!(iv.hi > iv.lo)) continue;
            auto& list = pol.rules[q];
            if (!list.empty() && list.back().rate == iv.rate && list.back().hi == iv.lo)
                list.back().hi = iv.hi;
            else
                list.push_back({iv.lo, iv.hi, iv.rate});
        }
    }
    return pol;
}

}  // namespace detsched
