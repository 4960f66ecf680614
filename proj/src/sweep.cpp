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

#include "detsched/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace detsched {

std::vector<double> default_grid(const SystemConfig& cfg, const ChannelDiscretization& disc, int points) {
    const double lo = min_delay(cfg, disc);
    const double hi = 3.0 * lo;
    std::vector<double> grid;
    if (points <= 1 || hi <= lo) return {lo};
    for (int i = 0; i < points; ++i) grid.push_back(lo + (hi - lo) * i / (points - 1));
    grid.back() = hi;
    return grid;
}

double default_lambda_max(const SystemConfig& cfg) {
    return 1e4 * cfg.energy.back() / cfg.channel.h_min();
}

TradeoffCurve sweep_curve(const SystemConfig& cfg, const ChannelDiscretization& disc,
                          const std::vector<double>& grid, const LpOptions& options) {
    if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("grid must be sorted");
    TradeoffCurve curve;
    curve.bins = disc.bins();
    if (!grid.empty()) {
        curve.window_lo = grid.front();
        curve.window_hi = grid.back();
    }
    for (double d : grid) {
        const auto sol = solve_constrained(cfg, disc, d, options);
        if (sol.status == LpStatus::kOptimal) {
            curve.points.push_back({d, sol.objective});
        } else {
            std::ostringstream note;
            note << "D_th=" << d << " excluded: " << to_string(sol.status);
            curve.notes.push_back(note.str());
        }
    }
    if (curve.points.empty()) throw std::runtime_error("empty curve");

    const auto& p = curve.points;
    for (size_t i = 1; i < p.size(); ++i)
        if (p[i].power > p[i - 1].power + 1e-8) curve.nonincreasing = false;
    for (size_t i = 2; i < p.size(); ++i) {
        const double s1 = (p[i - 1].power - p[i - 2].power) / (p[i - 1].delay_bound - p[i - 2].delay_bound);
        const double s2 = (p[i].power - p[i - 1].power) / (p[i].delay_bound - p[i - 1].delay_bound);
        if (s2 < s1 - 1e-6) curve.convex = false;
    }
    if (!curve.nonincreasing) curve.notes.push_back("check failed: P* increases along the grid");
    if (!curve.convex) curve.notes.push_back("check failed: P* not convex along the grid");
    return curve;
}

namespace {

Vertex to_vertex(LagrangianSolution&& s) {
    Vertex v;
    v.delay = s.metrics.delay;
    v.power = s.metrics.power;
    v.weight = s.weight;
    v.policy = std::move(s.policy);
    return v;
}

class Enumerator {
  public:
    Enumerator(const SystemConfig& cfg, const ChannelDiscretization& disc, double tol, const LpOptions& options)
        : cfg_(cfg), disc_(disc), tol_(tol), options_(options) {}

    Vertex solve(double lambda) {
        auto s = solve_lagrangian(cfg_, disc_, lambda, options_);
        if (s.status != LpStatus::kOptimal)
            throw std::runtime_error("lagrangian solve at lambda=" + std::to_string(lambda) + " returned " +
                                     to_string(s.status));
        return to_vertex(std::move(s));
    }

    // a has the larger delay (smaller weight).
    void split(const Vertex& a, const Vertex& b, std::vector<Vertex>& out, int depth = 0) {
        if (same(a, b) || depth > 200) return;
        const double dd = a.delay - b.delay;
        if (dd <= tol_) return;
        const double lx = (b.power - a.power) / dd;
        Vertex c = solve(lx);
        const double line = a.power + lx * a.delay;
        const double value = c.power + lx * c.delay;
        if (value >= line - tol_ * std::max(1.0, std::abs(line)) || same(c, a) || same(c, b)) return;
        split(a, c, out, depth + 1);
        out.push_back(c);
        split(c, b, out, depth + 1);
    }

  private:
    bool same(const Vertex& u, const Vertex& v) const {
        return std::abs(u.delay - v.delay) <= tol_ * std::max(1.0, std::abs(u.delay)) &&
               std::abs(u.power - v.power) <= tol_ * std::max(1.0, std::abs(u.power));
    }

    const SystemConfig& cfg_;
    const ChannelDiscretization& disc_;
    double tol_;
    LpOptions options_;
};

// Removes repeats, flat steps and collinear interior points from a
// delay-sorted chain so only corners remain.
std::vector<Vertex> corners(std::vector<Vertex> v, double tol) {
    std::vector<Vertex> out;
    for (auto& x : v) {
        if (!out.empty()) {
            const auto& last = out.back();
            if (x.delay <= last.delay + tol) {
                if (x.power < last.power) out.back() = std::move(x);
                continue;
            }
            if (x.power >= last.power - tol) continue;  // flat tail: no further gain from more delay
        }
        out.push_back(std::move(x));
    }
    bool changed = true;
    while (changed && out.size() > 2) {
        changed = false;
        for (size_t i = 1; i + 1 < out.size(); ++i) {
            const auto& a = out[i - 1];
            const auto& b = out[i];
            const auto& c = out[i + 1];
            const double t = (b.delay - a.delay) / (c.delay - a.delay);
            const double on_line = a.power + t * (c.power - a.power);
            if (std::abs(b.power - on_line) <= tol * std::max(1.0, std::abs(on_line))) {
                out.erase(out.begin() + static_cast<long>(i));
                changed = true;
                break;
            }
        }
    }
    return out;
}

}  // namespace

std::vector<Vertex> enumerate_vertices(const SystemConfig& cfg, const ChannelDiscretization& disc,
                                       double lambda_max, double tol, const LpOptions& options) {
    if (!(lambda_max > 0.0)) throw std::invalid_argument("lambda_max must be positive");
    Enumerator e(cfg, disc, tol, options);
    Vertex lo = e.solve(0.0);
    Vertex hi = e.solve(lambda_max);
    const double dmin = min_delay(cfg, disc, options);
    if (hi.delay > dmin + 1e-7 * std::max(1.0, dmin)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "lambda_max=" << lambda_max << " reaches delay " << hi.delay << " but D_min is " << dmin
            << "; raise lambda_max";
        throw VertexError(msg.str());
    }
    std::vector<Vertex> inner;
    e.split(lo, hi, inner);

    std::vector<Vertex> all;
    all.push_back(std::move(hi));
    for (auto it = inner.rbegin(); it != inner.rend(); ++it) all.push_back(std::move(*it));
    all.push_back(std::move(lo));
    std::stable_sort(all.begin(), all.end(), [](const Vertex& a, const Vertex& b) { return a.delay < b.delay; });
    auto out = corners(std::move(all), std::max(tol, 1e-9));

    for (const auto& v : out) {
        if (v.policy.kind() != PolicyKind::kDeterministic) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "randomized policy at vertex (D=" << v.delay << ", P=" << v.power << ")";
            const auto& p = v.policy;
            for (int q = 0; q < p.num_queue_states(); ++q)
                for (int k = 0; k < p.bins(); ++k) {
                    if (p.transient(q, k)) continue;
                    for (int s = 0; s < p.num_rates(); ++s) {
                        const double f = p.prob(q, k, s);
                        if (f > 1e-9 && f < 1.0 - 1e-9) {
                            msg << ": witness q=" << q << " k=" << k << " s=" << s << " f=" << f;
                            throw VertexError(msg.str());
                        }
                    }
                }
            throw VertexError(msg.str());
        }
    }
    return out;
}

std::vector<VertexDistance> vertex_distances(const std::vector<Vertex>& v) {
    std::vector<VertexDistance> out;
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        const double dd = v[i + 1].delay - v[i].delay;
        const double dp = v[i + 1].power - v[i].power;
        out.push_back({std::hypot(dd, dp), std::abs(dd)});
    }
    return out;
}

void attach_vertices(TradeoffCurve& curve, const std::vector<Vertex>& all, double lo, double hi, double tol) {
    curve.window_lo = lo;
    curve.window_hi = hi;
    curve.vertices.clear();
    for (const auto& v : all)
        if (v.delay >= lo - tol && v.delay <= hi + tol) curve.vertices.push_back(v);
    curve.distances = vertex_distances(curve.vertices);
}

double interpolate_vertices(const std::vector<Vertex>& v, double d) {
    if (v.empty() || d < v.front().delay || d > v.back().delay) return std::numeric_limits<double>::quiet_NaN();
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        if (d <= v[i + 1].delay) {
            const double t = (d - v[i].delay) / (v[i + 1].delay - v[i].delay);
            return v[i].power + t * (v[i + 1].power - v[i].power);
        }
    }
    return v.back().power;
}

ConvergenceStudy convergence_study(const SystemConfig& cfg, const std::vector<int>& bins_list,
                                   const std::vector<double>& grid, const LpOptions& options) {
    if (!std::is_sorted(bins_list.begin(), bins_list.end())) throw std::invalid_argument("bins list must be increasing");
    ConvergenceStudy study;
    for (int m : bins_list) study.curves.push_back(sweep_curve(cfg, discretize_channel(cfg.channel, m), grid, options));

    const auto as_map = [](const TradeoffCurve& c) {
        std::map<double, double> m;
        for (const auto& p : c.points) m[p.delay_bound] = p.power;
        return m;
    };
    double worst = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < study.curves.size(); ++i) {
        const auto coarse = as_map(study.curves[i]);
        for (size_t j = i + 1; j < study.curves.size(); ++j) {
            if (bins_list[j] % bins_list[i] != 0) continue;
            for (const auto& p : study.curves[j].points) {
                const auto it = coarse.find(p.delay_bound);
                if (it != coarse.end()) worst = std::max(worst, p.power - it->second);
            }
        }
    }
    study.dominance_violation = std::isfinite(worst) ? worst : 0.0;

    for (size_t i = 0; i + 1 < study.curves.size(); ++i) {
        const auto a = as_map(study.curves[i]);
        double gap = 0.0;
        for (const auto& p : study.curves[i + 1].points) {
            const auto it = a.find(p.delay_bound);
            if (it != a.end()) gap = std::max(gap, std::abs(it->second - p.power));
        }
        study.sup_gaps.push_back(gap);
    }
    return study;
}

}  // namespace detsched
