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

#include "detsched/occupancy.hpp"

#include "detsched/markov.hpp"

#include <algorithm>
#include <cmath>

namespace detsched {

namespace {

// Rows whose total mass falls below this are treated as unvisited.
constexpr double kTransientMass = 1e-12;

}  // namespace

OccupancyMeasure::OccupancyMeasure(SystemConfig cfg, ChannelDiscretization disc)
    : cfg_(std::move(cfg)), disc_(std::move(disc)) {
    values_.assign(static_cast<size_t>(cfg_.num_queue_states()) * cfg_.num_rates() * disc_.bins(), 0.0);
}

double OccupancyMeasure::cell_mass(int q, int k) const {
    double total = 0.0;
    for (int s = 0; s < cfg_.num_rates(); ++s) total += at(q, s, k);
    return total;
}

double OccupancyMeasure::queue_mass(int q) const {
    double total = 0.0;
    for (int k = 0; k < disc_.bins(); ++k) total += cell_mass(q, k);
    return total;
}

double OccupancyMeasure::rate_mass(int q, int s) const {
    double total = 0.0;
    for (int k = 0; k < disc_.bins(); ++k) total += at(q, s, k);
    return total;
}

Metrics evaluate_measure(const OccupancyMeasure& m) {
    const auto& cfg = m.config();
    const auto& disc = m.discretization();
    const double abar = mean_arrival_rate(cfg.arrival);
    Metrics out;
    double queue = 0.0;
    for (int q = 0; q < cfg.num_queue_states(); ++q) {
        for (int s = 0; s < cfg.num_rates(); ++s) {
            for (int k = 0; k < disc.bins(); ++k) {
                const double g = m.at(q, s, k);
                queue += q * g;
                out.power += cfg.energy[s] * disc.inv_mean[k] * g;
            }
        }
    }
    out.delay = abar > 0.0 ? queue / abar : 0.0;
    return out;
}

double measure_residual(const OccupancyMeasure& m) {
    const auto& cfg = m.config();
    const auto& disc = m.discretization();
    const int nq = cfg.num_queue_states();
    double worst = 0.0;
    for (int q = 0; q < nq; ++q)
        for (int s = 0; s < cfg.num_rates(); ++s)
            for (int k = 0; k < disc.bins(); ++k) {
                const double g = m.at(q, s, k);
                worst = std::max(worst, -g);
                if (!cfg.admissible(q, s)) worst = std::max(worst, std::abs(g));
            }
    for (int k = 0; k < disc.bins(); ++k) {
        double total = 0.0;
        for (int q = 0; q < nq; ++q) total += m.cell_mass(q, k);
        worst = std::max(worst, std::abs(total - disc.mass[k]));
    }
    for (int q = 0; q < nq; ++q) {
        double inflow = 0.0;
        for (int a = 0; a <= cfg.max_arrivals(); ++a)
            for (int s = 0; s < cfg.num_rates(); ++s) {
                const int from = q + s - a;
                if (from >= 0 && from < nq) inflow += cfg.arrival.alphas[a] * m.rate_mass(from, s);
            }
        worst = std::max(worst, std::abs(inflow - m.queue_mass(q)));
        const double pq = m.queue_mass(q);
        for (int k = 0; k < disc.bins(); ++k)
            worst = std::max(worst, std::abs(m.cell_mass(q, k) - disc.mass[k] * pq));
    }
    return worst;
}

BinPolicy::BinPolicy(const SystemConfig& cfg, ChannelDiscretization disc)
    : queue_states_(cfg.num_queue_states()), rates_(cfg.num_rates()), disc_(std::move(disc)) {
    prob_.assign(static_cast<size_t>(queue_states_) * disc_.bins() * rates_, 0.0);
    transient_.assign(static_cast<size_t>(queue_states_) * disc_.bins(), 0);
}

BinPolicy BinPolicy::deterministic(const SystemConfig& cfg, ChannelDiscretization disc,
                                   const std::vector<std::vector<int>>& actions) {
    BinPolicy pol(cfg, std::move(disc));
    for (int q = 0; q < pol.num_queue_states(); ++q)
        for (int k = 0; k < pol.bins(); ++k) pol.prob(q, k, actions[q][k]) = 1.0;
    pol.set_kind(PolicyKind::kDeterministic);
    return pol;
}

int BinPolicy::action(int q, int k) const {
    int best = 0;
    for (int s = 1; s < rates_; ++s)
        if (prob(q, k, s) > prob(q, k, best)) best = s;
    return best;
}

bool BinPolicy::one_hot(double tol) const {
    for (int q = 0; q < queue_states_; ++q)
        for (int k = 0; k < bins(); ++k)
            if (!transient(q, k) && prob(q, k, action(q, k)) < 1.0 - tol) return false;
    return true;
}

BinPolicy extract_policy(const OccupancyMeasure& m) {
    const auto& cfg = m.config();
    BinPolicy pol(cfg, m.discretization());
    bool one_hot = true;
    for (int q = 0; q < cfg.num_queue_states(); ++q) {
        for (int k = 0; k < pol.bins(); ++k) {
            const double denom = m.cell_mass(q, k);
            if (denom <= kTransientMass) {
                pol.set_transient(q, k, true);
                pol.prob(q, k, std::min(q, cfg.max_rate)) = 1.0;
                continue;
            }
            double top = 0.0;
            for (int s = 0; s < cfg.num_rates(); ++s) {
                pol.prob(q, k, s) = m.at(q, s, k) / denom;
                top = std::max(top, m.at(q, s, k));
            }
            // Rare rows carry absolute LP noise that is large relative to
            // their mass, hence the second test.
            const double off = denom - top;
            if (off > 1e-9 * denom && off > kOneHotMass) one_hot = false;
        }
    }
    if (one_hot) {
        // Snap numerically one-hot rows to exact indicators.
        for (int q = 0; q < cfg.num_queue_states(); ++q) {
            for (int k = 0; k < pol.bins(); ++k) {
                const int s_star = pol.action(q, k);
                for (int s = 0; s < cfg.num_rates(); ++s) pol.prob(q, k, s) = s == s_star ? 1.0 : 0.0;
            }
        }
        pol.set_kind(PolicyKind::kDeterministic);
    }
    return pol;
}

OccupancyMeasure policy_to_measure(const SystemConfig& cfg, const ChannelDiscretization& disc,
                                   const BinPolicy& policy) {
    const int nq = cfg.num_queue_states();
    std::vector<std::vector<double>> rate_probs(nq, std::vector<double>(cfg.num_rates(), 0.0));
    for (int q = 0; q < nq; ++q)
        for (int k = 0; k < disc.bins(); ++k)
            for (int s = 0; s < cfg.num_rates(); ++s) rate_probs[q][s] += disc.mass[k] * policy.prob(q, k, s);
    const auto pi = stationary_distribution(queue_transitions(cfg, rate_probs));
    OccupancyMeasure m(cfg, disc);
    for (int q = 0; q < nq; ++q)
        for (int s = 0; s < cfg.num_rates(); ++s)
            for (int k = 0; k < disc.bins(); ++k) m.at(q, s, k) = pi[q] * disc.mass[k] * policy.prob(q, k, s);
    return m;
}

OccupancyLp build_weighted_lp(const SystemConfig& cfg, const ChannelDiscretization& disc,
                              double power_weight, double delay_weight, double delay_bound,
                              const LpOptions& options) {
    const int nq = cfg.num_queue_states();
    const int ns = cfg.num_rates();
    const int nb = disc.bins();
    const double abar = mean_arrival_rate(cfg.arrival);

    OccupancyLp model;
    std::vector<int> column(static_cast<size_t>(nq) * ns * nb, -1);
    const auto col = [&](int q, int s, int k) -> int {
        if (q < 0 || q >= nq || s < 0 || s >= ns) return -1;
        return column[(static_cast<size_t>(q) * ns + s) * nb + k];
    };
    for (int q = 0; q < nq; ++q)
        for (int s = 0; s < ns; ++s)
            for (int k = 0; k < nb; ++k)
                if (cfg.admissible(q, s)) {
                    column[(static_cast<size_t>(q) * ns + s) * nb + k] = static_cast<int>(model.cells.size());
                    model.cells.push_back({q, s, k});
                }

    auto& lp = model.lp;
    const int nv = static_cast<int>(model.cells.size());
    lp.num_vars = nv;
    lp.objective.assign(nv, 0.0);
    for (int j = 0; j < nv; ++j) {
        const auto [q, s, k] = model.cells[j];
        lp.objective[j] = power_weight * cfg.energy[s] * disc.inv_mean[k];
        if (abar > 0.0) lp.objective[j] += delay_weight * q / abar;
    }

    if (std::isfinite(delay_bound) && abar > 0.0) {
        std::vector<double> row(nv, 0.0);
        for (int j = 0; j < nv; ++j) row[j] = model.cells[j][0] / abar;
        model.delay_row = lp.add_row(std::move(row), RowSense::kLessEqual, delay_bound);
    }

    model.first_mass_row = static_cast<int>(lp.rows.size());
    for (int k = 0; k < nb; ++k) {
        std::vector<double> row(nv, 0.0);
        for (int j = 0; j < nv; ++j)
            if (model.cells[j][2] == k) row[j] = 1.0;
        lp.add_row(std::move(row), RowSense::kEqual, disc.mass[k]);
    }

    model.first_balance_row = static_cast<int>(lp.rows.size());
    for (int q = 0; q < nq; ++q) {
        std::vector<double> row(nv, 0.0);
        for (int k = 0; k < nb; ++k) {
            for (int s = 0; s < ns; ++s) {
                for (int a = 0; a <= cfg.max_arrivals(); ++a) {
                    const int j = col(q + s - a, s, k);
                    if (j >= 0) row[j] += cfg.arrival.alphas[a];
                }
                const int j = col(q, s, k);
                if (j >= 0) row[j] -= 1.0;
            }
        }
        lp.add_row(std::move(row), RowSense::kEqual, 0.0);
    }

    if (options.couple_channel) {
        model.first_coupling_row = static_cast<int>(lp.rows.size());
        for (int q = 0; q < nq; ++q) {
            for (int k = 0; k < nb; ++k) {
                std::vector<double> row(nv, 0.0);
                for (int s = 0; s < ns; ++s) {
                    for (int kk = 0; kk < nb; ++kk) {
                        const int j = col(q, s, kk);
                        if (j >= 0) row[j] = (kk == k ? 1.0 : 0.0) - disc.mass[k];
                    }
                }
                lp.add_row(std::move(row), RowSense::kEqual, 0.0);
            }
        }
    }
    return model;
}

OccupancyLp build_lp(const SystemConfig& cfg, const ChannelDiscretization& disc,
                     double delay_bound, const LpOptions& options) {
    return build_weighted_lp(cfg, disc, 1.0, 0.0, delay_bound, options);
}

OccupancyMeasure to_measure(const SystemConfig& cfg, const ChannelDiscretization& disc,
                            const OccupancyLp& model, const std::vector<double>& x) {
    OccupancyMeasure m(cfg, disc);
    for (size_t j = 0; j < model.cells.size(); ++j) {
        const auto [q, s, k] = model.cells[j];
        // Basic values this small are refactorization residue, not mass.
        m.at(q, s, k) = std::abs(x[j]) <= kResidueMass ? 0.0 : x[j];
    }
    return m;
}

LpSolution solve_constrained(const SystemConfig& cfg, const ChannelDiscretization& disc,
                             double delay_bound, const LpOptions& options) {
    const auto model = build_lp(cfg, disc, delay_bound, options);
    const auto result = solve_simplex(model.lp, options.simplex);
    LpSolution out;
    out.status = result.status;
    out.iterations = result.iterations;
    if (result.status != LpStatus::kOptimal) return out;
    out.objective = result.objective;
    out.measure = to_measure(cfg, disc, model, result.x);
    out.residual = max_violation(model.lp, result.x);
    if (model.delay_row >= 0) out.delay_dual = std::max(0.0, -result.duals[model.delay_row]);
    return out;
}

double min_delay(const SystemConfig& cfg, const ChannelDiscretization& disc, const LpOptions& options) {
    if (mean_arrival_rate(cfg.arrival) == 0.0) return 0.0;
    const auto model = build_weighted_lp(cfg, disc, 0.0, 1.0, kNoDelayBound, options);
    const auto result = solve_simplex(model.lp, options.simplex);
    if (result.status != LpStatus::kOptimal)
        throw std::runtime_error("minimum-delay LP is " + to_string(result.status));
    return result.objective;
}

LagrangianSolution solve_lagrangian(const SystemConfig& cfg, const ChannelDiscretization& disc,
                                    double lambda, const LpOptions& options) {
    const auto model = build_weighted_lp(cfg, disc, 1.0, lambda, kNoDelayBound, options);
    const auto result = solve_simplex(model.lp, options.simplex);
    LagrangianSolution out;
    out.status = result.status;
    out.weight = lambda;
    if (result.status != LpStatus::kOptimal) return out;
    out.value = result.objective;
    out.measure = to_measure(cfg, disc, model, result.x);
    out.metrics = evaluate_measure(*out.measure);
    out.policy = extract_policy(*out.measure);
    return out;
}

}  // namespace detsched
