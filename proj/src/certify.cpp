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

#include "detsched/certify.hpp"

#include "detsched/io.hpp"
#include "detsched/markov.hpp"
#include "detsched/sweep.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace detsched {

Metrics evaluate_threshold_policy(const SystemConfig& cfg, const ThresholdPolicy& policy) {
    const int nq = cfg.num_queue_states();
    std::vector<std::vector<double>> rate_probs(nq, std::vector<double>(cfg.num_rates(), 0.0));
    std::vector<double> energy(nq, 0.0);
    for (int q = 0; q < nq; ++q) {
        for (const auto& r : policy.rules[q]) {
            const int s = std::min(r.rate, q);  // the simulator's underflow override
            rate_probs[q][s] += cfg.channel.mass(r.lo, r.hi);
            energy[q] += cfg.energy[s] * cfg.channel.inverse_moment(r.lo, r.hi);
        }
    }
    const auto pi = stationary_distribution(queue_transitions(cfg, rate_probs));
    Metrics m;
    double queue = 0.0;
    for (int q = 0; q < nq; ++q) {
        queue += q * pi[q];
        m.power += pi[q] * energy[q];
    }
    const double abar = mean_arrival_rate(cfg.arrival);
    m.delay = abar > 0.0 ? queue / abar : 0.0;
    return m;
}

// ---- oracles ---------------------------------------------------------------

std::vector<PolicyPoint> enumerate_deterministic(const SystemConfig& cfg, const ChannelDiscretization& disc,
                                                 long limit) {
    const int nq = cfg.num_queue_states();
    const int m = disc.bins();
    std::vector<std::vector<int>> choices(static_cast<size_t>(nq) * m);
    double count = 1.0;
    for (int q = 0; q < nq; ++q)
        for (int k = 0; k < m; ++k) {
            auto& c = choices[static_cast<size_t>(q) * m + k];
            for (int s = 0; s < cfg.num_rates(); ++s)
                if (cfg.admissible(q, s)) c.push_back(s);
            count *= static_cast<double>(c.size());
        }
    if (count > static_cast<double>(limit)) throw std::invalid_argument("too many deterministic policies");

    std::vector<size_t> digit(choices.size(), 0);
    std::vector<std::vector<int>> actions(nq, std::vector<int>(m, 0));
    std::vector<PolicyPoint> out;
    while (true) {
        for (int q = 0; q < nq; ++q)
            for (int k = 0; k < m; ++k) {
                const size_t i = static_cast<size_t>(q) * m + k;
                actions[q][k] = choices[i][digit[i]];
            }
        try {
            const auto pol = BinPolicy::deterministic(cfg, disc, actions);
            const auto met = evaluate_measure(policy_to_measure(cfg, disc, pol));
            out.push_back({met.delay, met.power});
        } catch (const ReducibleChainError&) {
        }
        size_t i = 0;
        while (i < digit.size() && ++digit[i] == choices[i].size()) digit[i++] = 0;
        if (i == digit.size()) break;
    }
    return out;
}

std::vector<PolicyPoint> lower_hull(std::vector<PolicyPoint> p) {
    std::sort(p.begin(), p.end(), [](const PolicyPoint& a, const PolicyPoint& b) {
        return a.delay < b.delay || (a.delay == b.delay && a.power < b.power);
    });
    std::vector<PolicyPoint> h;
    const auto cross = [](const PolicyPoint& o, const PolicyPoint& a, const PolicyPoint& b) {
        return (a.delay - o.delay) * (b.power - o.power) - (a.power - o.power) * (b.delay - o.delay);
    };
    for (const auto& x : p) {
        if (!h.empty() && std::abs(x.delay - h.back().delay) <= 1e-12) continue;  // same delay, higher power
        while (h.size() >= 2 && cross(h[h.size() - 2], h.back(), x) <= 1e-14) h.pop_back();
        h.push_back(x);
    }
    // Keep the part where power still falls.
    size_t best = 0;
    for (size_t i = 1; i < h.size(); ++i)
        if (h[i].power < h[best].power - 1e-13) best = i;
    h.resize(best + 1);
    return h;
}

double hull_value(const std::vector<PolicyPoint>& h, double d) {
    if (h.empty() || d < h.front().delay - 1e-12) return std::numeric_limits<double>::infinity();
    if (d >= h.back().delay) return h.back().power;
    for (size_t i = 0; i + 1 < h.size(); ++i) {
        if (d <= h[i + 1].delay) {
            const double t = (d - h[i].delay) / (h[i + 1].delay - h[i].delay);
            return h[i].power + t * (h[i + 1].power - h[i].power);
        }
    }
    return h.back().power;
}

double bfs_oracle(const LinearProgram& lp, bool& found) {
    const int n = lp.num_vars;
    const int m = static_cast<int>(lp.rows.size());
    int slacks = 0;
    for (const auto& r : lp.rows)
        if (r.sense != RowSense::kEqual) ++slacks;
    const int cols = n + slacks;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, cols);
    Eigen::VectorXd b(m);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(cols);
    for (int j = 0; j < n; ++j) c(j) = lp.objective[j];
    int next = n;
    for (int i = 0; i < m; ++i) {
        const auto& r = lp.rows[i];
        for (int j = 0; j < n; ++j) A(i, j) = r.coeffs[j];
        if (r.sense == RowSense::kLessEqual) A(i, next++) = 1.0;
        if (r.sense == RowSense::kGreaterEqual) A(i, next++) = -1.0;
        b(i) = r.rhs;
    }

    found = false;
    double best = std::numeric_limits<double>::infinity();
    if (b.lpNorm<Eigen::Infinity>() <= 1e-12) {
        found = true;
        best = 0.0;
    }
    for (unsigned mask = 1; mask < (1u << cols); ++mask) {
        std::vector<int> support;
        for (int j = 0; j < cols; ++j)
            if (mask & (1u << j)) support.push_back(j);
        if (static_cast<int>(support.size()) > m) continue;
        Eigen::MatrixXd B(m, support.size());
        for (size_t j = 0; j < support.size(); ++j) B.col(j) = A.col(support[j]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        lu.setThreshold(1e-10);
        if (lu.rank() != static_cast<int>(support.size())) continue;
        const Eigen::VectorXd xb = B.colPivHouseholderQr().solve(b);
        if ((B * xb - b).lpNorm<Eigen::Infinity>() > 1e-9 * std::max(1.0, b.lpNorm<Eigen::Infinity>())) continue;
        if (xb.minCoeff() < -1e-9) continue;
        double v = 0.0;
        for (size_t j = 0; j < support.size(); ++j) v += c(support[j]) * xb(j);
        found = true;
        best = std::min(best, v);
    }
    return best;
}

LinearProgram random_lp(std::mt19937_64& rng, bool degenerate) {
    std::uniform_int_distribution<int> nvars(1, 6), nrows(0, 3), coef(-3, 3), sense(0, 2), coin(0, 1);
    std::uniform_real_distribution<double> unit(0.0, 2.0), cost(-2.0, 2.0);
    const int n = nvars(rng);
    std::vector<double> x0(n);
    for (auto& x : x0) x = (degenerate && coin(rng)) ? 0.0 : std::round(unit(rng) * 4.0) / 4.0;

    LinearProgram lp;
    lp.num_vars = n;
    lp.objective.resize(n);
    for (auto& c : lp.objective) c = std::round(cost(rng) * 4.0) / 4.0;

    const int m = nrows(rng);
    for (int i = 0; i < m; ++i) {
        std::vector<double> a(n);
        double ax = 0.0;
        for (int j = 0; j < n; ++j) {
            a[j] = coef(rng);
            ax += a[j] * x0[j];
        }
        const double gap = (degenerate && coin(rng)) ? 0.0 : unit(rng);
        switch (sense(rng)) {
            case 0: lp.add_row(a, RowSense::kEqual, ax); break;
            case 1: lp.add_row(a, RowSense::kLessEqual, ax + gap); break;
            default: lp.add_row(a, RowSense::kGreaterEqual, ax - gap); break;
        }
    }
    if (degenerate && !lp.rows.empty()) {
        auto copy = lp.rows.front();
        for (auto& v : copy.coeffs) v *= 2.0;
        copy.rhs *= 2.0;
        lp.rows.push_back(copy);
    }
    // Bounding row keeps the polytope compact.
    double total = 0.0;
    for (double x : x0) total += x;
    lp.add_row(std::vector<double>(n, 1.0), RowSense::kLessEqual, degenerate ? total : total + 1.0);
    return lp;
}

SystemConfig tiny_config() {
    SystemConfig cfg;
    cfg.arrival.alphas = {0.5, 0.5};
    cfg.channel = ChannelModel::uniform(1.0, 2.0);
    cfg.buffer_size = 2;
    cfg.max_rate = 1;
    cfg.energy = {0.0, 1.0};
    validate_config(cfg);
    return cfg;
}

// ---- battery ---------------------------------------------------------------

namespace {

std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

void add(std::vector<CheckResult>& out, std::string name, bool pass, std::string detail) {
    out.push_back({std::move(name), pass, std::move(detail)});
}

void lp_checks(const SystemConfig& cfg, const ChannelDiscretization& disc, double dth, const LpSolution& sol,
               std::vector<CheckResult>& out) {
    const bool ok = sol.status == LpStatus::kOptimal;
    if (!ok) {
        add(out, "lp.solve", false, "status " + to_string(sol.status) + " at D_th=" + num(dth));
        return;
    }
    const auto met = evaluate_measure(*sol.measure);
    add(out, "lp.solve", sol.residual <= 1e-8 && std::abs(met.power - sol.objective) <= 1e-8,
        "P*=" + format_double(sol.objective) + " D=" + format_double(met.delay) + " residual=" + num(sol.residual));

    const auto lag = solve_lagrangian(cfg, disc, sol.delay_dual);
    const double recovered = lag.value - sol.delay_dual * dth;
    add(out, "lp.duality", lag.status == LpStatus::kOptimal && std::abs(recovered - sol.objective) <= 1e-6,
        "lambda*=" + format_double(sol.delay_dual) + " L(lambda*)-lambda*D_th=" + format_double(recovered));

    try {
        const auto pol = extract_policy(*sol.measure);
        const auto back = evaluate_measure(policy_to_measure(cfg, disc, pol));
        add(out, "lp.policy_roundtrip",
            std::abs(back.delay - met.delay) <= 1e-8 && std::abs(back.power - met.power) <= 1e-8,
            "D=" + format_double(back.delay) + " P=" + format_double(back.power));
    } catch (const std::exception& e) {
        add(out, "lp.policy_roundtrip", false, e.what());
    }
}

void construction_checks(const SystemConfig& cfg, const PiecewiseDensity& d, double dth, const CertifyOptions& o,
                         std::vector<CheckResult>& out) {
    double marginal = 0, balance = 0, delay = 0, nonneg = 0, zeros = 0, preserve = 0, partition = 0, tele = 0;
    bool determ = true, exact_agree = true, policy_ok = true;
    std::string determ_detail = "all constructions one-rate";
    double policy_err = 0.0;
    std::ostringstream ratios;
    std::vector<double> ratio_list;
    bool bounds_ok = true;
    int worst_m = 0;
    for (int m : o.cells) {
        const auto y = construct_yM(d, m);
        const auto f = verify_feasibility(y, o.samples, dth);
        marginal = std::max(marginal, f.channel_marginal);
        balance = std::max(balance, f.queue_balance);
        delay = std::max({delay, f.delay_match, f.delay_excess});
        nonneg = std::max(nonneg, f.nonnegativity);
        zeros = std::max(zeros, f.structural_zeros);
        preserve = std::max(preserve, f.rate_preservation);
        partition = std::max(partition, f.partition);
        tele = std::max(tele, f.telescoping);

        const auto det = verify_deterministic(y, o.samples);
        if (det.sampled_ok != det.exact_ok) exact_agree = false;
        if (!det.deterministic && determ) {
            determ = false;
            const auto& w = *det.witness;
            determ_detail = "M=" + std::to_string(m) + " q=" + std::to_string(w.queue) + " h=" + format_double(w.h) +
                            " rates " + std::to_string(w.rate_a) + "," + std::to_string(w.rate_b);
        }

        const auto r = power_ratio(y, d);
        ratio_list.push_back(r.ratio);
        ratios << (ratio_list.size() > 1 ? " " : "") << "M=" << m << ":" << std::setprecision(12) << r.ratio;
        const bool in = r.ratio >= 1.0 - 1e-10 && r.ratio <= r.bound + 1e-10;
        if (!in && bounds_ok) {
            bounds_ok = false;
            worst_m = m;
        }

        if (det.deterministic) {
            try {
                const auto pol = yM_to_policy(y);
                const auto met = evaluate_threshold_policy(cfg, pol);
                policy_err = std::max({policy_err, std::abs(met.delay - density_delay(d)),
                                       std::abs(met.power - r.constructed)});
            } catch (const std::exception&) {
                policy_ok = false;
            }
        }
    }
    const double tol = 1e-8;
    add(out, "construction.channel_marginal", marginal <= tol, "max residual " + num(marginal));
    add(out, "construction.queue_balance", balance <= tol, "max residual " + num(balance));
    add(out, "construction.delay", delay <= tol, "max |D(y)-D(d)| or excess " + num(delay));
    add(out, "construction.nonnegativity", nonneg <= tol, "max residual " + num(nonneg));
    add(out, "construction.structural_zeros", zeros <= tol, "max residual " + num(zeros));
    add(out, "construction.feasible",
        std::max({marginal, balance, delay, nonneg, zeros}) <= tol && preserve <= 1e-10,
        "all feasibility residuals <= 1e-8 for M in list");
    add(out, "construction.rate_preservation", preserve <= 1e-10, "max residual " + num(preserve));
    add(out, "construction.partition", partition <= 1e-12, "max gap/overlap " + num(partition));
    add(out, "construction.telescoping", tele <= 1e-10, "max residual " + num(tele));
    add(out, "construction.one_rate_per_point", determ && exact_agree,
        determ_detail + (exact_agree ? "" : "; sampled and exact checks disagree"));
    add(out, "construction.threshold_policy", policy_ok && policy_err <= 1e-8,
        "max |(D,P) of rules - (D,P) of y| " + num(policy_err));

    add(out, "ratio.bounds", bounds_ok,
        (bounds_ok ? std::string() : "first violation at M=" + std::to_string(worst_m) + "; ") + ratios.str());
    bool nonincreasing = true;
    for (size_t i = 1; i < ratio_list.size(); ++i)
        if (ratio_list[i] > ratio_list[i - 1] + 1e-12) nonincreasing = false;
    add(out, "ratio.nonincreasing", nonincreasing, ratios.str());

    const double h_min = cfg.channel.h_min(), h_max = cfg.channel.h_max();
    const int m_eps = static_cast<int>(std::ceil((h_max - h_min) / (o.epsilon * h_min) - 1e-9));
    const auto r = power_ratio(construct_yM(d, m_eps), d);
    add(out, "ratio.epsilon", r.ratio <= 1.0 + o.epsilon,
        "eps=" + num(o.epsilon) + " M=" + std::to_string(m_eps) + " ratio=" + format_double(r.ratio));

    // Negative control: the source itself is one-rate only if it has no mixed piece.
    bool mixed = false;
    const int nq = cfg.num_queue_states();
    for (int q = 0; q < nq && !mixed; ++q)
        for (int i = 0; i < d.pieces() && !mixed; ++i) {
            int positive = 0;
            for (int s = 0; s < cfg.num_rates(); ++s)
                if (d.value(q, s, i) > 1e-12) ++positive;
            mixed = positive > 1;
        }
    const auto ctl = verify_deterministic(source_as_solution(d), o.samples);
    add(out, "control.source_density", ctl.deterministic == !mixed,
        std::string(mixed ? "source mixes rates; " : "source is one-rate; ") +
            (ctl.deterministic ? "check says one-rate" : "check found overlap"));
}

void oracle_checks(const SystemConfig& cfg, const CertifyOptions& o, std::vector<CheckResult>& out) {
    const auto tiny = tiny_config();
    double hull_err = 0.0, vert_err = 0.0;
    bool vert_count = true;
    for (int m : {1, 2}) {
        const auto disc = discretize_channel(tiny.channel, m);
        const auto hull = lower_hull(enumerate_deterministic(tiny, disc));
        const double lo = hull.front().delay, hi = hull.back().delay;
        for (int i = 0; i < 5; ++i) {
            const double dth = lo + (hi + 0.25 - lo) * i / 4.0;
            const auto sol = solve_constrained(tiny, disc, dth);
            const double err = sol.status == LpStatus::kOptimal ? std::abs(sol.objective - hull_value(hull, dth))
                                                                 : std::numeric_limits<double>::infinity();
            hull_err = std::max(hull_err, err);
        }
        const auto verts = enumerate_vertices(tiny, disc, default_lambda_max(tiny));
        if (verts.size() != hull.size()) {
            vert_count = false;
            continue;
        }
        for (size_t i = 0; i < hull.size(); ++i)
            vert_err = std::max({vert_err, std::abs(verts[i].delay - hull[i].delay),
                                 std::abs(verts[i].power - hull[i].power)});
    }
    add(out, "oracle.tiny_hull", hull_err <= 1e-8, "max |P*-hull| over 5 budgets, M=1,2: " + num(hull_err));
    add(out, "oracle.tiny_vertices", vert_count && vert_err <= 1e-8,
        vert_count ? "max vertex error " + num(vert_err) : "vertex count differs from hull");

    std::mt19937_64 rng(o.seed);
    int bad = 0;
    double worst = 0.0;
    for (int i = 0; i < o.random_lps; ++i) {
        const auto lp = random_lp(rng, i % 2 == 1);
        bool found = false;
        const double ref = bfs_oracle(lp, found);
        const auto res = solve_simplex(lp);
        if (!found || res.status != LpStatus::kOptimal) {
            ++bad;
            continue;
        }
        const double err = std::abs(res.objective - ref);
        worst = std::max(worst, err);
        if (err > 1e-8 * std::max(1.0, std::abs(ref))) ++bad;
    }
    add(out, "oracle.random_lp", bad == 0,
        std::to_string(o.random_lps) + " LPs, " + std::to_string(bad) + " mismatches, max error " + num(worst));

    // Vertices seen by a plain lambda grid versus the split search.
    const auto disc = discretize_channel(cfg.channel, 2);
    const double lmax = default_lambda_max(cfg);
    const auto verts = enumerate_vertices(cfg, disc, lmax);
    std::vector<PolicyPoint> seen;
    for (int i = -1; i < 2000; ++i) {
        const double lambda = i < 0 ? 0.0 : 1e-4 * std::pow(lmax / 1e-4, i / 1999.0);
        const auto s = solve_lagrangian(cfg, disc, lambda);
        seen.push_back({s.metrics.delay, s.metrics.power});
    }
    const auto grid_hull = lower_hull(seen);
    bool same = grid_hull.size() == verts.size();
    for (size_t i = 0; same && i < verts.size(); ++i)
        same = std::abs(grid_hull[i].delay - verts[i].delay) <= 1e-8 &&
               std::abs(grid_hull[i].power - verts[i].power) <= 1e-8;
    add(out, "oracle.lambda_grid", same,
        "M=2: " + std::to_string(verts.size()) + " split-search vertices, " + std::to_string(grid_hull.size()) +
            " from a 2001-point lambda grid");
}

}  // namespace

std::vector<CheckResult> certify(const SystemConfig& cfg, const CertifyOptions& o) {
    std::vector<CheckResult> out;
    const auto disc = discretize_channel(cfg.channel, o.lp_bins);
    const double dth = std::isnan(o.delay_bound) ? 3.0 * min_delay(cfg, disc) : o.delay_bound;
    const auto sol = solve_constrained(cfg, disc, dth);
    lp_checks(cfg, disc, dth, sol, out);
    if (sol.status == LpStatus::kOptimal) construction_checks(cfg, density_from_measure(*sol.measure), dth, o, out);
    if (o.oracles) oracle_checks(cfg, o, out);
    return out;
}

std::string checks_to_key_value(const std::vector<CheckResult>& checks) {
    std::ostringstream s;
    for (size_t i = 0; i < checks.size(); ++i) {
        if (i) s << '\n';
        s << "name=" << checks[i].name << "\npass=" << (checks[i].pass ? "true" : "false")
          << "\ndetail=" << checks[i].detail << '\n';
    }
    return s.str();
}

std::string checks_to_table(const std::vector<CheckResult>& checks) {
    size_t width = 4;
    for (const auto& c : checks) width = std::max(width, c.name.size());
    std::ostringstream s;
    s << std::left << std::setw(static_cast<int>(width)) << "check" << "  result  detail\n";
    for (const auto& c : checks)
        s << std::left << std::setw(static_cast<int>(width)) << c.name << "  " << (c.pass ? "PASS  " : "FAIL  ")
          << "  " << c.detail << '\n';
    return s.str();
}

}  // namespace detsched
