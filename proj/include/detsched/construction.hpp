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

// Deterministic threshold construction over a continuous channel.
//
// Given an occupation density d(q, s, h) on (h_min, h_max], split the support
// into M equal cells. Inside cell k and for every queue state q the cell's
// total q-mass is handed out to rates in increasing order: rate 0 takes the
// leftmost stretch of h carrying mass int_cell d(q, 0, h) dh, rate 1 the next
// stretch, and so on. Stretches are located by inverting the cumulative
//
//   U_q(x) = int_{h_min}^{x} sum_s d(q, s, h) dh,
//
// so the result y_M(q, s, h) uses the full density sum_x d(q, x, h) on its
// stretch and zero elsewhere. Every (q, h) then has exactly one active rate,
// the per-(q, s) masses of d are preserved (hence delay and queue balance),
// and the average power exceeds that of d by at most a factor
// 1 + (h_max - h_min) / (M h_min).

#pragma once

#include "detsched/model.hpp"
#include "detsched/occupancy.hpp"

#include <optional>
#include <string>
#include <vector>

namespace detsched {

/// Step-function occupation density d(q, s, h). Piece i covers
/// (breaks[i], breaks[i+1]].
class PiecewiseDensity {
  public:
    PiecewiseDensity() = default;
    PiecewiseDensity(SystemConfig cfg, std::vector<double> breaks);

    const SystemConfig& config() const { return cfg_; }
    const std::vector<double>& breaks() const { return breaks_; }
    int pieces() const { return static_cast<int>(breaks_.size()) - 1; }
    double h_min() const { return breaks_.front(); }
    double h_max() const { return breaks_.back(); }

    double& value(int q, int s, int piece) { return values_[index(q, s, piece)]; }
    double value(int q, int s, int piece) const { return values_[index(q, s, piece)]; }

    /// Index of the piece containing h (h <= h_min maps to 0).
    int piece_of(double h) const;
    double at(int q, int s, double h) const;
    /// sum_s d(q, s, h)
    double total(int q, double h) const;

    /// int_a^b d(q, s, h) dh; s < 0 sums over all rates.
    double mass(int q, int s, double a, double b) const;
    /// int_a^b d(q, s, h) / h dh; s < 0 sums over all rates.
    double inverse_moment(int q, int s, double a, double b) const;

  private:
    size_t index(int q, int s, int piece) const {
        return (static_cast<size_t>(q) * cfg_.num_rates() + s) * pieces() + piece;
    }

    SystemConfig cfg_;
    std::vector<double> breaks_;
    std::vector<double> values_;
};

/// Spreads each bin's mass in proportion to f_H inside the bin. For a uniform
/// channel this is g[q][s][k] / (e_k - e_{k-1}) on bin k.
PiecewiseDensity density_from_measure(const OccupancyMeasure& m);

/// Piecewise-linear, nondecreasing U_q stored at its breakpoints.
struct CdfEnvelope {
    std::vector<double> x;
    std::vector<double> u;

    double operator()(double h) const;
    double total() const { return u.back(); }
};

CdfEnvelope compute_envelope(const PiecewiseDensity& d, int q);

/// Leftmost x with U(x) >= v (flat stretches resolve to their left end).
/// Throws std::domain_error("mass out of range") if v > U(h_max) + 1e-12.
double invert_envelope(const CdfEnvelope& U, double v);

/// Cell boundaries h_k^min / h_k^max and the per-(q, k, s) stretch ends.
class Thresholds {
  public:
    Thresholds() = default;
    Thresholds(int queue_states, int rates, int cells, double h_min, double h_max);

    int cells() const { return cells_; }
    double cell_min(int k) const;
    double cell_max(int k) const;

    double& upper(int q, int k, int s) { return upper_[(static_cast<size_t>(q) * cells_ + k) * rates_ + s]; }
    double upper(int q, int k, int s) const { return upper_[(static_cast<size_t>(q) * cells_ + k) * rates_ + s]; }
    /// Left end of the stretch: upper(q, k, s - 1), or the cell start for s = 0.
    double lower(int q, int k, int s) const { return s == 0 ? cell_min(k) : upper(q, k, s - 1); }

  private:
    int rates_ = 0;
    int cells_ = 0;
    double h_min_ = 0.0, h_max_ = 0.0;
    std::vector<double> upper_;
};

Thresholds compute_thresholds(const PiecewiseDensity& d, int cells);

struct RateInterval {
    double lo = 0.0;  // open
    double hi = 0.0;  // closed
    int rate = 0;
    int cell = 0;
};

/// y_M as per-q interval lists over the source density.
struct ConstructedSolution {
    int cells = 0;
    PiecewiseDensity source;
    Thresholds thresholds;
    /// intervals[q] in increasing h, empty intervals included.
    std::vector<std::vector<RateInterval>> intervals;

    /// y_M(q, s, h)
    double value(int q, int s, double h) const;
    /// int y_M(q, s, h) dh
    double rate_mass(int q, int s) const;
};

ConstructedSolution construct_yM(const PiecewiseDensity& d, int cells);

/// Overlapping "solution" whose intervals are the positive pieces of d. Only
/// meaningful as a negative control for the determinism checks.
ConstructedSolution source_as_solution(const PiecewiseDensity& d);

/// Max residuals of the feasibility conditions for a constructed solution.
struct FeasibilityReport {
    double channel_marginal = 0.0;   // sum_{q,s} y = f_H at sampled h
    double queue_balance = 0.0;      // balance of per-(q, s) masses
    double delay_match = 0.0;        // |D(y) - D(source)|
    double delay_excess = 0.0;       // max(0, D(y) - bound) when a bound is given
    double nonnegativity = 0.0;
    double structural_zeros = 0.0;   // mass on inadmissible (q, s)
    double rate_preservation = 0.0;  // |int y(q, s) - int d(q, s)|
    double partition = 0.0;          // gaps/overlaps of the per-q cover
    double telescoping = 0.0;        // |h^max_{k, S_max, q} - h_k^max|
    double total_mass_error = 0.0;
    double delay = 0.0;
    int samples = 0;
};

FeasibilityReport verify_feasibility(const ConstructedSolution& y, int samples = 10000,
                                     std::optional<double> delay_bound = std::nullopt);

struct DeterminismWitness {
    int queue = 0;
    double h = 0.0;
    int rate_a = 0;
    int rate_b = 0;
};

struct DeterminismReport {
    bool deterministic = true;  // both checks agree and pass
    bool sampled_ok = true;
    bool exact_ok = true;
    std::optional<DeterminismWitness> witness;
    long points_checked = 0;
};

/// Stratified sampling over the whole support plus every interval midpoint,
/// cross-checked against exact pairwise interval disjointness.
DeterminismReport verify_deterministic(const ConstructedSolution& y, int samples = 10000);

struct PowerRatio {
    double constructed = 0.0;  // P_M
    double source = 0.0;       // P*
    double ratio = 1.0;
    double bound = 1.0;        // 1 + (h_max - h_min) / (M h_min)
    bool within_bound = true;
};

PowerRatio power_ratio(const ConstructedSolution& y, const PiecewiseDensity& d);

/// Average power of the source density, exact.
double density_power(const PiecewiseDensity& d);
/// E[q] / abar under the source density.
double density_delay(const PiecewiseDensity& d);

struct ThresholdRule {
    double lo = 0.0;
    double hi = 0.0;
    int rate = 0;
};

/// Rate as a function of (q, h): per q, ordered (lo, hi] -> s rules covering
/// (h_min, h_max].
struct ThresholdPolicy {
    double h_min = 0.0;
    double h_max = 0.0;
    std::vector<std::vector<ThresholdRule>> rules;
    std::vector<char> transient;

    int rate(int q, double h) const;
};

/// Raised when a construction is asked to act as a policy but is not
/// deterministic.
class DeterminismError : public std::runtime_error {
  public:
    DeterminismError(const std::string& what, DeterminismWitness w)
        : std::runtime_error(what), witness(w) {}
    DeterminismWitness witness;
};

ThresholdPolicy yM_to_policy(const ConstructedSolution& y);

}  // namespace detsched
