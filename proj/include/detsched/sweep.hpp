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

// Delay-power tradeoff curves, their vertices and refinement studies.

#pragma once

#include "detsched/model.hpp"
#include "detsched/occupancy.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace detsched {

struct CurvePoint {
    double delay_bound = 0.0;  // D_th
    double power = 0.0;        // P*(D_th)
};

struct Vertex {
    double delay = 0.0;
    double power = 0.0;
    double weight = 0.0;  // a lambda at which this vertex is optimal
    BinPolicy policy;
};

struct VertexDistance {
    double euclidean = 0.0;
    double delay_axis = 0.0;
};

struct TradeoffCurve {
    int bins = 0;
    std::vector<CurvePoint> points;
    /// Vertices whose delay lies in [window_lo, window_hi], sorted by delay.
    std::vector<Vertex> vertices;
    std::vector<VertexDistance> distances;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::vector<std::string> notes;
    bool nonincreasing = true;
    bool convex = true;
};

/// Raised by enumerate_vertices when lambda_max does not reach D_min or when a
/// vertex policy is randomized.
class VertexError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// 60 uniform points on [D_min, 3 D_min].
std::vector<double> default_grid(const SystemConfig& cfg, const ChannelDiscretization& disc, int points = 60);

/// 1e4 * xi(S_max) / h_min.
double default_lambda_max(const SystemConfig& cfg);

/// One constrained solve per grid point. Infeasible points are skipped with a
/// note; throws std::runtime_error("empty curve") when nothing is feasible.
TradeoffCurve sweep_curve(const SystemConfig& cfg, const ChannelDiscretization& disc,
                          const std::vector<double>& grid, const LpOptions& options = {});

/// All vertices of the tradeoff curve, sorted by delay (D_min first).
/// Lambda intervals are split at the weight where the two endpoint solutions
/// tie; an interval closes once nothing lies below that tie line.
std::vector<Vertex> enumerate_vertices(const SystemConfig& cfg, const ChannelDiscretization& disc,
                                       double lambda_max, double tol = 1e-9, const LpOptions& options = {});

std::vector<VertexDistance> vertex_distances(const std::vector<Vertex>& vertices);

/// Keeps the vertices inside [lo, hi] (with tol) and fills the distances.
void attach_vertices(TradeoffCurve& curve, const std::vector<Vertex>& all, double lo, double hi,
                     double tol = 1e-9);

/// Linear interpolation of the vertex chain at d; NaN outside its span.
double interpolate_vertices(const std::vector<Vertex>& vertices, double d);

struct ConvergenceStudy {
    std::vector<TradeoffCurve> curves;
    /// Largest P*_{fine} - P*_{coarse} over common grid points, over pairs
    /// where the finer count is a multiple of the coarser one. <= 0 means
    /// refinement never hurt.
    double dominance_violation = 0.0;
    /// sup_d |P*_{M_i}(d) - P*_{M_{i+1}}(d)| for successive curves.
    std::vector<double> sup_gaps;
};

ConvergenceStudy convergence_study(const SystemConfig& cfg, const std::vector<int>& bins_list,
                                   const std::vector<double>& grid, const LpOptions& options = {});

}  // namespace detsched
