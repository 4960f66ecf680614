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

// Dense two-phase primal simplex.
//
// Solves
//   min  c^T x
//   s.t. A_i x (<=, =, >=) b_i   for every row i
//        x >= 0
//
// Pivoting always uses Bland's smallest-index rule, so the method terminates
// on degenerate problems. Once an optimal basis is found the basic solution
// and the duals are recomputed from a fresh factorization of the basis
// matrix, which removes the round-off accumulated in the tableau.

#pragma once

#include <string>
#include <vector>

namespace detsched {

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };

struct LpRow {
    std::vector<double> coeffs;  // dense, one entry per variable
    RowSense sense = RowSense::kEqual;
    double rhs = 0.0;
};

struct LinearProgram {
    int num_vars = 0;
    std::vector<double> objective;
    std::vector<LpRow> rows;

    /// Appends a row and returns its index.
    int add_row(std::vector<double> coeffs, RowSense sense, double rhs);
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

std::string to_string(LpStatus status);

struct SimplexOptions {
    double optimality_tol = 1e-9;   // reduced costs >= -tol at optimum
    double feasibility_tol = 1e-9;  // phase-1 objective above this => infeasible
    double pivot_tol = 1e-9;        // smallest usable pivot magnitude
    long max_iterations = 1'000'000;
};

struct LpResult {
    LpStatus status = LpStatus::kInfeasible;
    double objective = 0.0;
    std::vector<double> x;
    /// y_i such that c - A^T y >= 0 on the optimal basis. For a minimization
    /// a binding <= row has y_i <= 0. Rows found redundant get 0.
    std::vector<double> duals;
    std::vector<int> basis;  // original variable indices that are basic
    int redundant_rows = 0;
    long iterations = 0;
};

LpResult solve_simplex(const LinearProgram& lp, const SimplexOptions& options = {});

/// Largest absolute violation over all rows and the nonnegativity bounds.
double max_violation(const LinearProgram& lp, const std::vector<double>& x);

}  // namespace detsched
