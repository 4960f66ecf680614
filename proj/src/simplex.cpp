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

#include "detsched/simplex.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace detsched {

int LinearProgram::add_row(std::vector<double> coeffs, RowSense sense, double rhs) {
    if (static_cast<int>(coeffs.size()) != num_vars)
        throw std::invalid_argument("row width does not match variable count");
    rows.push_back(LpRow{std::move(coeffs), sense, rhs});
    return static_cast<int>(rows.size()) - 1;
}

std::string to_string(LpStatus status) {
    switch (status) {
        case LpStatus::kOptimal: return "optimal";
        case LpStatus::kInfeasible: return "infeasible";
        case LpStatus::kUnbounded: return "unbounded";
    }
    return "unknown";
}

double max_violation(const LinearProgram& lp, const std::vector<double>& x) {
    double worst = 0.0;
    for (double v : x) worst = std::max(worst, -v);
    for (const auto& row : lp.rows) {
        double lhs = 0.0;
        for (int j = 0; j < lp.num_vars; ++j) lhs += row.coeffs[j] * x[j];
        const double gap = lhs - row.rhs;
        switch (row.sense) {
            case RowSense::kLessEqual: worst = std::max(worst, gap); break;
            case RowSense::kGreaterEqual: worst = std::max(worst, -gap); break;
            case RowSense::kEqual: worst = std::max(worst, std::abs(gap)); break;
        }
    }
    return worst;
}

namespace {

// Standard-form tableau with an explicit reduced-cost row.
class Tableau {
  public:
    Tableau(const LinearProgram& lp, const SimplexOptions& options) : opt_(options) {
        m_ = static_cast<int>(lp.rows.size());
        n_orig_ = lp.num_vars;
        flipped_.resize(m_);
        int slacks = 0, artificials = 0;
        for (int i = 0; i < m_; ++i) {
            const auto& row = lp.rows[i];
            flipped_[i] = row.rhs < 0.0;
            RowSense sense = row.sense;
            if (flipped_[i] && sense != RowSense::kEqual)
                sense = sense == RowSense::kLessEqual ? RowSense::kGreaterEqual : RowSense::kLessEqual;
            senses_.push_back(sense);
            if (sense != RowSense::kEqual) ++slacks;
            if (sense != RowSense::kLessEqual) ++artificials;
        }
        art_start_ = n_orig_ + slacks;
        n_ = art_start_ + artificials;
        width_ = n_ + 1;
        data_.assign(static_cast<size_t>(m_) * width_, 0.0);
        basis_.assign(m_, -1);

        int slack = n_orig_, art = art_start_;
        for (int i = 0; i < m_; ++i) {
            const auto& row = lp.rows[i];
            const double sign = flipped_[i] ? -1.0 : 1.0;
            for (int j = 0; j < n_orig_; ++j) at(i, j) = sign * row.coeffs[j];
            at(i, n_) = sign * row.rhs;
            if (senses_[i] == RowSense::kLessEqual) {
                at(i, slack) = 1.0;
                basis_[i] = slack++;
            } else {
                if (senses_[i] == RowSense::kGreaterEqual) at(i, slack++) = -1.0;
                at(i, art) = 1.0;
                basis_[i] = art++;
            }
        }
        // Original standard-form columns for the final refactorization.
        original_ = data_;
        row_ids_.resize(m_);
        for (int i = 0; i < m_; ++i) row_ids_[i] = i;
    }

    LpResult solve(const std::vector<double>& cost) {
        LpResult result;
        // Phase 1: minimize the sum of artificials.
        std::vector<double> phase1(n_, 0.0);
        for (int j = art_start_; j < n_; ++j) phase1[j] = 1.0;
        price(phase1);
        if (iterate(n_, result.iterations) != LpStatus::kOptimal)
            throw std::logic_error("phase 1 cannot be unbounded");
        if (-reduced_[n_] > opt_.feasibility_tol) {
            result.status = LpStatus::kInfeasible;
            return result;
        }
        result.redundant_rows = drive_out_artificials();

        // Phase 2 on the original objective; artificial columns never enter.
        std::vector<double> phase2(n_, 0.0);
        std::copy(cost.begin(), cost.end(), phase2.begin());
        price(phase2);
        const LpStatus status = iterate(art_start_, result.iterations);
        result.status = status;
        if (status != LpStatus::kOptimal) return result;

        extract(cost, result);
        return result;
    }

  private:
    double& at(int i, int j) { return data_[static_cast<size_t>(i) * width_ + j]; }
    double at(int i, int j) const { return data_[static_cast<size_t>(i) * width_ + j]; }

    void price(const std::vector<double>& cost) {
        reduced_.assign(width_, 0.0);
        for (int j = 0; j < n_; ++j) reduced_[j] = cost[j];
        for (int i = 0; i < m_; ++i) {
            const double cb = cost[basis_[i]];
            if (cb == 0.0) continue;
            for (int j = 0; j < width_; ++j) reduced_[j] -= cb * at(i, j);
        }
    }

    void pivot(int r, int e) {
        const double inv = 1.0 / at(r, e);
        nonzero_.clear();
        for (int j = 0; j < width_; ++j) {
            double& v = at(r, j);
            if (v == 0.0) continue;
            v *= inv;
            nonzero_.push_back(j);
        }
        at(r, e) = 1.0;
        const double* prow = &data_[static_cast<size_t>(r) * width_];
        for (int i = 0; i < m_; ++i) {
            if (i == r) continue;
            const double f = at(i, e);
            if (f == 0.0) continue;
            double* row = &data_[static_cast<size_t>(i) * width_];
            for (int j : nonzero_) row[j] -= f * prow[j];
            row[e] = 0.0;
        }
        const double f = reduced_[e];
        if (f != 0.0) {
            for (int j : nonzero_) reduced_[j] -= f * prow[j];
            reduced_[e] = 0.0;
        }
        basis_[r] = e;
    }

    // Bland's rule: smallest entering index with negative reduced cost,
    // smallest basic index among tied ratios.
    LpStatus iterate(int column_limit, long& iterations) {
        while (true) {
            if (++iterations > opt_.max_iterations) throw std::runtime_error("simplex iteration limit");
            int enter = -1;
            for (int j = 0; j < column_limit; ++j) {
                if (reduced_[j] < -opt_.optimality_tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return LpStatus::kOptimal;
            int leave = -1;
            double best = 0.0;
            for (int i = 0; i < m_; ++i) {
                const double a = at(i, enter);
                if (a <= opt_.pivot_tol) continue;
                const double ratio = std::max(at(i, n_), 0.0) / a;
                if (leave < 0 || ratio < best - 1e-12) {
                    best = ratio;
                    leave = i;
                } else if (ratio <= best + 1e-12 && basis_[i] < basis_[leave]) {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0) return LpStatus::kUnbounded;
            pivot(leave, enter);
        }
    }

    int drive_out_artificials() {
        int dropped = 0;
        for (int i = 0; i < m_;) {
            if (basis_[i] < art_start_) {
                ++i;
                continue;
            }
            int enter = -1;
            for (int j = 0; j < art_start_; ++j) {
                if (std::abs(at(i, j)) > opt_.pivot_tol) {
                    enter = j;
                    break;
                }
            }
            if (enter >= 0) {
                pivot(i, enter);
                ++i;
                continue;
            }
            // Row is a combination of the others: remove it.
            remove_row(i);
            ++dropped;
        }
        return dropped;
    }

    void remove_row(int i) {
        const auto first = data_.begin() + static_cast<std::ptrdiff_t>(i) * width_;
        data_.erase(first, first + width_);
        basis_.erase(basis_.begin() + i);
        row_ids_.erase(row_ids_.begin() + i);
        --m_;
    }

    void extract(const std::vector<double>& cost, LpResult& result) const {
        const int rows = m_;
        std::vector<double> x(n_, 0.0);
        for (int i = 0; i < rows; ++i) x[basis_[i]] = at(i, n_);

        // Refactorize B from the untouched standard-form data.
        Eigen::MatrixXd basis_matrix(rows, rows);
        Eigen::VectorXd rhs(rows), cb(rows);
        const auto orig = [&](int row, int col) {
            return original_[static_cast<size_t>(row) * width_ + col];
        };
        for (int i = 0; i < rows; ++i) {
            for (int c = 0; c < rows; ++c) basis_matrix(i, c) = orig(row_ids_[i], basis_[c]);
            rhs(i) = orig(row_ids_[i], n_);
            cb(i) = basis_[i] < n_orig_ ? cost[basis_[i]] : 0.0;
        }
        Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
        if (rows > 0) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
            if (lu.isInvertible()) {
                const Eigen::VectorXd xb = lu.solve(rhs);
                bool ok = true;
                for (int i = 0; i < rows; ++i)
                    if (!(xb(i) > -1e-9)) ok = false;
                if (ok)
                    for (int i = 0; i < rows; ++i) x[basis_[i]] = std::max(xb(i), 0.0);
                y = lu.transpose().solve(cb);
            }
        }
        result.x.assign(x.begin(), x.begin() + n_orig_);
        for (double& v : result.x) v = std::max(v, 0.0);
        result.objective = 0.0;
        for (int j = 0; j < n_orig_; ++j) result.objective += cost[j] * result.x[j];
        result.duals.assign(flipped_.size(), 0.0);
        for (int i = 0; i < rows; ++i) {
            const int id = row_ids_[i];
            result.duals[id] = flipped_[id] ? -y(i) : y(i);
        }
        for (int i = 0; i < rows; ++i)
            if (basis_[i] < n_orig_) result.basis.push_back(basis_[i]);
        std::sort(result.basis.begin(), result.basis.end());
    }

    SimplexOptions opt_;
    int m_ = 0, n_orig_ = 0, n_ = 0, art_start_ = 0, width_ = 0;
    std::vector<double> data_, original_, reduced_;
    std::vector<int> basis_, row_ids_, nonzero_;
    std::vector<bool> flipped_;
    std::vector<RowSense> senses_;
};

}  // namespace

LpResult solve_simplex(const LinearProgram& lp, const SimplexOptions& options) {
    if (static_cast<int>(lp.objective.size()) != lp.num_vars)
        throw std::invalid_argument("objective width does not match variable count");
    for (const auto& row : lp.rows)
        if (static_cast<int>(row.coeffs.size()) != lp.num_vars)
            throw std::invalid_argument("row width does not match variable count");
    Tableau tableau(lp, options);
    return tableau.solve(lp.objective);
}

}  // namespace detsched
