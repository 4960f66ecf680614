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

#include "detsched/markov.hpp"

#include "detsched/occupancy.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <sstream>

namespace detsched {

TransitionMatrix queue_transitions(const SystemConfig& cfg,
                                   const std::vector<std::vector<double>>& rate_probs) {
    const int n = cfg.num_queue_states();
    TransitionMatrix P(n, std::vector<double>(n, 0.0));
    for (int q = 0; q < n; ++q) {
        for (int s = 0; s < cfg.num_rates(); ++s) {
            const double ps = rate_probs[q][s];
            if (ps == 0.0) continue;
            for (int a = 0; a <= cfg.max_arrivals(); ++a)
                P[q][step(q, a, s, cfg.buffer_size)] += ps * cfg.arrival.alphas[a];
        }
    }
    return P;
}

std::vector<std::vector<int>> closed_classes(const TransitionMatrix& P) {
    const int n = static_cast<int>(P.size());
    // Tarjan's strongly connected components.
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1), stack;
    std::vector<char> on_stack(n, 0);
    int counter = 0, ncomp = 0;
    std::function<void(int)> visit = [&](int v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = 1;
        for (int w = 0; w < n; ++w) {
            if (P[v][w] <= 0.0) continue;
            if (index[w] < 0) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            int w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = 0;
                comp[w] = ncomp;
            } while (w != v);
            ++ncomp;
        }
    };
    for (int v = 0; v < n; ++v)
        if (index[v] < 0) visit(v);

    std::vector<char> leaks(ncomp, 0);
    for (int v = 0; v < n; ++v)
        for (int w = 0; w < n; ++w)
            if (P[v][w] > 0.0 && comp[w] != comp[v]) leaks[comp[v]] = 1;
    std::vector<std::vector<int>> members(ncomp);
    for (int v = 0; v < n; ++v) members[comp[v]].push_back(v);
    std::vector<std::vector<int>> closed;
    for (int c = 0; c < ncomp; ++c)
        if (!leaks[c]) closed.push_back(members[c]);
    std::sort(closed.begin(), closed.end());
    return closed;
}

std::vector<double> stationary_distribution(const TransitionMatrix& P) {
    const auto classes = closed_classes(P);
    if (classes.size() > 1) {
        std::ostringstream msg;
        msg << "reducible chain: closed classes {";
        for (size_t i = 0; i < classes[0].size(); ++i) msg << (i ? "," : "") << classes[0][i];
        msg << "} and {";
        for (size_t i = 0; i < classes[1].size(); ++i) msg << (i ? "," : "") << classes[1][i];
        msg << "}";
        throw ReducibleChainError(msg.str());
    }
    const auto& members = classes.front();
    const int m = static_cast<int>(members.size());
    // pi (P_C - I) = 0 on the closed class, with one equation replaced by
    // normalization.
    Eigen::MatrixXd A(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            A(j, i) = P[members[i]][members[j]] - (i == j ? 1.0 : 0.0);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    A.row(m - 1).setOnes();
    b(m - 1) = 1.0;
    const Eigen::VectorXd pi = A.fullPivLu().solve(b);
    std::vector<double> out(P.size(), 0.0);
    for (int i = 0; i < m; ++i) out[members[i]] = std::max(pi(i), 0.0);
    return out;
}

}  // namespace detsched
