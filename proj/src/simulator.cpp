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

#include "detsched/simulator.hpp"

#include "detsched/io.hpp"
#include "detsched/markov.hpp"

#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace detsched {

StreamRng::StreamRng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    engine_.seed(seq);
}

int step(int q, int a, int s, int buffer_size, long& dropped) {
    const int left = q - s > 0 ? q - s : 0;
    const int next = left + a;
    if (next > buffer_size) {
        dropped += next - buffer_size;
        return buffer_size;
    }
    return next;
}

namespace {

struct BatchStats {
    std::vector<double> means;

    double mean() const {
        double s = 0.0;
        for (double m : means) s += m;
        return means.empty() ? 0.0 : s / means.size();
    }
    double standard_error() const {
        const size_t n = means.size();
        if (n < 2) return 0.0;
        const double mu = mean();
        double ss = 0.0;
        for (double m : means) ss += (m - mu) * (m - mu);
        return std::sqrt(ss / (n - 1) / n);
    }
};

// Chooses s given (q, h); `rng` is the policy stream.
template <typename Chooser>
SimReport simulate(const SystemConfig& cfg, const SimOptions& options, Chooser&& choose) {
    if (options.slots <= 0) throw std::invalid_argument("slots must be positive");
    long warmup = options.warmup.value_or(std::max(options.slots / 10, 1000L));
    if (!options.warmup && warmup >= options.slots) warmup = options.slots / 10;
    if (warmup < 0 || warmup >= options.slots) throw std::invalid_argument("need slots > warmup >= 0");
    if (options.batches < 1) throw std::invalid_argument("batches must be >= 1");

    StreamRng arrivals(options.seed, StreamRng::kArrivals);
    StreamRng channel(options.seed, StreamRng::kChannel);
    StreamRng policy_rng(options.seed, StreamRng::kPolicy);

    std::vector<double> arrival_cdf;
    double cum = 0.0;
    for (double a : cfg.arrival.alphas) arrival_cdf.push_back(cum += a);
    const auto draw_arrivals = [&]() {
        const double u = arrivals.uniform();
        for (size_t k = 0; k + 1 < arrival_cdf.size(); ++k)
            if (u < arrival_cdf[k]) return static_cast<int>(k);
        return cfg.max_arrivals();
    };

    const long measured = options.slots - warmup;
    const long batch_len = std::max(1L, measured / options.batches);
    const int nbatch = static_cast<int>(std::min<long>(options.batches, measured));
    std::vector<double> q_sum(nbatch, 0.0), e_sum(nbatch, 0.0), soj_sum(nbatch, 0.0);
    std::vector<long> slot_count(nbatch, 0), soj_count(nbatch, 0);

    SimReport rep;
    rep.slots = options.slots;
    rep.warmup = warmup;
    rep.seed = options.seed;

    // FIFO of (arrival slot, packets).
    std::deque<std::pair<long, int>> fifo;
    int q = options.initial_queue;
    if (q > 0) fifo.emplace_back(0, q);
    const double abar = mean_arrival_rate(cfg.arrival);

    for (long n = 0; n < options.slots; ++n) {
        const double h = channel_cdf_inverse(cfg.channel, channel.uniform());
        int s = choose(q, h, policy_rng);
        if (s > q) {
            ++rep.underflow_overrides;
            s = q;
        }
        const double energy = cfg.energy[s] / h;
        const int a = draw_arrivals();
        const int batch = n >= warmup ? static_cast<int>(std::min<long>((n - warmup) / batch_len, nbatch - 1)) : -1;

        // Departures leave in FIFO order; a packet that arrived in slot m and
        // leaves in slot n was counted in q for n - m + 1 slots.
        for (int left = s; left > 0;) {
            auto& head = fifo.front();
            const int take = std::min(left, head.second);
            if (batch >= 0 && head.first >= warmup) {
                soj_sum[batch] += static_cast<double>(take) * (n - head.first + 1);
                soj_count[batch] += take;
            }
            head.second -= take;
            left -= take;
            if (head.second == 0) fifo.pop_front();
        }
        if (options.trace)
            *options.trace << n << ',' << q << ',' << a << ',' << format_double(h) << ',' << s << ','
                           << format_double(energy) << '\n';
        if (batch >= 0) {
            q_sum[batch] += q;
            e_sum[batch] += energy;
            ++slot_count[batch];
        }
        long dropped = 0;
        const int next = step(q, a, s, cfg.buffer_size, dropped);
        rep.drops += dropped;
        if (a - dropped > 0) fifo.emplace_back(n + 1, a - static_cast<int>(dropped));
        q = next;
    }

    BatchStats qs, es, ss;
    double q_total = 0.0, e_total = 0.0, soj_total = 0.0;
    long soj_packets = 0;
    for (int b = 0; b < nbatch; ++b) {
        qs.means.push_back(q_sum[b] / slot_count[b]);
        es.means.push_back(e_sum[b] / slot_count[b]);
        if (soj_count[b] > 0) ss.means.push_back(soj_sum[b] / soj_count[b]);
        q_total += q_sum[b];
        e_total += e_sum[b];
        soj_total += soj_sum[b];
        soj_packets += soj_count[b];
    }
    rep.batches = nbatch;
    rep.mean_queue = q_total / measured;
    rep.power = e_total / measured;
    rep.power_se = es.standard_error();
    rep.delay = abar > 0.0 ? rep.mean_queue / abar : 0.0;
    rep.delay_se = abar > 0.0 ? qs.standard_error() / abar : 0.0;
    rep.packets = soj_packets;
    rep.sojourn = soj_packets > 0 ? soj_total / soj_packets : 0.0;
    rep.sojourn_se = ss.standard_error();
    return rep;
}

int sample_row(const BinPolicy& policy, int q, int k, StreamRng& rng) {
    const int top = policy.action(q, k);
    if (policy.prob(q, k, top) >= 1.0) return top;
    const double u = rng.uniform();
    double cum = 0.0;
    for (int s = 0; s < policy.num_rates(); ++s) {
        cum += policy.prob(q, k, s);
        if (u < cum) return s;
    }
    return top;
}

}  // namespace

SimReport run_sim(const SystemConfig& cfg, const BinPolicy& policy, const SimOptions& options) {
    const auto& disc = policy.discretization();
    return simulate(cfg, options, [&](int q, double h, StreamRng& rng) {
        return sample_row(policy, q, disc.bin_of(h), rng);
    });
}

SimReport run_sim(const SystemConfig& cfg, const ThresholdPolicy& policy, const SimOptions& options) {
    return simulate(cfg, options, [&](int q, double h, StreamRng&) { return policy.rate(q, h); });
}

std::string to_key_value(const SimReport& r) {
    std::ostringstream out;
    out << "slots=" << r.slots << '\n'
        << "warmup=" << r.warmup << '\n'
        << "batches=" << r.batches << '\n'
        << "seed=" << r.seed << '\n'
        << "mean_queue=" << format_double(r.mean_queue) << '\n'
        << "delay=" << format_double(r.delay) << '\n'
        << "delay_se=" << format_double(r.delay_se) << '\n'
        << "power=" << format_double(r.power) << '\n'
        << "power_se=" << format_double(r.power_se) << '\n'
        << "sojourn=" << format_double(r.sojourn) << '\n'
        << "sojourn_se=" << format_double(r.sojourn_se) << '\n'
        << "packets=" << r.packets << '\n'
        << "drops=" << r.drops << '\n'
        << "underflow_overrides=" << r.underflow_overrides << '\n';
    return out.str();
}

std::string sim_csv_header() {
    return "slots,warmup,batches,seed,mean_queue,delay,delay_se,power,power_se,sojourn,sojourn_se,packets,drops,"
           "underflow_overrides";
}

std::string to_csv_row(const SimReport& r) {
    std::ostringstream out;
    out << r.slots << ',' << r.warmup << ',' << r.batches << ',' << r.seed << ',' << format_double(r.mean_queue)
        << ',' << format_double(r.delay) << ',' << format_double(r.delay_se) << ',' << format_double(r.power) << ','
        << format_double(r.power_se) << ',' << format_double(r.sojourn) << ',' << format_double(r.sojourn_se) << ','
        << r.packets << ',' << r.drops << ',' << r.underflow_overrides;
    return out.str();
}

}  // namespace detsched
