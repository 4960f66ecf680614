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

#include "detsched/cli.hpp"

#include "detsched/certify.hpp"
#include "detsched/construction.hpp"
#include "detsched/io.hpp"
#include "detsched/occupancy.hpp"
#include "detsched/simulator.hpp"
#include "detsched/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#ifndef DETSCHED_VERSION
#define DETSCHED_VERSION "dev"
#endif

namespace detsched {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string utc_timestamp(std::optional<std::string> forced) {
    if (forced) return *forced;
    std::time_t t = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(epoch, &end, 10);
        if (end && *end == '\0') t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Shared state of one command invocation.
struct Run {
    std::string command;
    std::string config_name = "paper_iv";
    std::string out_flag;
    std::vector<std::string> argv;  // without --out
    std::optional<std::string> forced_timestamp;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    SystemConfig cfg;
    fs::path dir;
    json params = json::object();
    std::vector<std::string> files;

    void open() {
        cfg = load_config(config_name);
        if (!out_flag.empty()) {
            dir = out_flag;
        } else if (const char* env = std::getenv("DETSCHED_OUT"); env && *env) {
            dir = env;
        } else {
            dir = "detsched_out";
        }
        fs::create_directories(dir);
    }

    void emit(const std::string& name, const std::string& contents) {
        const fs::path p = dir / name;
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        write_file_atomic(p, contents);
        files.push_back(name);
    }

    void finish() {
        std::sort(files.begin(), files.end());
        json m;
        m["command"] = command;
        m["config"] = config_name;
        m["config_resolved"] = json::parse(config_to_json(cfg));
        m["parameters"] = params;
        m["argv"] = argv;
        m["output_dir"] = dir.string();
        m["files"] = files;
        m["version"] = DETSCHED_VERSION;
        m["timestamp"] = utc_timestamp(forced_timestamp);
        write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
    }
};

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    try {
        if (text.find(':') != std::string::npos) {
            std::istringstream in(text);
            std::string lo, hi, n;
            std::getline(in, lo, ':');
            std::getline(in, hi, ':');
            std::getline(in, n, ':');
            const double a = std::stod(lo), b = std::stod(hi);
            const int count = std::stoi(n);
            if (count < 1 || b < a) throw UsageError("--dgrid lo:hi:n needs n >= 1 and lo <= hi");
            for (int i = 0; i < count; ++i) grid.push_back(count == 1 ? a : a + (b - a) * i / (count - 1));
            if (count > 1) grid.back() = b;
        } else {
            std::istringstream in(text);
            std::string cell;
            while (std::getline(in, cell, ',')) grid.push_back(std::stod(cell));
        }
    } catch (const std::logic_error&) {
        throw UsageError("--dgrid: expected lo:hi:n or a comma list, got " + text);
    }
    if (grid.empty() || !std::is_sorted(grid.begin(), grid.end())) throw UsageError("--dgrid must be sorted");
    return grid;
}

std::pair<double, double> parse_pair(const std::string& text, const char* flag) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument("");
        return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch (const std::logic_error&) {
        throw UsageError(std::string(flag) + ": expected lo,hi");
    }
}

std::string kv(const std::string& key, double v) { return key + "=" + format_double(v) + "\n"; }

int status_code(LpStatus s) {
    switch (s) {
        case LpStatus::kOptimal: return kExitOk;
        case LpStatus::kInfeasible: return kExitInfeasible;
        default: return kExitSolver;
    }
}

// ---- commands --------------------------------------------------------------

struct SolveArgs {
    int bins = 16;
    double dth = 0.0;
};

int cmd_solve(Run& r, const SolveArgs& a) {
    r.open();
    const auto disc = discretize_channel(r.cfg.channel, a.bins);
    r.params = {{"bins", a.bins}, {"dth", a.dth}};
    const auto sol = solve_constrained(r.cfg, disc, a.dth);
    std::ostringstream rep;
    rep << "status=" << to_string(sol.status) << '\n' << "bins=" << a.bins << '\n' << kv("dth", a.dth);
    if (sol.status == LpStatus::kOptimal) {
        const auto met = evaluate_measure(*sol.measure);
        const auto pol = extract_policy(*sol.measure);
        rep << kv("power", sol.objective) << kv("delay", met.delay) << kv("delay_dual", sol.delay_dual)
            << kv("residual", sol.residual) << "iterations=" << sol.iterations << '\n'
            << "policy_kind=" << (pol.kind() == PolicyKind::kDeterministic ? "deterministic" : "probabilistic")
            << '\n';
        r.emit("measure.csv", measure_to_csv(*sol.measure));
        r.emit("policy.csv", bin_policy_to_csv(pol));
    }
    r.emit("solution.txt", rep.str());
    r.finish();
    *r.out << rep.str();
    if (sol.status == LpStatus::kInfeasible) *r.err << "infeasible: D_th below the least achievable delay\n";
    return status_code(sol.status);
}

struct SweepArgs {
    std::vector<int> bins_list = {2, 4, 8, 16};
    std::string dgrid;
    int points = 60;
};

int cmd_sweep(Run& r, const SweepArgs& a) {
    r.open();
    auto bins = a.bins_list;
    if (bins.empty() || !std::is_sorted(bins.begin(), bins.end())) throw UsageError("--bins-list must be increasing");
    const auto grid =
        a.dgrid.empty() ? default_grid(r.cfg, discretize_channel(r.cfg.channel, bins.front()), a.points)
                        : parse_grid(a.dgrid);
    r.params = {{"bins_list", bins}, {"grid", grid}};
    const auto study = convergence_study(r.cfg, bins, grid);
    std::ostringstream summary;
    for (const auto& c : study.curves) {
        std::ostringstream csv;
        csv << "M,D_th,P\n";
        for (const auto& p : c.points)
            csv << c.bins << ',' << format_double(p.delay_bound) << ',' << format_double(p.power) << '\n';
        r.emit("curve_M" + std::to_string(c.bins) + ".csv", csv.str());
        summary << "M=" << c.bins << " points=" << c.points.size() << " nonincreasing=" << c.nonincreasing
                << " convex=" << c.convex << '\n';
        for (const auto& n : c.notes) summary << "note M=" << c.bins << ": " << n << '\n';
    }
    summary << kv("dominance_violation", study.dominance_violation);
    for (size_t i = 0; i < study.sup_gaps.size(); ++i)
        summary << "sup_gap_M" << bins[i] << "_M" << bins[i + 1] << '=' << format_double(study.sup_gaps[i]) << '\n';
    r.emit("summary.txt", summary.str());
    r.finish();
    *r.out << summary.str();
    return kExitOk;
}

struct VerticesArgs {
    int bins = 16;
    std::optional<double> lambda_max;
    double tol = 1e-9;
    std::string window;
};

int cmd_vertices(Run& r, const VerticesArgs& a) {
    r.open();
    const auto disc = discretize_channel(r.cfg.channel, a.bins);
    const double lmax = a.lambda_max.value_or(default_lambda_max(r.cfg));
    double lo, hi;
    if (a.window.empty()) {
        lo = min_delay(r.cfg, disc);
        hi = 3.0 * lo;
    } else {
        std::tie(lo, hi) = parse_pair(a.window, "--window");
    }
    r.params = {{"bins", a.bins}, {"lambda_max", lmax}, {"tol", a.tol}, {"window", {lo, hi}}};
    const auto all = enumerate_vertices(r.cfg, disc, lmax, a.tol);

    std::ostringstream vcsv;
    vcsv << "M,D,P,policy_id\n";
    for (size_t i = 0; i < all.size(); ++i) {
        std::ostringstream id;
        id << 'M' << a.bins << "_v" << std::setw(3) << std::setfill('0') << i;
        vcsv << a.bins << ',' << format_double(all[i].delay) << ',' << format_double(all[i].power) << ',' << id.str()
             << '\n';
        r.emit("policies/" + id.str() + ".csv", bin_policy_to_csv(all[i].policy));
    }
    r.emit("vertices.csv", vcsv.str());

    TradeoffCurve curve;
    curve.bins = a.bins;
    attach_vertices(curve, all, lo, hi);
    const auto full = vertex_distances(all);
    const auto dump = [&](const std::vector<VertexDistance>& d) {
        std::ostringstream csv;
        csv << "M,pair_index,euclidean,delay_axis\n";
        for (size_t i = 0; i < d.size(); ++i)
            csv << a.bins << ',' << i << ',' << format_double(d[i].euclidean) << ',' << format_double(d[i].delay_axis)
                << '\n';
        return csv.str();
    };
    r.emit("distances.csv", dump(curve.distances));
    r.emit("distances_full.csv", dump(full));

    const auto max_of = [](const std::vector<VertexDistance>& d, bool euclid) {
        double m = 0.0;
        for (const auto& x : d) m = std::max(m, euclid ? x.euclidean : x.delay_axis);
        return m;
    };
    std::ostringstream summary;
    summary << "bins=" << a.bins << "\nvertices=" << all.size() << "\nwindow_vertices=" << curve.vertices.size()
            << '\n'
            << kv("window_lo", lo) << kv("window_hi", hi) << kv("max_euclidean_window", max_of(curve.distances, true))
            << kv("max_delay_axis_window", max_of(curve.distances, false)) << kv("max_euclidean_full", max_of(full, true))
            << kv("max_delay_axis_full", max_of(full, false));
    r.emit("summary.txt", summary.str());
    r.finish();
    *r.out << summary.str();
    return kExitOk;
}

struct ConstructArgs {
    int bins = 16;
    std::optional<double> dth;
    int cells = 64;
    int samples = 10000;
};

int cmd_construct(Run& r, const ConstructArgs& a) {
    r.open();
    if (a.cells < 1) throw UsageError("--M must be >= 1");
    const auto disc = discretize_channel(r.cfg.channel, a.bins);
    const double dth = a.dth.value_or(3.0 * min_delay(r.cfg, disc));
    r.params = {{"bins", a.bins}, {"dth", dth}, {"M", a.cells}, {"samples", a.samples}};
    const auto sol = solve_constrained(r.cfg, disc, dth);
    if (sol.status != LpStatus::kOptimal) {
        *r.err << "LP " << to_string(sol.status) << " at D_th=" << format_double(dth) << '\n';
        r.emit("report.txt", "status=" + to_string(sol.status) + "\n");
        r.finish();
        return status_code(sol.status);
    }
    const auto d = density_from_measure(*sol.measure);
    const auto y = construct_yM(d, a.cells);
    const auto f = verify_feasibility(y, a.samples, dth);
    const auto det = verify_deterministic(y, a.samples);
    const auto pr = power_ratio(y, d);

    std::ostringstream rep;
    rep << "status=optimal\nbins=" << a.bins << "\nM=" << a.cells << '\n'
        << kv("dth", dth) << kv("source_power", pr.source) << kv("constructed_power", pr.constructed)
        << kv("ratio", pr.ratio) << kv("bound", pr.bound) << "within_bound=" << (pr.within_bound ? "true" : "false")
        << '\n'
        << kv("delay", f.delay) << kv("channel_marginal", f.channel_marginal) << kv("queue_balance", f.queue_balance)
        << kv("delay_match", f.delay_match) << kv("delay_excess", f.delay_excess)
        << kv("nonnegativity", f.nonnegativity) << kv("structural_zeros", f.structural_zeros)
        << kv("rate_preservation", f.rate_preservation) << kv("partition", f.partition)
        << kv("telescoping", f.telescoping) << kv("total_mass_error", f.total_mass_error)
        << "deterministic=" << (det.deterministic ? "true" : "false") << '\n'
        << "points_checked=" << det.points_checked << '\n';
    if (det.witness) {
        const auto& w = *det.witness;
        rep << "witness_q=" << w.queue << '\n' << kv("witness_h", w.h) << "witness_rates=" << w.rate_a << ','
            << w.rate_b << '\n';
    }
    const bool feasible = std::max({f.channel_marginal, f.queue_balance, f.delay_match, f.delay_excess,
                                    f.nonnegativity, f.structural_zeros}) <= 1e-8 &&
                          f.rate_preservation <= 1e-10;
    const bool ok = feasible && det.deterministic && pr.within_bound;
    rep << "verified=" << (ok ? "true" : "false") << '\n';
    if (det.deterministic) r.emit("thresholds.csv", threshold_policy_to_csv(yM_to_policy(y)));
    r.emit("report.txt", rep.str());
    r.finish();
    *r.out << rep.str();
    return ok ? kExitOk : kExitVerification;
}

struct SimulateArgs {
    std::string policy;
    long slots = 1'000'000;
    std::uint64_t seed = 1;
    std::optional<long> warmup;
    int batches = 50;
    bool trace = false;
};

int cmd_simulate(Run& r, const SimulateArgs& a) {
    r.open();
    if (!fs::exists(a.policy)) throw UsageError("policy file not found: " + a.policy);
    const auto text = read_file(a.policy);
    SimOptions opt;
    opt.slots = a.slots;
    opt.seed = a.seed;
    opt.warmup = a.warmup;
    opt.batches = a.batches;
    std::ostringstream trace;
    if (a.trace) {
        trace << "slot,q,a,h,s,energy\n";
        opt.trace = &trace;
    }
    r.params = {{"policy", a.policy}, {"slots", a.slots}, {"seed", a.seed}, {"batches", a.batches},
                {"trace", a.trace}};
    if (a.warmup) r.params["warmup"] = *a.warmup;
    SimReport rep;
    if (is_threshold_policy_csv(text)) {
        rep = run_sim(r.cfg, parse_threshold_policy(r.cfg, text), opt);
    } else {
        rep = run_sim(r.cfg, parse_bin_policy(r.cfg, text), opt);
    }
    r.emit("sim.txt", to_key_value(rep));
    r.emit("sim.csv", sim_csv_header() + "\n" + to_csv_row(rep) + "\n");
    if (a.trace) r.emit("trace.csv", trace.str());
    r.finish();
    *r.out << to_key_value(rep);
    return kExitOk;
}

struct VerifyArgs {
    int bins = 16;
    std::optional<double> dth;
    bool no_oracles = false;
    std::uint64_t seed = 1;
    int lps = 200;
};

int cmd_verify(Run& r, const VerifyArgs& a) {
    r.open();
    CertifyOptions o;
    o.lp_bins = a.bins;
    if (a.dth) o.delay_bound = *a.dth;
    o.oracles = !a.no_oracles;
    o.seed = a.seed;
    o.random_lps = a.lps;
    r.params = {{"bins", a.bins}, {"oracles", o.oracles}, {"seed", a.seed}, {"random_lps", a.lps}};
    if (a.dth) r.params["dth"] = *a.dth;
    const auto checks = certify(r.cfg, o);
    r.emit("verify.txt", checks_to_key_value(checks));
    r.finish();
    *r.out << checks_to_table(checks);
    const bool ok = std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    int failed = 0;
    for (const auto& c : checks) failed += c.pass ? 0 : 1;
    *r.out << (ok ? "all checks passed\n" : std::to_string(failed) + " check(s) failed\n");
    return ok ? kExitOk : kExitVerification;
}

std::vector<std::string> strip_out(const std::vector<std::string>& args) {
    std::vector<std::string> kept;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out") {
            ++i;
            continue;
        }
        if (args[i].rfind("--out=", 0) == 0) continue;
        kept.push_back(args[i]);
    }
    return kept;
}

int run_impl(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             std::optional<std::string> forced_timestamp, int depth);

int cmd_rerun(const std::string& manifest_path, const std::string& out_flag, std::ostream& out, std::ostream& err,
              int depth) {
    if (depth > 0) throw UsageError("rerun cannot be nested");
    if (!fs::exists(manifest_path)) throw UsageError("manifest not found: " + manifest_path);
    json m;
    try {
        m = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw UsageError(std::string("manifest: ") + e.what());
    }
    if (!m.contains("argv") || !m["argv"].is_array() || !m.contains("output_dir"))
        throw UsageError("manifest: missing argv or output_dir");
    auto args = m["argv"].get<std::vector<std::string>>();
    args.push_back("--out");
    args.push_back(out_flag.empty() ? m["output_dir"].get<std::string>() : out_flag);
    std::optional<std::string> ts;
    if (m.contains("timestamp") && m["timestamp"].is_string()) ts = m["timestamp"].get<std::string>();
    return run_impl(args, out, err, ts, depth + 1);
}

void add_common(CLI::App* sub, Run& r) {
    sub->add_option("--config", r.config_name, "built-in name or JSON file")->capture_default_str();
    sub->add_option("--out", r.out_flag, "output directory (default $DETSCHED_OUT or ./detsched_out)");
}

int run_impl(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             std::optional<std::string> forced_timestamp, int depth) {
    CLI::App app{"delay-constrained power-minimal scheduling over a fading link", "detsched"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DETSCHED_VERSION);

    Run r;
    r.out = &out;
    r.err = &err;
    r.forced_timestamp = forced_timestamp;

    SolveArgs solve;
    auto* s_solve = app.add_subcommand("solve", "one constrained LP");
    add_common(s_solve, r);
    s_solve->add_option("--bins", solve.bins, "channel bins M")->capture_default_str()->check(CLI::PositiveNumber);
    s_solve->add_option("--dth", solve.dth, "delay bound (slots)")->required();

    SweepArgs sweep;
    auto* s_sweep = app.add_subcommand("sweep", "tradeoff curves for several bin counts");
    add_common(s_sweep, r);
    s_sweep->add_option("--bins-list", sweep.bins_list, "increasing bin counts")
        ->delimiter(',')
        ->capture_default_str();
    s_sweep->add_option("--dgrid", sweep.dgrid, "lo:hi:n or comma list (default D_min..3 D_min)");
    s_sweep->add_option("--points", sweep.points, "default grid size")->capture_default_str();

    VerticesArgs vert;
    auto* s_vert = app.add_subcommand("vertices", "vertices of the tradeoff curve and their distances");
    add_common(s_vert, r);
    s_vert->add_option("--bins", vert.bins, "channel bins M")->capture_default_str()->check(CLI::PositiveNumber);
    s_vert->add_option("--lambda-max", vert.lambda_max, "largest delay weight (default 1e4 xi(S_max)/h_min)");
    s_vert->add_option("--tol", vert.tol, "vertex tolerance")->capture_default_str();
    s_vert->add_option("--window", vert.window, "lo,hi delay window for distances (default D_min,3 D_min)");

    ConstructArgs cons;
    auto* s_cons = app.add_subcommand("construct", "threshold policy from an LP solution");
    add_common(s_cons, r);
    s_cons->add_option("--bins", cons.bins, "LP channel bins")->capture_default_str()->check(CLI::PositiveNumber);
    s_cons->add_option("--dth", cons.dth, "delay bound (default 3 D_min)");
    s_cons->add_option("--M", cons.cells, "construction cells")->capture_default_str();
    s_cons->add_option("--samples", cons.samples, "sample points for the sampled checks")->capture_default_str();

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "Monte Carlo run of a policy file");
    add_common(s_sim, r);
    s_sim->add_option("--policy", sim.policy, "policy.csv or thresholds.csv")->required();
    s_sim->add_option("--slots", sim.slots, "slots")->capture_default_str()->check(CLI::PositiveNumber);
    s_sim->add_option("--seed", sim.seed, "seed")->capture_default_str();
    s_sim->add_option("--warmup", sim.warmup, "discarded slots (default max(slots/10, 1000))");
    s_sim->add_option("--batches", sim.batches, "batches for standard errors")->capture_default_str();
    s_sim->add_flag("--trace", sim.trace, "write trace.csv");

    VerifyArgs ver;
    auto* s_ver = app.add_subcommand("verify", "certification battery and oracles");
    add_common(s_ver, r);
    s_ver->add_option("--bins", ver.bins, "LP channel bins")->capture_default_str()->check(CLI::PositiveNumber);
    s_ver->add_option("--dth", ver.dth, "delay bound (default 3 D_min)");
    s_ver->add_flag("--no-oracles", ver.no_oracles, "skip the brute-force oracles");
    s_ver->add_option("--seed", ver.seed, "seed for random LPs")->capture_default_str();
    s_ver->add_option("--lps", ver.lps, "random LPs")->capture_default_str();

    std::string manifest, rerun_out;
    auto* s_rerun = app.add_subcommand("rerun", "repeat the command recorded in a manifest");
    s_rerun->add_option("--manifest", manifest, "manifest.json")->required();
    s_rerun->add_option("--out", rerun_out, "output directory (default: the recorded one)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    r.argv = strip_out(args);
    try {
        if (s_rerun->parsed()) return cmd_rerun(manifest, rerun_out, out, err, depth);
        if (s_solve->parsed()) r.command = "solve";
        if (s_sweep->parsed()) r.command = "sweep";
        if (s_vert->parsed()) r.command = "vertices";
        if (s_cons->parsed()) r.command = "construct";
        if (s_sim->parsed()) r.command = "simulate";
        if (s_ver->parsed()) r.command = "verify";
        if (r.command == "solve") return cmd_solve(r, solve);
        if (r.command == "sweep") return cmd_sweep(r, sweep);
        if (r.command == "vertices") return cmd_vertices(r, vert);
        if (r.command == "construct") return cmd_construct(r, cons);
        if (r.command == "simulate") return cmd_simulate(r, sim);
        if (r.command == "verify") return cmd_verify(r, ver);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DeterminismError& e) {
        err << "verification failure: " << e.what() << '\n';
        return kExitVerification;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "solver anomaly: " << e.what() << '\n';
        return kExitSolver;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    return run_impl(args, out, err, std::nullopt, 0);
}

}  // namespace detsched
