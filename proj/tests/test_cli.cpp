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
#include "detsched/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using detsched::run;

namespace {

struct Result {
    int code = 0;
    std::string out, err;
};

Result call(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Result r;
    r.code = run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("detsched_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = detsched::read_file(e.path());
    return files;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

}  // namespace

TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    CHECK(call({"solve", "--dth", "0.01", "--bins", "4", "--out", dir.string()}).code == detsched::kExitInfeasible);
    CHECK(call({"frobnicate"}).code == detsched::kExitUsage);
    CHECK(call({}).code == detsched::kExitUsage);
    CHECK(call({"--help"}).code == detsched::kExitOk);
    CHECK(call({"solve", "--help"}).code == detsched::kExitOk);
    CHECK(call({"solve", "--bins", "4"}).code == detsched::kExitUsage);  // --dth is required
    CHECK(call({"solve", "--bins", "0", "--dth", "2"}).code == detsched::kExitUsage);

    const auto bad = dir / "bad.json";
    fs::create_directories(dir);
    detsched::write_file_atomic(bad, R"({"arrival": {"alphas": [0.5, 0.6]}})");
    const auto r = call({"solve", "--config", bad.string(), "--dth", "2", "--out", dir.string()});
    CHECK(r.code == detsched::kExitUsage);
    CHECK(r.err.find("config error") != std::string::npos);
    CHECK(call({"solve", "--config", (dir / "missing.json").string(), "--dth", "2"}).code == detsched::kExitUsage);
    CHECK(call({"rerun", "--manifest", (dir / "nope.json").string()}).code == detsched::kExitUsage);
    fs::remove_all(dir);
}

TEST_CASE("solve writes its files and a manifest") {
    const auto dir = scratch("solve");
    const auto r = call({"solve", "--bins", "4", "--dth", "2.5", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("status=optimal") == 0);
    const auto files = snapshot(dir);
    CHECK(first_line(files.at("measure.csv")) == "q,s,k,g");
    CHECK(first_line(files.at("policy.csv")) == "q,k,h_lo,h_hi,transient,f_0,f_1,f_2");
    CHECK(files.at("solution.txt").find("policy_kind=") != std::string::npos);

    const auto m = nlohmann::json::parse(files.at("manifest.json"));
    CHECK(m["command"] == "solve");
    CHECK(m["config"] == "paper_iv");
    CHECK(m["parameters"]["bins"] == 4);
    CHECK(m["output_dir"] == dir.string());
    CHECK(m["files"].size() == 3u);
    CHECK(m["config_resolved"]["Q"] == 10);
    for (const auto& a : m["argv"]) CHECK(a != "--out");
    fs::remove_all(dir);
}

TEST_CASE("SOURCE_DATE_EPOCH pins the manifest timestamp") {
    const auto dir = scratch("epoch");
    setenv("SOURCE_DATE_EPOCH", "86400", 1);
    REQUIRE(call({"solve", "--bins", "2", "--dth", "2", "--out", dir.string()}).code == 0);
    unsetenv("SOURCE_DATE_EPOCH");
    const auto m = nlohmann::json::parse(detsched::read_file(dir / "manifest.json"));
    CHECK(m["timestamp"] == "1970-01-02T00:00:00Z");
    fs::remove_all(dir);
}

TEST_CASE("sweep, vertices, construct, simulate") {
    const auto dir = scratch("all");
    const auto sweep = call({"sweep", "--bins-list", "2,4", "--dgrid", "1:3:5", "--out", (dir / "sweep").string()});
    REQUIRE(sweep.code == 0);
    auto files = snapshot(dir / "sweep");
    CHECK(first_line(files.at("curve_M2.csv")) == "M,D_th,P");
    CHECK(files.count("curve_M4.csv") == 1u);
    CHECK(files.at("summary.txt").find("sup_gap_M2_M4=") != std::string::npos);
    CHECK(call({"sweep", "--bins-list", "4,2", "--out", (dir / "sweep").string()}).code == detsched::kExitUsage);
    CHECK(call({"sweep", "--dgrid", "3:1:5", "--out", (dir / "sweep").string()}).code == detsched::kExitUsage);

    const auto vert = call({"vertices", "--bins", "2", "--out", (dir / "vert").string()});
    REQUIRE(vert.code == 0);
    files = snapshot(dir / "vert");
    CHECK(first_line(files.at("vertices.csv")) == "M,D,P,policy_id");
    CHECK(files.count("policies/M2_v000.csv") == 1u);
    CHECK(first_line(files.at("distances.csv")) == "M,pair_index,euclidean,delay_axis");
    CHECK(files.count("distances_full.csv") == 1u);
    CHECK(call({"vertices", "--bins", "2", "--lambda-max", "0.001", "--out", (dir / "vert2").string()}).code ==
          detsched::kExitSolver);

    const auto cons = call({"construct", "--bins", "4", "--M", "8", "--samples", "500", "--out", (dir / "cons").string()});
    files = snapshot(dir / "cons");
    const auto& report = files.at("report.txt");
    CHECK(report.find("deterministic=true") != std::string::npos);
    // The exit status follows the report's overall verdict, ratio bound included.
    const bool verified = report.find("verified=true") != std::string::npos;
    CHECK(cons.code == (verified ? detsched::kExitOk : detsched::kExitVerification));
    CHECK(verified == (report.find("within_bound=true") != std::string::npos));
    CHECK(first_line(files.at("thresholds.csv")).rfind("q,h_lo,h_hi,s", 0) == 0);

    for (const auto& policy : {dir / "cons" / "thresholds.csv", dir / "vert" / "policies" / "M2_v000.csv"}) {
        const auto out = dir / "sim";
        const auto sim = call({"simulate", "--policy", policy.string(), "--slots", "5000", "--trace", "--out", out.string()});
        REQUIRE(sim.code == 0);
        files = snapshot(out);
        CHECK(first_line(files.at("sim.csv")).rfind("slots,warmup", 0) == 0);
        CHECK(first_line(files.at("trace.csv")) == "slot,q,a,h,s,energy");
        CHECK(files.at("sim.txt").find("drops=") != std::string::npos);
    }
    CHECK(call({"simulate", "--policy", (dir / "none.csv").string(), "--out", (dir / "sim").string()}).code ==
          detsched::kExitUsage);
    fs::remove_all(dir);
}

TEST_CASE("rerun from a manifest reproduces every byte") {
    const auto dir = scratch("rerun");
    REQUIRE(call({"vertices", "--bins", "2", "--out", dir.string()}).code == 0);
    const auto before = snapshot(dir);
    REQUIRE(call({"rerun", "--manifest", (dir / "manifest.json").string()}).code == 0);
    CHECK(snapshot(dir) == before);

    const auto other = scratch("rerun_other");
    REQUIRE(call({"rerun", "--manifest", (dir / "manifest.json").string(), "--out", other.string()}).code == 0);
    auto moved = snapshot(other);
    for (const auto& [name, text] : before)
        if (name != "manifest.json") CHECK(moved.at(name) == text);
    fs::remove_all(dir);
    fs::remove_all(other);
}
