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

#include "detsched/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace detsched {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw ConfigError(path + key + ": missing");
    return obj.at(key);
}

double get_number(const json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_number()) throw ConfigError(path + key + ": expected a number");
    return v.get<double>();
}

int get_int(const json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_number_integer()) throw ConfigError(path + key + ": expected an integer");
    return v.get<int>();
}

std::vector<double> get_numbers(const json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_array()) throw ConfigError(path + key + ": expected an array");
    std::vector<double> out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(path + key + "[" + std::to_string(i) + "]: expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    return out;
}

struct CsvTable {
    std::map<std::string, size_t> columns;
    std::vector<std::vector<std::string>> rows;

    size_t column(const std::string& name) const {
        const auto it = columns.find(name);
        if (it == columns.end()) throw ConfigError("policy file: missing column " + name);
        return it->second;
    }
};

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("policy file: empty");
    const auto header = split(line, ',');
    for (size_t i = 0; i < header.size(); ++i) t.columns[header[i]] = i;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != header.size()) throw ConfigError("policy file: ragged row: " + line);
        t.rows.push_back(std::move(cells));
    }
    return t;
}

double to_double(const std::string& s) {
    try {
        size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ConfigError("bad number: " + s);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("bad number: " + s);
    }
}

int to_int(const std::string& s) {
    try {
        size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw ConfigError("bad integer: " + s);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("bad integer: " + s);
    }
}

}  // namespace

SystemConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: expected an object");

    SystemConfig cfg;
    cfg.arrival.alphas = get_numbers(require(doc, "arrival", ""), "alphas", "arrival.");

    const auto& ch = require(doc, "channel", "");
    const auto& kind_v = require(ch, "kind", "channel.");
    if (!kind_v.is_string()) throw ConfigError("channel.kind: expected a string");
    const auto kind = kind_v.get<std::string>();
    const double h_min = get_number(ch, "h_min", "channel.");
    const double h_max = get_number(ch, "h_max", "channel.");
    if (kind == "uniform") {
        cfg.channel = ChannelModel::uniform(h_min, h_max);
    } else if (kind == "piecewise") {
        const auto& table = require(ch, "table", "channel.");
        if (!table.is_array()) throw ConfigError("channel.table: expected an array");
        std::vector<std::pair<double, double>> pairs;
        for (size_t i = 0; i < table.size(); ++i) {
            const auto& e = table[i];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ConfigError("channel.table[" + std::to_string(i) + "]: expected [edge, value]");
            pairs.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        cfg.channel = ChannelModel::piecewise(h_min, h_max, pairs);
    } else {
        throw ConfigError("channel.kind: expected \"uniform\" or \"piecewise\"");
    }

    cfg.buffer_size = get_int(doc, "Q", "");
    cfg.max_rate = get_int(doc, "S_max", "");
    if (cfg.max_rate < 0) throw ConfigError("S_max: must be >= 0");
    if (doc.contains("xi")) {
        cfg.energy = get_numbers(doc, "xi", "");
    } else if (doc.contains("xi_kind")) {
        const auto& v = doc.at("xi_kind");
        if (!v.is_string() || v.get<std::string>() != "exp2minus1")
            throw ConfigError("xi_kind: expected \"exp2minus1\"");
        cfg.energy = exp2_minus_one_energy(cfg.max_rate);
    } else {
        throw ConfigError("xi: missing (give xi or xi_kind)");
    }
    validate_config(cfg);
    return cfg;
}

SystemConfig load_config(const std::string& name_or_path) {
    if (name_or_path == "paper_iv") return builtin_config(name_or_path);
    if (!std::filesystem::exists(name_or_path)) throw ConfigError("config file not found: " + name_or_path);
    return parse_config(read_file(name_or_path));
}

std::string config_to_json(const SystemConfig& cfg) {
    json doc;
    doc["arrival"]["alphas"] = cfg.arrival.alphas;
    if (cfg.channel.kind() == DensityKind::kUniform) {
        doc["channel"] = {{"kind", "uniform"}, {"h_min", cfg.channel.h_min()}, {"h_max", cfg.channel.h_max()}};
    } else {
        json table = json::array();
        for (size_t i = 0; i < cfg.channel.values().size(); ++i)
            table.push_back({cfg.channel.breaks()[i], cfg.channel.values()[i]});
        doc["channel"] = {{"kind", "piecewise"},
                          {"h_min", cfg.channel.h_min()},
                          {"h_max", cfg.channel.h_max()},
                          {"table", table}};
    }
    doc["Q"] = cfg.buffer_size;
    doc["S_max"] = cfg.max_rate;
    doc["xi"] = cfg.energy;
    return doc.dump(2) + "\n";
}

std::string measure_to_csv(const OccupancyMeasure& m) {
    std::ostringstream out;
    out << "q,s,k,g\n";
    const auto& cfg = m.config();
    for (int q = 0; q < cfg.num_queue_states(); ++q)
        for (int s = 0; s < cfg.num_rates(); ++s)
            for (int k = 0; k < m.discretization().bins(); ++k)
                if (cfg.admissible(q, s)) out << q << ',' << s << ',' << k << ',' << format_double(m.at(q, s, k)) << '\n';
    return out.str();
}

std::string bin_policy_to_csv(const BinPolicy& policy) {
    std::ostringstream out;
    out << "q,k,h_lo,h_hi,transient";
    for (int s = 0; s < policy.num_rates(); ++s) out << ",f_" << s;
    out << '\n';
    const auto& disc = policy.discretization();
    for (int q = 0; q < policy.num_queue_states(); ++q) {
        for (int k = 0; k < policy.bins(); ++k) {
            out << q << ',' << k << ',' << format_double(disc.edges[k]) << ',' << format_double(disc.edges[k + 1])
                << ',' << (policy.transient(q, k) ? 1 : 0);
            for (int s = 0; s < policy.num_rates(); ++s) out << ',' << format_double(policy.prob(q, k, s));
            out << '\n';
        }
    }
    return out.str();
}

std::string threshold_policy_to_csv(const ThresholdPolicy& policy) {
    std::ostringstream out;
    out << "q,h_lo,h_hi,s\n";
    for (size_t q = 0; q < policy.rules.size(); ++q)
        for (const auto& r : policy.rules[q])
            out << q << ',' << format_double(r.lo) << ',' << format_double(r.hi) << ',' << r.rate << '\n';
    return out.str();
}

bool is_threshold_policy_csv(const std::string& text) {
    return text.rfind("q,h_lo,h_hi,s", 0) == 0;
}

BinPolicy parse_bin_policy(const SystemConfig& cfg, const std::string& text) {
    const auto t = parse_csv(text);
    const size_t cq = t.column("q"), ck = t.column("k"), clo = t.column("h_lo"), chi = t.column("h_hi"),
                 ct = t.column("transient");
    std::vector<size_t> cf;
    for (int s = 0; s < cfg.num_rates(); ++s) cf.push_back(t.column("f_" + std::to_string(s)));

    int bins = 0;
    for (const auto& row : t.rows) bins = std::max(bins, to_int(row[ck]) + 1);
    ChannelDiscretization disc = discretize_channel(cfg.channel, bins);
    for (const auto& row : t.rows) {
        const int k = to_int(row[ck]);
        disc.edges[k] = to_double(row[clo]);
        disc.edges[k + 1] = to_double(row[chi]);
    }
    if (t.rows.size() != static_cast<size_t>(cfg.num_queue_states()) * bins)
        throw ConfigError("policy file: expected one row per (q, k)");
    BinPolicy pol(cfg, disc);
    bool one_hot = true;
    for (const auto& row : t.rows) {
        const int q = to_int(row[cq]);
        const int k = to_int(row[ck]);
        if (q < 0 || q >= cfg.num_queue_states()) throw ConfigError("policy file: q out of range");
        pol.set_transient(q, k, to_int(row[ct]) != 0);
        for (int s = 0; s < cfg.num_rates(); ++s) {
            pol.prob(q, k, s) = to_double(row[cf[s]]);
            if (pol.prob(q, k, s) != 0.0 && pol.prob(q, k, s) != 1.0) one_hot = false;
        }
    }
    pol.set_kind(one_hot ? PolicyKind::kDeterministic : PolicyKind::kProbabilistic);
    return pol;
}

ThresholdPolicy parse_threshold_policy(const SystemConfig& cfg, const std::string& text) {
    const auto t = parse_csv(text);
    const size_t cq = t.column("q"), clo = t.column("h_lo"), chi = t.column("h_hi"), cs = t.column("s");
    ThresholdPolicy pol;
    pol.h_min = cfg.channel.h_min();
    pol.h_max = cfg.channel.h_max();
    pol.rules.resize(cfg.num_queue_states());
    pol.transient.assign(cfg.num_queue_states(), 0);
    for (const auto& row : t.rows) {
        const int q = to_int(row[cq]);
        if (q < 0 || q >= cfg.num_queue_states()) throw ConfigError("policy file: q out of range");
        pol.rules[q].push_back({to_double(row[clo]), to_double(row[chi]), to_int(row[cs])});
    }
    for (int q = 0; q < cfg.num_queue_states(); ++q)
        if (pol.rules[q].empty()) throw ConfigError("policy file: no rules for q=" + std::to_string(q));
    return pol;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        if (!out) throw std::runtime_error("short write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detsched
