/*
 * Copyright 2026 The pqscope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
 * implied.  See the License for the specific language governing
 * permissions and limitations under the License.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqscope/errors.hpp"

// The 19-feature side-channel sample schema: 12 per-core cycle counters plus
// 7 process memory fields in kibibytes, exactly as /proc reports them.
// Devices with fewer cores leave the upper core columns at zero.

namespace pqscope::features {

inline constexpr std::size_t kNumCores = 12;
inline constexpr std::size_t kNumMemory = 7;
inline constexpr std::size_t kNumFeatures = kNumCores + kNumMemory; // 19
inline constexpr std::size_t kFirstMemoryFeature = kNumCores;

inline const std::array<std::string, kNumFeatures>& feature_names() {
    static const std::array<std::string, kNumFeatures> names = {
        "core_0",     "core_1",     "core_2",     "core_3",    "core_4",    "core_5",
        "core_6",     "core_7",     "core_8",     "core_9",    "core_10",   "core_11",
        "vm_size_kb", "vm_rss_kb",  "vm_data_kb", "vm_stk_kb", "vm_exe_kb", "vm_lib_kb",
        "vm_pte_kb"};
    return names;
}

inline std::optional<std::size_t> feature_index(const std::string& name) {
    const auto& names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

struct FeatureVector {
    std::array<double, kNumFeatures> values{};
    std::string label;
    bool operator==(const FeatureVector&) const = default;
};

struct Dataset {
    std::vector<FeatureVector> rows;
    std::vector<std::string> classes; // distinct labels, first-seen order
    std::vector<std::string> warnings;
    bool has_labels = false;

    void rebuild_classes() {
        classes.clear();
        for (const auto& r : rows)
            if (!r.label.empty() &&
                std::find(classes.begin(), classes.end(), r.label) == classes.end())
                classes.push_back(r.label);
        has_labels = !classes.empty();
    }

    std::size_t class_index(const std::string& label) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == label) return i;
        return classes.size();
    }

    bool operator==(const Dataset& o) const {
        return rows == o.rows && classes == o.classes && has_labels == o.has_labels;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline double parse_cell(const std::string& cell, std::size_t row) {
    std::string t = trim(cell);
    if (t.empty()) raise(Errc::value_error, "empty cell at row " + std::to_string(row));
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v))
        raise(Errc::value_error, "non-numeric cell '" + t + "' at row " + std::to_string(row));
    if (v < 0)
        raise(Errc::value_error, "negative value " + t + " at row " + std::to_string(row));
    return v;
}

} // namespace detail

// Strict header contract: names must match the schema exactly; the seven
// memory columns are required, core columns may be a prefix subset (fewer
// cores than 12), the label column is optional.
inline Dataset load_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) raise(Errc::schema_error, "empty file, header expected");
    auto header = detail::split_csv_line(line);
    std::vector<int> column_to_feature(header.size(), -1); // -2 = label
    std::array<bool, kNumFeatures> seen{};
    int label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = detail::trim(header[i]);
        if (name == "label") {
            if (label_col >= 0) raise(Errc::schema_error, "duplicate label column");
            label_col = static_cast<int>(i);
            column_to_feature[i] = -2;
            continue;
        }
        auto idx = feature_index(name);
        if (!idx) raise(Errc::schema_error, "unknown column '" + name + "'");
        if (seen[*idx]) raise(Errc::schema_error, "duplicate column '" + name + "'");
        seen[*idx] = true;
        column_to_feature[i] = static_cast<int>(*idx);
    }
    for (std::size_t f = kFirstMemoryFeature; f < kNumFeatures; ++f)
        if (!seen[f])
            raise(Errc::schema_error, "missing required column '" + feature_names()[f] + "'");

    Dataset ds;
    ds.has_labels = label_col >= 0;
    std::vector<std::size_t> missing_cores;
    for (std::size_t f = 0; f < kNumCores; ++f)
        if (!seen[f]) missing_cores.push_back(f);
    if (!missing_cores.empty())
        ds.warnings.push_back(std::to_string(missing_cores.size()) +
                              " core column(s) absent, zero-filled");

    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        ++row_index;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            raise(Errc::value_error, "row " + std::to_string(row_index) + " has " +
                                         std::to_string(cells.size()) + " cells, expected " +
                                         std::to_string(header.size()));
        FeatureVector fv;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (column_to_feature[i] == -2) fv.label = detail::trim(cells[i]);
            else fv.values[column_to_feature[i]] = detail::parse_cell(cells[i], row_index);
        }
        ds.rows.push_back(std::move(fv));
    }
    ds.rebuild_classes();
    ds.has_labels = label_col >= 0;
    return ds;
}

inline std::string format_value(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string write_csv(const Dataset& ds) {
    std::string out;
    const auto& names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    if (ds.has_labels) out += ",label";
    out += '\n';
    for (const auto& r : ds.rows) {
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            if (i) out += ',';
            out += format_value(r.values[i]);
        }
        if (ds.has_labels) {
            out += ',';
            out += r.label;
        }
        out += '\n';
    }
    return out;
}

struct MemoryFields {
    double vm_size_kb = 0, vm_rss_kb = 0, vm_data_kb = 0, vm_stk_kb = 0, vm_exe_kb = 0,
           vm_lib_kb = 0, vm_pte_kb = 0;

    std::array<double, kNumMemory> as_array() const {
        return {vm_size_kb, vm_rss_kb, vm_data_kb, vm_stk_kb, vm_exe_kb, vm_lib_kb, vm_pte_kb};
    }
};

// /proc/[pid]/status extraction; field order in the file does not matter.
inline MemoryFields parse_proc_status(const std::string& text) {
    static const std::array<std::string, kNumMemory> wanted = {
        "VmSize", "VmRSS", "VmData", "VmStk", "VmExe", "VmLib", "VmPTE"};
    std::array<std::optional<double>, kNumMemory> found;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = detail::trim(line.substr(0, colon));
        for (std::size_t i = 0; i < wanted.size(); ++i) {
            if (key != wanted[i]) continue;
            std::string rest = detail::trim(line.substr(colon + 1));
            char* end = nullptr;
            double v = std::strtod(rest.c_str(), &end);
            std::string unit = detail::trim(end ? std::string(end) : "");
            if (unit != "kB")
                raise(Errc::parse_error, wanted[i] + " has unexpected unit '" + unit + "'");
            found[i] = v;
        }
    }
    for (std::size_t i = 0; i < wanted.size(); ++i)
        if (!found[i]) raise(Errc::missing_field, wanted[i]);
    MemoryFields m;
    m.vm_size_kb = *found[0];
    m.vm_rss_kb = *found[1];
    m.vm_data_kb = *found[2];
    m.vm_stk_kb = *found[3];
    m.vm_exe_kb = *found[4];
    m.vm_lib_kb = *found[5];
    m.vm_pte_kb = *found[6];
    return m;
}

// Machine-readable per-core cycle counter rows: "CPU0,123456,,cycles,...".
// "<not counted>" rows map to zero with a warning.
inline std::map<int, double> parse_perf_stat(const std::string& text,
                                             std::vector<std::string>* warnings = nullptr) {
    std::map<int, double> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto cells = detail::split_csv_line(t);
        if (cells.size() < 4) continue;
        std::string cpu = detail::trim(cells[0]);
        if (cpu.rfind("CPU", 0) != 0) continue;
        if (cells[3].find("cycles") == std::string::npos) continue;
        int core = std::atoi(cpu.c_str() + 3);
        std::string value = detail::trim(cells[1]);
        if (value == "<not counted>" || value == "<not supported>") {
            out[core] = 0;
            if (warnings)
                warnings->push_back(cpu + " cycles not counted, recorded as 0");
            continue;
        }
        char* end = nullptr;
        double v = std::strtod(value.c_str(), &end);
        if (end == value.c_str()) raise(Errc::parse_error, "bad cycle value '" + value + "'");
        out[core] = v;
    }
    if (out.empty()) raise(Errc::parse_error, "no per-core cycle rows found");
    return out;
}

// class -> feature name -> (mean, stddev); any feature not listed stays 0
using SynthSpec = std::map<std::string, std::map<std::string, std::pair<double, double>>>;

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec spec;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::map<std::string, std::pair<double, double>> per_feature;
        for (auto fit = it.value().begin(); fit != it.value().end(); ++fit) {
            if (!feature_index(fit.key()))
                raise(Errc::schema_error, "unknown feature '" + fit.key() + "' in synth spec");
            auto arr = fit.value();
            if (!arr.is_array() || arr.size() != 2)
                raise(Errc::schema_error, "feature '" + fit.key() + "' wants [mean, std]");
            per_feature[fit.key()] = {arr[0].get<double>(), arr[1].get<double>()};
        }
        spec[it.key()] = std::move(per_feature);
    }
    return spec;
}

namespace detail {

// Explicit Box-Muller on top of mt19937_64 keeps draws identical across
// standard libraries (std::normal_distribution is implementation-defined).
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double operator()(double mean, double stddev) {
        double u1 = (static_cast<double>(rng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
        double u2 = (static_cast<double>(rng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + stddev * z;
    }

    std::uint64_t raw() { return rng_(); }

private:
    std::mt19937_64 rng_;
};

} // namespace detail

// Deterministic synthetic dataset: truncated-at-zero integer-rounded normal
// draws per (class, feature). Integer values keep the chi-square scale
// properties exact.
inline Dataset synthesize(const SynthSpec& spec, std::size_t n_per_class, std::uint64_t seed) {
    Dataset ds;
    detail::NormalSampler sampler(seed);
    for (const auto& [label, per_feature] : spec) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            FeatureVector fv;
            fv.label = label;
            for (std::size_t f = 0; f < kNumFeatures; ++f) {
                auto it = per_feature.find(feature_names()[f]);
                if (it == per_feature.end()) continue;
                double draw = sampler(it->second.first, it->second.second);
                fv.values[f] = std::max(0.0, std::round(draw));
            }
            ds.rows.push_back(std::move(fv));
        }
    }
    ds.rebuild_classes();
    return ds;
}

} // namespace pqscope::features
