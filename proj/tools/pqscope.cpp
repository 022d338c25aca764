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

// pqscope: identify post-quantum / hybrid / classical key exchange in
// handshake captures and live probes, plus the side-channel classification
// pipeline (chi-square selection, logistic regression, decision forest).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pqscope/analyze.hpp"
#include "pqscope/features.hpp"
#include "pqscope/kexdb.hpp"
#include "pqscope/ml.hpp"
#include "pqscope/probe.hpp"
#include "pqscope/service.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;   // analyze: missing/malformed capture
constexpr int kExitUsage = 64;  // bad flags or arguments
constexpr int kExitData = 65;   // ml: unreadable or invalid data

using pqscope::Error;

std::string slurp(const std::string& path) {
    if (path == "-")
        return std::string(std::istreambuf_iterator<char>(std::cin),
                           std::istreambuf_iterator<char>());
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::runtime_error("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void print_analyze_table(const pqscope::analyze::CaptureReport& report) {
    std::printf("%-22s %-22s %-12s %-14s %s\n", "SRC", "DST", "PROTOCOL", "CLASSIFICATION",
                "CANDIDATES");
    for (const auto& f : report.flows) {
        std::string candidates;
        for (const auto& c : f.verdict.candidates) {
            if (!candidates.empty()) candidates += ", ";
            candidates += c.id;
            candidates += " (";
            candidates += pqscope::verdict::basis_name(c.basis);
            candidates += ")";
        }
        if (candidates.empty()) candidates = "-";
        std::printf("%-22s %-22s %-12s %-14s %s\n", f.client.to_string().c_str(),
                    f.server.to_string().c_str(),
                    pqscope::verdict::protocol_name(f.evidence.protocol),
                    pqscope::verdict::classification_name(f.verdict.classification),
                    candidates.c_str());
        for (const auto& note : f.verdict.notes)
            std::printf("%-22s   note: %s\n", "", note.c_str());
    }
    auto counts = report.counts();
    std::printf("\nflows: %zu  classical: %d  post_quantum: %d  hybrid: %d  unknown: %d\n",
                report.flows.size(), counts[pqscope::verdict::Classification::classical],
                counts[pqscope::verdict::Classification::post_quantum],
                counts[pqscope::verdict::Classification::hybrid],
                counts[pqscope::verdict::Classification::unknown]);
}

std::vector<std::uint16_t> parse_group_list(const std::vector<std::string>& items) {
    std::vector<std::uint16_t> out;
    for (const auto& item : items) {
        unsigned long v = std::stoul(item, nullptr, 0); // accepts 0x1234 and decimal
        if (v > 0xFFFF) throw CLI::ValidationError("--offer", "group codepoint out of range");
        out.push_back(static_cast<std::uint16_t>(v));
    }
    return out;
}

pqscope::ml::FeatureSelector selector_for(const pqscope::features::Dataset& ds, std::size_t k) {
    auto scores = pqscope::ml::chi2_scores(ds);
    if (k == 0 || k >= pqscope::features::kNumFeatures) return pqscope::ml::select_all();
    return pqscope::ml::select_top_k(scores, k);
}

pqscope::kexdb::ProfileSet load_profiles(const std::string& path) {
    if (path.empty()) return pqscope::kexdb::load_builtin();
    return pqscope::kexdb::ProfileSet::from_json(nlohmann::json::parse(slurp(path)));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"post-quantum key-exchange detection and side-channel classification toolkit"};
    app.require_subcommand(1);
    app.set_config("--config");

    // ---- analyze ----------------------------------------------------------
    auto* analyze_cmd = app.add_subcommand("analyze", "classify handshakes in a capture file");
    std::string analyze_input, analyze_profiles;
    std::size_t analyze_tolerance = 0;
    bool analyze_prefer_pq = false, analyze_json = false, analyze_table = false;
    analyze_cmd->add_option("--input,-i", analyze_input, "pcap/pcapng file, '-' for stdin")
        ->required();
    analyze_cmd->add_option("--tolerance", analyze_tolerance, "share length match slack (bytes)");
    analyze_cmd->add_flag("--prefer-pq", analyze_prefer_pq,
                          "bias mixed-family ambiguity toward the PQ candidate");
    analyze_cmd->add_flag("--json", analyze_json, "emit the JSON report (stable schema)");
    analyze_cmd->add_flag("--table", analyze_table, "emit a human-readable table (default)");
    analyze_cmd->add_option("--profiles", analyze_profiles,
                            "algorithm profile JSON (default: built-in table)");

    // ---- probe ------------------------------------------------------------
    auto* probe_cmd = app.add_subcommand("probe", "probe one TLS server's group selection");
    std::string probe_host;
    std::uint16_t probe_port = 443;
    std::vector<std::string> probe_offer = {"0x11EC", "0x6399", "0x001D"};
    std::string probe_mode = "hrr";
    std::string probe_blobs_path;
    int probe_timeout_ms = 5000;
    std::size_t probe_tolerance = 0;
    std::string probe_profiles;
    probe_cmd->add_option("--host", probe_host, "host name or address")->required();
    probe_cmd->add_option("--port", probe_port, "TCP port (default 443)");
    probe_cmd->add_option("--offer", probe_offer, "named groups to offer (hex or decimal)");
    probe_cmd->add_option("--mode", probe_mode, "hrr | blob")
        ->check(CLI::IsMember({"hrr", "blob"}));
    probe_cmd->add_option("--blobs", probe_blobs_path,
                          "JSON file {\"0x11EC\": \"<hex share bytes>\"} for blob mode");
    probe_cmd->add_option("--timeout-ms", probe_timeout_ms, "per-connection timeout");
    probe_cmd->add_option("--tolerance", probe_tolerance, "share length match slack");
    probe_cmd->add_option("--profiles", probe_profiles, "algorithm profile JSON");

    // ---- scan -------------------------------------------------------------
    auto* scan_cmd = app.add_subcommand("scan", "probe a list of domains");
    std::string scan_domains_path, scan_tranco_path, scan_out = "-";
    std::size_t scan_concurrency = 32;
    double scan_rate = 0;
    int scan_timeout_ms = 5000;
    std::vector<std::string> scan_offer = {"0x11EC", "0x6399", "0x001D"};
    std::string scan_mode = "hrr";
    std::string scan_blobs_path, scan_profiles;
    scan_cmd->add_option("--domains", scan_domains_path, "newline-delimited host[:port] list");
    scan_cmd->add_option("--tranco", scan_tranco_path, "Tranco CSV (rank,domain)");
    scan_cmd->add_option("--out", scan_out, "JSONL output path ('-' for stdout)")->required();
    scan_cmd->add_option("--concurrency", scan_concurrency, "worker count (default 32)");
    scan_cmd->add_option("--rate", scan_rate, "max probes per second (0 = unlimited)");
    scan_cmd->add_option("--timeout-ms", scan_timeout_ms, "per-host timeout (default 5000)");
    scan_cmd->add_option("--offer", scan_offer, "named groups to offer");
    scan_cmd->add_option("--mode", scan_mode, "hrr | blob")->check(CLI::IsMember({"hrr", "blob"}));
    scan_cmd->add_option("--blobs", scan_blobs_path, "key-share blob file for blob mode");
    scan_cmd->add_option("--profiles", scan_profiles, "algorithm profile JSON");

    // ---- ml ---------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("ml-train", "train a classifier on a feature CSV");
    std::string train_data, train_kind = "forest", train_out;
    std::size_t train_k = 0;
    std::uint64_t train_seed = 1;
    double train_fraction = 0.8;
    pqscope::ml::LogregParams logreg_params;
    pqscope::ml::ForestParams forest_params;
    bool train_no_bootstrap = false, train_json = false;
    train_cmd->add_option("--data", train_data, "labeled feature CSV")->required();
    train_cmd->add_option("--model-kind", train_kind, "logreg | forest")
        ->check(CLI::IsMember({"logreg", "forest"}));
    train_cmd->add_option("--k", train_k, "top-k chi-square features (0 = all 19)");
    train_cmd->add_option("--seed", train_seed, "split/bagging seed")->required();
    train_cmd->add_option("--out", train_out, "model JSON output path")->required();
    train_cmd->add_option("--train-fraction", train_fraction, "train split (default 0.8)");
    train_cmd->add_option("--lr", logreg_params.learning_rate, "logreg learning rate");
    train_cmd->add_option("--iterations", logreg_params.iterations, "logreg iterations");
    train_cmd->add_option("--l2", logreg_params.l2, "logreg L2 penalty");
    train_cmd->add_option("--trees", forest_params.n_trees, "forest size (default 100)");
    train_cmd->add_option("--max-depth", forest_params.max_depth, "0 = unlimited");
    train_cmd->add_option("--min-leaf", forest_params.min_leaf, "minimum rows per leaf");
    train_cmd->add_option("--feature-subsample", forest_params.feature_subsample,
                          "features per split (0 = sqrt)");
    train_cmd->add_flag("--no-bootstrap", train_no_bootstrap, "disable bagging");
    train_cmd->add_flag("--json", train_json, "emit metrics as JSON");

    auto* eval_cmd = app.add_subcommand("ml-eval", "evaluate a saved model on a CSV");
    std::string eval_data, eval_model;
    bool eval_json = false;
    eval_cmd->add_option("--data", eval_data, "labeled feature CSV")->required();
    eval_cmd->add_option("--model", eval_model, "model JSON path")->required();
    eval_cmd->add_flag("--json", eval_json, "emit metrics and predictions as JSON");

    auto* select_cmd = app.add_subcommand("ml-select", "rank features by chi-square score");
    std::string select_data;
    std::size_t select_k = 4;
    bool select_json = false;
    select_cmd->add_option("--data", select_data, "labeled feature CSV")->required();
    select_cmd->add_option("--k", select_k, "how many features to keep");
    select_cmd->add_flag("--json", select_json, "emit JSON");

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic feature CSV");
    std::string synth_spec_path, synth_out;
    std::size_t synth_n = 1000;
    std::uint64_t synth_seed = 1;
    synth_cmd->add_option("--spec", synth_spec_path,
                          "JSON {class: {feature: [mean, std]}} document")
        ->required();
    synth_cmd->add_option("--n", synth_n, "rows per class");
    synth_cmd->add_option("--seed", synth_seed, "RNG seed")->required();
    synth_cmd->add_option("--out", synth_out, "CSV output path ('-' for stdout)")->required();

    // ---- profiles -----------------------------------------------------------
    auto* profiles_cmd =
        app.add_subcommand("profiles", "export the built-in algorithm profile table as JSON");
    std::string profiles_out = "-";
    profiles_cmd->add_option("--out", profiles_out, "output path ('-' for stdout)");

    // ---- serve --------------------------------------------------------------
    auto* serve_cmd = app.add_subcommand("serve", "run the classification HTTP service");
    pqscope::service::ServiceConfig service_config;
    if (const char* env = std::getenv("PQSCOPE_BIND")) service_config.bind = env;
    if (const char* env = std::getenv("PQSCOPE_KEX_MODEL")) service_config.kex_model_path = env;
    if (const char* env = std::getenv("PQSCOPE_SIG_MODEL")) service_config.sig_model_path = env;
    serve_cmd->add_option("--bind", service_config.bind, "bind address");
    serve_cmd->add_option("--port", service_config.port, "TCP port (default 8441)");
    serve_cmd->add_option("--kex-model", service_config.kex_model_path, "key-exchange model JSON");
    serve_cmd->add_option("--sig-model", service_config.sig_model_path, "signature model JSON");
    serve_cmd->add_option("--tolerance", service_config.tolerance, "share length match slack");
    serve_cmd->add_option("--max-upload-bytes", service_config.max_upload_bytes,
                          "upload cap (default 64 MiB)");
    serve_cmd->add_option("--profiles", service_config.profiles_path,
                          "algorithm profile JSON (default: built-in table)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*profiles_cmd) {
            auto doc = pqscope::kexdb::load_builtin().to_json().dump(2) + "\n";
            if (profiles_out == "-") {
                std::cout << doc;
            } else {
                std::ofstream out(profiles_out);
                if (!out.good()) {
                    std::fprintf(stderr, "error: cannot write '%s'\n", profiles_out.c_str());
                    return kExitUsage;
                }
                out << doc;
            }
            return kExitOk;
        }

        if (*analyze_cmd) {
            auto profiles = load_profiles(analyze_profiles);
            std::string data;
            try {
                data = slurp(analyze_input);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return kExitInput;
            }
            pqscope::analyze::CaptureReport report;
            try {
                report = pqscope::analyze::analyze_capture_bytes(
                    pqscope::ByteView(reinterpret_cast<const std::uint8_t*>(data.data()),
                                      data.size()),
                    profiles, {analyze_tolerance, analyze_prefer_pq});
            } catch (const Error& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return kExitInput;
            }
            if (analyze_json && !analyze_table)
                std::cout << report.to_json().dump(2) << "\n";
            else
                print_analyze_table(report);
            return kExitOk;
        }

        if (*probe_cmd) {
            auto profiles = load_profiles(probe_profiles);
            pqscope::probe::HelloOptions hello;
            hello.offer = parse_group_list(probe_offer);
            hello.sni = probe_host;
            hello.mode = probe_mode == "blob" ? pqscope::probe::ShareSource::blob_mode
                                              : pqscope::probe::ShareSource::hrr_mode;
            if (!probe_blobs_path.empty()) {
                auto doc = nlohmann::json::parse(slurp(probe_blobs_path));
                for (auto it = doc.begin(); it != doc.end(); ++it)
                    hello.blobs[static_cast<std::uint16_t>(std::stoul(it.key(), nullptr, 0))] =
                        pqscope::from_hex(it.value().get<std::string>());
            }
            auto hello_bytes = pqscope::probe::build_probe_hello(hello);
            pqscope::probe::ProbeOptions options;
            options.timeout_ms = probe_timeout_ms;
            options.tolerance = probe_tolerance;
            auto result =
                pqscope::probe::probe(probe_host, probe_port, hello_bytes, profiles, options);
            std::cout << result.to_json().dump(2) << "\n";
            return kExitOk;
        }

        if (*scan_cmd) {
            auto profiles = load_profiles(scan_profiles);
            if (scan_domains_path.empty() == scan_tranco_path.empty()) {
                std::fprintf(stderr, "error: exactly one of --domains / --tranco is required\n");
                return kExitUsage;
            }
            std::vector<std::string> domains;
            std::istringstream in(slurp(scan_domains_path.empty() ? scan_tranco_path
                                                                  : scan_domains_path));
            std::string line;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty() || line[0] == '#') continue;
                if (!scan_tranco_path.empty()) {
                    auto comma = line.find(',');
                    if (comma == std::string::npos) continue;
                    line = line.substr(comma + 1);
                }
                domains.push_back(line);
            }
            pqscope::probe::ScanOptions options;
            options.concurrency = scan_concurrency;
            options.rate_limit_per_sec = scan_rate;
            options.probe.timeout_ms = scan_timeout_ms;
            options.hello.offer = parse_group_list(scan_offer);
            options.hello.mode = scan_mode == "blob" ? pqscope::probe::ShareSource::blob_mode
                                                     : pqscope::probe::ShareSource::hrr_mode;
            if (!scan_blobs_path.empty()) {
                auto doc = nlohmann::json::parse(slurp(scan_blobs_path));
                for (auto it = doc.begin(); it != doc.end(); ++it)
                    options.hello
                        .blobs[static_cast<std::uint16_t>(std::stoul(it.key(), nullptr, 0))] =
                        pqscope::from_hex(it.value().get<std::string>());
            }
            std::ofstream file_out;
            std::ostream* out = &std::cout;
            if (scan_out != "-") {
                file_out.open(scan_out);
                if (!file_out.good()) {
                    std::fprintf(stderr, "error: cannot write '%s'\n", scan_out.c_str());
                    return kExitUsage;
                }
                out = &file_out;
            }
            auto summary = pqscope::probe::scan(domains, options, *out, profiles);
            std::cout << summary.to_json().dump(2) << "\n";
            return kExitOk;
        }

        if (*train_cmd || *eval_cmd || *select_cmd || *synth_cmd) {
            try {
                if (*train_cmd) {
                    if (train_k > pqscope::features::kNumFeatures) {
                        std::fprintf(stderr, "error: --k must be at most %zu\n",
                                     pqscope::features::kNumFeatures);
                        return kExitUsage;
                    }
                    auto ds = pqscope::features::load_csv(slurp(train_data));
                    auto [train, test] = pqscope::ml::split(ds, train_fraction, train_seed);
                    auto selector = selector_for(train, train_k);
                    pqscope::ml::TrainedModel model;
                    if (train_kind == "logreg") {
                        model = pqscope::ml::fit_logreg(train, selector, logreg_params);
                    } else {
                        forest_params.bootstrap = !train_no_bootstrap;
                        forest_params.seed = train_seed;
                        model = pqscope::ml::fit_forest(train, selector, forest_params);
                    }
                    model.seed = train_seed;
                    pqscope::ml::save_model_file(model, train_out);
                    auto metrics = pqscope::ml::evaluate(model, test);
                    if (train_json) {
                        nlohmann::json j{{"model", train_out},
                                         {"train_rows", train.rows.size()},
                                         {"test_rows", test.rows.size()},
                                         {"selected_features", selector.selected},
                                         {"metrics", metrics.to_json()}};
                        std::cout << j.dump(2) << "\n";
                    } else {
                        std::printf("trained %s on %zu rows; test accuracy %.4f; model -> %s\n",
                                    train_kind.c_str(), train.rows.size(),
                                    metrics.overall_accuracy, train_out.c_str());
                    }
                    return kExitOk;
                }
                if (*eval_cmd) {
                    auto ds = pqscope::features::load_csv(slurp(eval_data));
                    auto model = pqscope::ml::load_model_file(eval_model);
                    auto metrics = pqscope::ml::evaluate(model, ds);
                    auto labels = pqscope::ml::predict(model, ds.rows);
                    if (eval_json) {
                        nlohmann::json preds = nlohmann::json::array();
                        for (std::size_t i = 0; i < labels.size(); ++i)
                            preds.push_back({{"row", i}, {"label", labels[i]}});
                        nlohmann::json j{{"metrics", metrics.to_json()},
                                         {"predictions", std::move(preds)}};
                        std::cout << j.dump(2) << "\n";
                    } else {
                        std::printf("rows %zu  accuracy %.4f\n", ds.rows.size(),
                                    metrics.overall_accuracy);
                        for (const auto& [label, m] : metrics.per_class)
                            std::printf("  %-24s precision %.4f recall %.4f f1 %.4f\n",
                                        label.c_str(), m.precision, m.recall, m.f1);
                    }
                    return kExitOk;
                }
                if (*select_cmd) {
                    if (select_k == 0 || select_k > pqscope::features::kNumFeatures) {
                        std::fprintf(stderr, "error: --k must be in [1, %zu]\n",
                                     pqscope::features::kNumFeatures);
                        return kExitUsage;
                    }
                    auto ds = pqscope::features::load_csv(slurp(select_data));
                    auto scores = pqscope::ml::chi2_scores(ds);
                    auto selector = pqscope::ml::select_top_k(scores, select_k);
                    if (select_json) {
                        nlohmann::json j;
                        j["scores"] = scores;
                        nlohmann::json chosen = nlohmann::json::array();
                        for (auto f : selector.selected)
                            chosen.push_back({{"index", f},
                                              {"name", pqscope::features::feature_names()[f]},
                                              {"score", scores[f]}});
                        j["selected"] = std::move(chosen);
                        std::cout << j.dump(2) << "\n";
                    } else {
                        for (auto f : selector.selected)
                            std::printf("%2zu  %-12s %.6g\n", f,
                                        pqscope::features::feature_names()[f].c_str(), scores[f]);
                    }
                    return kExitOk;
                }
                // synth
                auto spec = pqscope::features::synth_spec_from_json(
                    nlohmann::json::parse(slurp(synth_spec_path)));
                auto ds = pqscope::features::synthesize(spec, synth_n, synth_seed);
                auto csv = pqscope::features::write_csv(ds);
                if (synth_out == "-") {
                    std::cout << csv;
                } else {
                    std::ofstream out(synth_out);
                    if (!out.good()) {
                        std::fprintf(stderr, "error: cannot write '%s'\n", synth_out.c_str());
                        return kExitUsage;
                    }
                    out << csv;
                }
                return kExitOk;
            } catch (const Error& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return kExitData;
            } catch (const nlohmann::json::exception& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return kExitData;
            } catch (const std::exception& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return kExitData;
            }
        }

        if (*serve_cmd) {
            try {
                pqscope::service::Service service(service_config);
                std::fprintf(stderr, "pqscope service listening on %s:%d\n",
                             service_config.bind.c_str(), service_config.port);
                if (!service.run()) {
                    std::fprintf(stderr, "error: failed to bind %s:%d\n",
                                 service_config.bind.c_str(), service_config.port);
                    return 1;
                }
                return kExitOk;
            } catch (const Error& e) {
                std::fprintf(stderr, "error: %s\n", e.what()); // e.g. unloadable model
                return 1;
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitOk;
}
