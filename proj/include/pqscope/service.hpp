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

#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pqscope/analyze.hpp"
#include "pqscope/features.hpp"
#include "pqscope/kexdb.hpp"
#include "pqscope/ml.hpp"

// HTTP endpoints over the analysis and classification cores:
//   POST /classify     capture file -> per-flow verdict report
//   POST /classifyKex  feature CSV  -> per-row key-exchange predictions
//   POST /classifySig  feature CSV  -> per-row signature predictions
//   GET  /healthz
// Models and the profile set load once at startup and are shared read-only
// across request threads.

namespace pqscope::service {

struct ServiceConfig {
    std::string bind = "127.0.0.1";
    int port = 8441;
    std::size_t max_upload_bytes = 64ull << 20;
    std::string kex_model_path;
    std::string sig_model_path;
    std::string profiles_path; // empty: built-in table
    std::size_t tolerance = 0;
    bool prefer_pq = false;
};

namespace detail {

inline kexdb::ProfileSet profiles_for(const std::string& path) {
    if (path.empty()) return kexdb::load_builtin();
    std::ifstream in(path);
    if (!in.good()) raise(Errc::schema_error, "cannot open profiles '" + path + "'");
    return kexdb::ProfileSet::from_json(nlohmann::json::parse(in));
}

} // namespace detail

class Service {
public:
    explicit Service(ServiceConfig config)
        : config_(std::move(config)), profiles_(detail::profiles_for(config_.profiles_path)) {
        // models must load at startup or the service refuses to start
        if (!config_.kex_model_path.empty())
            kex_model_ = ml::load_model_file(config_.kex_model_path);
        if (!config_.sig_model_path.empty())
            sig_model_ = ml::load_model_file(config_.sig_model_path);
    }

    const ServiceConfig& config() const { return config_; }

    void register_routes(httplib::Server& server) {
        server.set_payload_max_length(config_.max_upload_bytes);

        server.Post("/classify", [this](const httplib::Request& req, httplib::Response& res) {
            std::string data = body_or_file(req, "capture");
            if (data.empty()) {
                respond_error(res, 400, "no capture payload");
                return;
            }
            try {
                auto report = analyze::analyze_capture_bytes(
                    ByteView(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()),
                    profiles_, {config_.tolerance, config_.prefer_pq});
                res.set_content(report.to_json().dump(), "application/json");
            } catch (const Error& e) {
                respond_error(res, 400, std::string("malformed capture: ") + e.what());
            }
        });

        server.Post("/classifyKex", [this](const httplib::Request& req, httplib::Response& res) {
            classify_csv(req, res, kex_model_, "kex");
        });
        server.Post("/classifySig", [this](const httplib::Request& req, httplib::Response& res) {
            classify_csv(req, res, sig_model_, "sig");
        });

        server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json j;
            j["status"] = "ok";
            j["kex_model"] = model_info(kex_model_);
            j["sig_model"] = model_info(sig_model_);
            res.set_content(j.dump(), "application/json");
        });
    }

    // blocking; binds the configured address
    bool run() {
        httplib::Server server;
        register_routes(server);
        return server.listen(config_.bind, config_.port);
    }

private:
    static std::string body_or_file(const httplib::Request& req, const std::string& field) {
        if (req.is_multipart_form_data()) {
            if (req.has_file(field)) return req.get_file_value(field).content;
            // fall back to the first uploaded file regardless of field name
            for (const auto& [name, file] : req.files) return file.content;
            return {};
        }
        return req.body;
    }

    static void respond_error(httplib::Response& res, int status, const std::string& message) {
        res.status = status;
        res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
    }

    static nlohmann::json model_info(const std::optional<ml::TrainedModel>& m) {
        if (!m) return nullptr;
        return {{"schema_version", ml::kModelSchemaVersion},
                {"kind", m->kind == ml::TrainedModel::Kind::logreg ? "logreg" : "forest"},
                {"classes", m->classes}};
    }

    void classify_csv(const httplib::Request& req, httplib::Response& res,
                      const std::optional<ml::TrainedModel>& model, const std::string& which) {
        if (!model) {
            respond_error(res, 500, "no " + which + " model configured");
            return;
        }
        std::string csv = body_or_file(req, "metrics");
        if (csv.empty()) {
            respond_error(res, 400, "no CSV payload");
            return;
        }
        features::Dataset ds;
        try {
            ds = features::load_csv(csv);
        } catch (const Error& e) {
            respond_error(res, 400, e.what());
            return;
        }
        auto labels = ml::predict(*model, ds.rows);
        nlohmann::json predictions = nlohmann::json::array();
        for (std::size_t i = 0; i < labels.size(); ++i) {
            nlohmann::json p{{"row", i}, {"label", labels[i]}};
            if (ds.has_labels) p["given_label"] = ds.rows[i].label; // echoed, not used
            predictions.push_back(std::move(p));
        }
        res.set_content(nlohmann::json{{"predictions", std::move(predictions)}}.dump(),
                        "application/json");
    }

    ServiceConfig config_;
    kexdb::ProfileSet profiles_;
    std::optional<ml::TrainedModel> kex_model_;
    std::optional<ml::TrainedModel> sig_model_;
};

} // namespace pqscope::service
