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

#include <gtest/gtest.h>

#include "pqscope/analyze.hpp"
#include "pqscope/verdict.hpp"
#include "support/io.hpp"

using namespace pqscope;
using namespace pqscope::verdict;
using pqscope::analyze::analyze_capture_bytes;
using testsupport::read_fixture;

namespace {

const kexdb::ProfileSet& db() {
    static kexdb::ProfileSet set = kexdb::load_builtin();
    return set;
}

ConnectionEvidence tls13_evidence() {
    ConnectionEvidence ev;
    ev.protocol = Protocol::tls13;
    return ev;
}

std::vector<std::string> candidate_ids(const Verdict& v) {
    std::vector<std::string> out;
    for (const auto& c : v.candidates) out.push_back(c.id);
    return out;
}

} // namespace

TEST(Evaluate, CodepointWinsOverSizes) {
    auto ev = tls13_evidence();
    ev.client_share_len = 1216;
    ev.server_group = 0x6399;
    ev.server_share_len = 1120;
    ev.complete = true;
    auto v = evaluate(ev, db());
    EXPECT_EQ(v.classification, Classification::hybrid);
    ASSERT_EQ(v.candidates.size(), 1u);
    EXPECT_EQ(v.candidates[0].id, "x25519_kyber768");
    EXPECT_EQ(v.candidates[0].basis, Basis::codepoint);
}

TEST(Evaluate, ServerOnly97AtTolerance1ReproducesAmbiguity) {
    auto ev = tls13_evidence();
    ev.server_share_len = 97;
    auto v = evaluate(ev, db(), {.tolerance = 1});
    EXPECT_EQ(v.classification, Classification::unknown);
    EXPECT_EQ(candidate_ids(v),
              (std::vector<std::string>{"classic_mceliece_348864", "ecdh_p384"}));
    for (const auto& c : v.candidates) EXPECT_EQ(c.basis, Basis::size_server_only);
    EXPECT_NE(std::find(v.notes.begin(), v.notes.end(), "ambiguous"), v.notes.end());
}

TEST(Evaluate, SshNameRule) {
    ConnectionEvidence ev;
    ev.protocol = Protocol::ssh;
    ev.ssh_negotiated_name = "curve25519-sha256";
    auto v = evaluate(ev, db());
    EXPECT_EQ(v.classification, Classification::classical);
    ASSERT_EQ(v.candidates.size(), 1u);
    EXPECT_EQ(v.candidates[0].id, "x25519");
    EXPECT_EQ(v.candidates[0].basis, Basis::ssh_name);
}

TEST(Evaluate, ResumedYieldsUnknown) {
    auto ev = tls13_evidence();
    ev.resumed = true;
    ev.client_share_len = 32;
    auto v = evaluate(ev, db());
    EXPECT_EQ(v.classification, Classification::unknown);
    EXPECT_NE(std::find(v.notes.begin(), v.notes.end(), "resumed"), v.notes.end());
    EXPECT_TRUE(v.candidates.empty());
}

TEST(Evaluate, PreferPqBiasesAmbiguity) {
    auto ev = tls13_evidence();
    ev.server_share_len = 97;
    auto base = evaluate(ev, db(), {.tolerance = 1});
    EXPECT_EQ(base.classification, Classification::unknown);
    auto biased = evaluate(ev, db(), {.tolerance = 1, .prefer_pq = true});
    EXPECT_EQ(biased.classification, Classification::post_quantum);
    EXPECT_EQ(candidate_ids(biased), candidate_ids(base)); // candidates retained
}

TEST(Evaluate, InconsistentPair) {
    auto ev = tls13_evidence();
    ev.client_share_len = 32;    // x25519
    ev.server_share_len = 1088;  // kyber768 ciphertext
    auto v = evaluate(ev, db());
    EXPECT_EQ(v.classification, Classification::unknown);
    EXPECT_NE(std::find(v.notes.begin(), v.notes.end(), "inconsistent pair"), v.notes.end());
}

TEST(Evaluate, PairingStrictlyNarrows) {
    for (std::size_t tol : {0u, 1u, 4u}) {
        for (std::size_t client_len : {32u, 65u, 256u, 800u, 1216u, 1249u}) {
            for (std::size_t server_len : {32u, 65u, 96u, 97u, 768u, 1120u, 1153u}) {
                auto ev = tls13_evidence();
                ev.client_share_len = client_len;
                ev.server_share_len = server_len;
                auto pair = evaluate(ev, db(), {.tolerance = tol});

                auto ev_c = tls13_evidence();
                ev_c.client_share_len = client_len;
                auto client_only = evaluate(ev_c, db(), {.tolerance = tol});
                auto ev_s = tls13_evidence();
                ev_s.server_share_len = server_len;
                auto server_only = evaluate(ev_s, db(), {.tolerance = tol});

                auto cset = candidate_ids(client_only);
                auto sset = candidate_ids(server_only);
                for (const auto& id : candidate_ids(pair)) {
                    EXPECT_NE(std::find(cset.begin(), cset.end(), id), cset.end());
                    EXPECT_NE(std::find(sset.begin(), sset.end(), id), sset.end());
                }
            }
        }
    }
}

TEST(Evaluate, PureFunction) {
    auto ev = tls13_evidence();
    ev.client_share_len = 1216;
    ev.server_share_len = 1120;
    auto v1 = evaluate(ev, db());
    auto v2 = evaluate(ev, db());
    EXPECT_EQ(v1.classification, v2.classification);
    EXPECT_EQ(candidate_ids(v1), candidate_ids(v2));
    EXPECT_EQ(v1.notes, v2.notes);
}

TEST(Evaluate, SeedTableSeparability) {
    EXPECT_GE(kexdb::min_classical_pq_client_gap(db()), 600u);
}

TEST(AnalyzeCapture, SixFlowFixture) {
    auto file = read_fixture("capture_6flows.pcap");
    auto report = analyze_capture_bytes(file, db());
    ASSERT_EQ(report.flows.size(), 6u);

    struct Expect {
        Protocol protocol;
        Classification cls;
        std::string candidate;
        Basis basis;
    };
    const Expect expected[6] = {
        {Protocol::tls13, Classification::classical, "x25519", Basis::codepoint},
        {Protocol::tls13, Classification::hybrid, "x25519_kyber768", Basis::codepoint},
        {Protocol::tls12, Classification::classical, "ecdh_p256", Basis::codepoint},
        {Protocol::ssh, Classification::classical, "x25519", Basis::ssh_name},
        {Protocol::ssh, Classification::hybrid, "sntrup761_x25519", Basis::ssh_name},
        {Protocol::openvpn_tls, Classification::classical, "x25519", Basis::codepoint},
    };
    for (int i = 0; i < 6; ++i) {
        const auto& f = report.flows[i];
        EXPECT_EQ(f.evidence.protocol, expected[i].protocol) << "flow " << i;
        EXPECT_EQ(f.verdict.classification, expected[i].cls) << "flow " << i;
        ASSERT_FALSE(f.verdict.candidates.empty()) << "flow " << i;
        EXPECT_EQ(f.verdict.candidates[0].id, expected[i].candidate) << "flow " << i;
        EXPECT_EQ(f.verdict.candidates[0].basis, expected[i].basis) << "flow " << i;
        EXPECT_TRUE(f.evidence.complete) << "flow " << i;
    }
    // clients are the 10.0.0.0/24 hosts in this fixture
    for (const auto& f : report.flows) EXPECT_EQ(f.client.addr[0], 10) << f.client.to_string();

    auto counts = report.counts();
    EXPECT_EQ(counts[Classification::classical], 4);
    EXPECT_EQ(counts[Classification::hybrid], 2);
    EXPECT_EQ(counts[Classification::unknown], 0);
}

TEST(AnalyzeCapture, PcapngVariantMatchesPcap) {
    auto a = analyze_capture_bytes(read_fixture("capture_6flows.pcap"), db());
    auto b = analyze_capture_bytes(read_fixture("capture_6flows.pcapng"), db());
    EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(AnalyzeCapture, QuicFixture) {
    auto report = analyze_capture_bytes(read_fixture("capture_quic.pcap"), db());
    ASSERT_EQ(report.flows.size(), 1u);
    const auto& f = report.flows[0];
    EXPECT_EQ(f.evidence.protocol, Protocol::quic);
    EXPECT_EQ(f.verdict.classification, Classification::classical);
    ASSERT_FALSE(f.verdict.candidates.empty());
    EXPECT_EQ(f.verdict.candidates[0].id, "x25519");
    EXPECT_EQ(f.client.addr[0], 10);
}

TEST(AnalyzeCapture, ClientOnlyFlowsStillReported) {
    // strip the server-to-client frames out of the six-flow fixture
    auto frames = capture::read_capture(read_fixture("capture_6flows.pcap"));
    std::vector<capture::Frame> client_only;
    for (const auto& f : frames) {
        auto decoded = flow::detail::decode_frame(f);
        if (!decoded) continue;
        if (decoded->src.addr[0] == 10) client_only.push_back(f); // LAN-side sender
    }
    auto report = analyze::analyze_flows(flow::assemble_flows(client_only), db());
    ASSERT_GE(report.flows.size(), 4u); // TLS and OpenVPN flows survive client-only

    for (const auto& f : report.flows) {
        if (f.evidence.protocol == Protocol::tls13) {
            // hellos offered x25519 or the hybrid: candidates from the offer
            ASSERT_FALSE(f.verdict.candidates.empty());
            EXPECT_EQ(f.verdict.candidates[0].basis, Basis::size_client_only);
            bool unconfirmed = false;
            for (const auto& n : f.verdict.notes)
                if (n.find("unconfirmed") != std::string::npos) unconfirmed = true;
            EXPECT_TRUE(unconfirmed);
        }
        if (f.evidence.protocol == Protocol::openvpn_tls) {
            // this hello offered only ECDHE suites, so the unanimous suite
            // family lets the ClientKeyExchange length be read
            EXPECT_TRUE(f.evidence.client_share_len.has_value());
            ASSERT_FALSE(f.verdict.candidates.empty());
            EXPECT_EQ(f.verdict.candidates[0].id, "x25519");
        }
        if (f.evidence.protocol == Protocol::tls12) {
            // mixed ECDHE/RSA offer: the CKE encoding is ambiguous without
            // the server's suite choice, so no client length is claimed
            EXPECT_FALSE(f.evidence.client_share_len.has_value());
            EXPECT_EQ(f.verdict.classification, Classification::unknown);
        }
    }
}

TEST(AnalyzeCapture, ServerOnlyFlowsStillReported) {
    auto frames = capture::read_capture(read_fixture("capture_6flows.pcap"));
    std::vector<capture::Frame> server_only;
    for (const auto& f : frames) {
        auto decoded = flow::detail::decode_frame(f);
        if (!decoded) continue;
        if (decoded->src.addr[0] != 10) server_only.push_back(f);
    }
    auto report = analyze::analyze_flows(flow::assemble_flows(server_only), db());
    ASSERT_GE(report.flows.size(), 2u);
    for (const auto& f : report.flows) {
        if (f.evidence.protocol != Protocol::tls13) continue;
        // the ServerHello names the selected group: codepoint identification
        // works without the client side, and src still shows the client end
        ASSERT_FALSE(f.verdict.candidates.empty());
        EXPECT_EQ(f.verdict.candidates[0].basis, Basis::codepoint);
        EXPECT_EQ(f.server.addr[0] == 10, false);
    }
}

TEST(AnalyzeCapture, EmptyCapture) {
    Bytes empty_pcap = {0xD4, 0xC3, 0xB2, 0xA1, 2, 0, 4, 0, 0, 0, 0, 0,
                        0,    0,    0,    0,    0, 0, 4, 0, 1, 0, 0, 0};
    auto report = analyze_capture_bytes(empty_pcap, db());
    EXPECT_TRUE(report.flows.empty());
    auto j = report.to_json();
    EXPECT_EQ(j["summary"]["flows"], 0);
    EXPECT_TRUE(j["flows"].empty());
}

TEST(AnalyzeCapture, ReportJsonShape) {
    auto report = analyze_capture_bytes(read_fixture("capture_6flows.pcap"), db());
    auto j = report.to_json();
    EXPECT_EQ(j["summary"]["flows"], 6);
    EXPECT_EQ(j["summary"]["classical"], 4);
    EXPECT_EQ(j["summary"]["hybrid"], 2);
    ASSERT_EQ(j["flows"].size(), 6u);
    for (const auto& fj : j["flows"]) {
        EXPECT_TRUE(fj.contains("src"));
        EXPECT_TRUE(fj.contains("dst"));
        EXPECT_TRUE(fj.contains("protocol"));
        EXPECT_TRUE(fj.contains("classification"));
        EXPECT_TRUE(fj.contains("candidates"));
        EXPECT_TRUE(fj.contains("notes"));
    }
    // two hybrid flows -> their server IPs listed with candidates
    ASSERT_EQ(j["pq_ips"].size(), 2u);
}
