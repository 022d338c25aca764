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

#include <functional>
#include <sstream>

#include <gtest/gtest.h>

#include "pqscope/probe.hpp"
#include "support/fixture_server.hpp"
#include "support/io.hpp"

using namespace pqscope;
using namespace pqscope::probe;
using testsupport::FixtureServer;
using testsupport::read_fixture;

namespace {

const kexdb::ProfileSet& db() {
    static kexdb::ProfileSet set = kexdb::load_builtin();
    return set;
}

tls::ClientHelloSummary parse_flight(const Bytes& flight) {
    auto records = tls::parse_records(flight);
    auto msgs = tls::reassemble_handshake(records.records);
    return tls::parse_client_hello(msgs.at(0).body);
}

} // namespace

TEST(ProbeHello, HrrModeSharesOnlyX25519) {
    HelloOptions options;
    options.offer = {0x11EC, 0x001D};
    options.sni = "probe.example";
    auto hello = build_probe_hello(options);
    auto summary = parse_flight(hello);
    EXPECT_EQ(summary.supported_groups, (std::vector<std::uint16_t>{0x11EC, 0x001D}));
    ASSERT_EQ(summary.key_shares.size(), 1u);
    EXPECT_EQ(summary.key_shares[0], (tls::KeyShareEntry{0x001D, 32}));
    EXPECT_EQ(summary.sni.value(), "probe.example");
    ASSERT_FALSE(summary.supported_versions.empty());
    EXPECT_EQ(summary.supported_versions[0], 0x0304);
}

TEST(ProbeHello, BlobModeAttachesSuppliedBytes) {
    HelloOptions options;
    options.offer = {0x11EC};
    options.mode = ShareSource::blob_mode;
    options.blobs[0x11EC] = Bytes(1216, 0x42);
    auto summary = parse_flight(build_probe_hello(options));
    ASSERT_EQ(summary.key_shares.size(), 1u);
    EXPECT_EQ(summary.key_shares[0], (tls::KeyShareEntry{0x11EC, 1216}));
}

TEST(ProbeHello, BlobModeMissingBlob) {
    HelloOptions options;
    options.offer = {0x11EC, 0x001D};
    options.mode = ShareSource::blob_mode;
    options.blobs[0x11EC] = Bytes(1216, 0x42); // nothing for 0x001D
    try {
        build_probe_hello(options);
        FAIL() << "expected MissingBlob";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::missing_blob);
    }
}

TEST(Probe, SelectedGroupFromFixtureServer) {
    FixtureServer server(read_fixture("sh_flight_hybrid.bin"));
    HelloOptions hello_options;
    hello_options.offer = {0x6399, 0x001D};
    auto hello = build_probe_hello(hello_options);
    auto result = pqscope::probe::probe("127.0.0.1", server.port(), hello, db(), {.timeout_ms = 2000});
    EXPECT_EQ(result.outcome, Outcome::selected_group);
    EXPECT_EQ(result.group, 0x6399);
    ASSERT_TRUE(result.verdict_.has_value());
    EXPECT_EQ(result.verdict_->classification, verdict::Classification::hybrid);
    ASSERT_FALSE(result.verdict_->candidates.empty());
    EXPECT_EQ(result.verdict_->candidates[0].id, "x25519_kyber768");
    EXPECT_TRUE(result.rtt_ms.has_value());
}

TEST(Probe, HelloRetryFromFixtureServer) {
    FixtureServer server(read_fixture("sh_flight_hrr.bin"));
    HelloOptions hello_options;
    hello_options.offer = {0x11EC, 0x001D};
    auto hello = build_probe_hello(hello_options);
    auto result = pqscope::probe::probe("127.0.0.1", server.port(), hello, db(), {.timeout_ms = 2000});
    EXPECT_EQ(result.outcome, Outcome::hello_retry);
    EXPECT_EQ(result.group, 0x11EC);
    ASSERT_TRUE(result.verdict_.has_value());
    EXPECT_EQ(result.verdict_->classification, verdict::Classification::hybrid);
}

TEST(Probe, AlertFromFixtureServer) {
    Bytes alert = {0x15, 0x03, 0x03, 0x00, 0x02, 0x02, 0x28}; // fatal handshake_failure
    FixtureServer server(alert);
    HelloOptions hello_options;
    hello_options.offer = {0x001D};
    auto result =
        pqscope::probe::probe("127.0.0.1", server.port(), build_probe_hello(hello_options), db(), {.timeout_ms = 2000});
    EXPECT_EQ(result.outcome, Outcome::alert);
    EXPECT_EQ(result.alert_code, 0x28);
}

TEST(Probe, ClosedPortRefused) {
    auto port = testsupport::closed_port();
    HelloOptions hello_options;
    hello_options.offer = {0x001D};
    auto result =
        pqscope::probe::probe("127.0.0.1", port, build_probe_hello(hello_options), db(), {.timeout_ms = 2000});
    EXPECT_EQ(result.outcome, Outcome::tcp_refused);
}

TEST(Probe, DnsFailure) {
    HelloOptions hello_options;
    hello_options.offer = {0x001D};
    auto result = pqscope::probe::probe("host.invalid.pqscope-test", 443, build_probe_hello(hello_options), db(),
                        {.timeout_ms = 1000});
    EXPECT_EQ(result.outcome, Outcome::dns_failure);
    EXPECT_FALSE(result.ip.has_value());
}

TEST(Scan, ThreeFixtureServersAtAnyConcurrency) {
    FixtureServer hybrid(read_fixture("sh_flight_hybrid.bin"));
    FixtureServer classical(read_fixture("sh_flight_classical.bin"));
    auto refused = testsupport::closed_port();
    std::vector<std::string> domains = {
        "127.0.0.1:" + std::to_string(hybrid.port()),
        "127.0.0.1:" + std::to_string(classical.port()),
        "127.0.0.1:" + std::to_string(refused),
    };
    for (std::size_t concurrency : {1u, 8u}) {
        ScanOptions options;
        options.concurrency = concurrency;
        options.probe.timeout_ms = 2000;
        options.hello.offer = {0x6399, 0x001D};
        std::ostringstream out;
        auto summary = scan(domains, options, out, db());
        EXPECT_EQ(summary.domains, 3) << "concurrency " << concurrency;
        EXPECT_EQ(summary.hybrid, 1) << "concurrency " << concurrency;
        EXPECT_EQ(summary.classical, 1) << "concurrency " << concurrency;
        EXPECT_EQ(summary.error, 1) << "concurrency " << concurrency;
        // all three targets share the loopback address
        ASSERT_EQ(summary.by_ip.size(), 1u);
        const auto& lo = summary.by_ip.at("127.0.0.1");
        EXPECT_EQ(lo.hybrid, 1);
        EXPECT_EQ(lo.classical, 1);
        EXPECT_EQ(lo.error, 1);

        // every line is standalone JSON
        std::istringstream lines(out.str());
        std::string line;
        int parsed = 0;
        while (std::getline(lines, line)) {
            auto j = nlohmann::json::parse(line);
            EXPECT_TRUE(j.contains("outcome"));
            ++parsed;
        }
        EXPECT_EQ(parsed, 3);
    }
}

TEST(Scan, EmptyDomainList) {
    ScanOptions options;
    options.hello.offer = {0x001D};
    std::ostringstream out;
    auto summary = scan({}, options, out, db());
    EXPECT_EQ(summary.domains, 0);
    EXPECT_TRUE(out.str().empty());
}

// probe evidence and capture-analysis evidence for the same bytes agree
TEST(Probe, VerdictMatchesCaptureAnalysisPath) {
    FixtureServer server(read_fixture("sh_flight_hybrid.bin"));
    HelloOptions hello_options;
    hello_options.offer = {0x6399, 0x001D};
    auto result = pqscope::probe::probe("127.0.0.1", server.port(), build_probe_hello(hello_options), db(),
                        {.timeout_ms = 2000});
    ASSERT_TRUE(result.verdict_.has_value());

    auto flight = read_fixture("sh_flight_hybrid.bin");
    auto records = tls::parse_records(flight);
    auto msgs = tls::reassemble_handshake(records.records);
    auto sh = tls::parse_server_hello(msgs.at(0).body);
    verdict::ConnectionEvidence ev;
    ev.protocol = verdict::Protocol::tls13;
    ev.server_group = sh.key_share->group;
    ev.server_share_len = sh.key_share->share_len;
    auto direct = verdict::evaluate(ev, db());
    EXPECT_EQ(result.verdict_->classification, direct.classification);
    ASSERT_EQ(result.verdict_->candidates.size(), direct.candidates.size());
    EXPECT_EQ(result.verdict_->candidates[0].id, direct.candidates[0].id);
}
