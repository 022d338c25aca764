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
#include <random>

#include <gtest/gtest.h>

#include "pqscope/tls.hpp"
#include "support/builders.hpp"
#include "support/io.hpp"

using namespace pqscope;
using namespace pqscope::tls;
using testsupport::read_fixture;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected a pqscope::Error";
    return Errc::parse_error;
}

Bytes one_record(ByteView payload) {
    Bytes r = {0x16, 0x03, 0x03};
    testsupport::put_u16be(r, static_cast<std::uint16_t>(payload.size()));
    testsupport::append(r, payload);
    return r;
}

// message bytes -> body (strip the 4-byte handshake header)
ByteView body_of(const Bytes& msg) { return ByteView(msg).subspan(4); }

} // namespace

TEST(TlsRecords, SingleRecord) {
    Bytes stream = {0x16, 0x03, 0x01, 0x00, 0x02, 0xAB, 0xCD};
    auto parsed = parse_records(stream);
    ASSERT_EQ(parsed.records.size(), 1u);
    EXPECT_EQ(parsed.records[0].content_type, 0x16);
    EXPECT_EQ(parsed.records[0].version, 0x0301);
    EXPECT_EQ(parsed.records[0].payload, (Bytes{0xAB, 0xCD}));
    EXPECT_FALSE(parsed.truncated);
}

TEST(TlsRecords, OversizedLengthRejected) {
    Bytes stream = {0x16, 0x03, 0x01, 0x4F, 0xFF};
    EXPECT_EQ(code_of([&] { parse_records(stream); }), Errc::malformed_record);
}

TEST(TlsRecords, BadContentTypeRejected) {
    Bytes stream = {0x42, 0x03, 0x01, 0x00, 0x01, 0x00};
    EXPECT_EQ(code_of([&] { parse_records(stream); }), Errc::malformed_record);
}

TEST(TlsRecords, BackToBackRecords) {
    Bytes stream = {0x16, 0x03, 0x03, 0x00, 0x01, 0x01, 0x17, 0x03, 0x03, 0x00, 0x02, 0xDE, 0xAD};
    auto parsed = parse_records(stream);
    ASSERT_EQ(parsed.records.size(), 2u);
    EXPECT_EQ(parsed.records[1].content_type, 0x17);
}

TEST(TlsRecords, TrailingPartialIsTruncatedNotError) {
    Bytes stream = {0x16, 0x03, 0x03, 0x00, 0x01, 0x01, 0x16, 0x03};
    auto parsed = parse_records(stream);
    EXPECT_EQ(parsed.records.size(), 1u);
    EXPECT_TRUE(parsed.truncated);
}

TEST(TlsHandshake, ZeroLengthMessageAccepted) {
    Bytes hello_request = {0x00, 0x00, 0x00, 0x00};
    auto msgs = reassemble_handshake(parse_records(one_record(hello_request)).records);
    ASSERT_EQ(msgs.size(), 1u);
    EXPECT_EQ(msgs[0].msg_type, 0u);
    EXPECT_TRUE(msgs[0].body.empty());
}

TEST(TlsHandshake, DeclaredLengthBeyondStreamIsTruncated) {
    Bytes msg = {0x01, 0x00, 0x03, 0xE8}; // declares 1000 bytes
    msg.resize(msg.size() + 10);
    EXPECT_EQ(code_of([&] { reassemble_handshake(parse_records(one_record(msg)).records); }),
              Errc::truncated_handshake);
}

TEST(TlsHandshake, StopsAtChangeCipherSpec) {
    Bytes hello_request = {0x00, 0x00, 0x00, 0x00};
    Bytes stream = one_record(hello_request);
    Bytes ccs = {0x14, 0x03, 0x03, 0x00, 0x01, 0x01};
    testsupport::append(stream, ccs);
    Bytes after = one_record(hello_request); // pretend-encrypted Finished
    testsupport::append(stream, after);
    auto msgs = reassemble_handshake(parse_records(stream).records);
    EXPECT_EQ(msgs.size(), 1u);
}

TEST(TlsClientHello, FixtureSummary) {
    auto msg = read_fixture("tls13_client_hello.bin");
    ASSERT_EQ(msg[0], kHsClientHello);
    auto s = parse_client_hello(body_of(msg));
    EXPECT_EQ(s.legacy_version, 0x0303);
    EXPECT_EQ(s.sni.value(), "example.com");
    // GREASE values never appear in any summary list
    EXPECT_EQ(s.cipher_suites, (std::vector<std::uint16_t>{0x1301, 0x1302, 0x1303}));
    EXPECT_EQ(s.supported_groups, (std::vector<std::uint16_t>{0x6399, 0x001D, 0x0017}));
    EXPECT_EQ(s.supported_versions, (std::vector<std::uint16_t>{0x0304, 0x0303}));
    ASSERT_EQ(s.key_shares.size(), 2u);
    EXPECT_EQ(s.key_shares[0], (KeyShareEntry{0x6399, 1216}));
    EXPECT_EQ(s.key_shares[1], (KeyShareEntry{0x001D, 32}));
    // every key_share group also appears in supported_groups
    for (const auto& ks : s.key_shares)
        EXPECT_NE(std::find(s.supported_groups.begin(), s.supported_groups.end(), ks.group),
                  s.supported_groups.end());
}

TEST(TlsClientHello, NoExtensions) {
    Bytes body;
    testsupport::put_u16be(body, 0x0303);
    for (int i = 0; i < 32; ++i) body.push_back(0x11);
    body.push_back(0); // empty session id
    testsupport::put_u16be(body, 2);
    testsupport::put_u16be(body, 0x002F);
    body.push_back(1);
    body.push_back(0);
    auto s = parse_client_hello(body);
    EXPECT_TRUE(s.supported_versions.empty());
    EXPECT_TRUE(s.key_shares.empty());
    EXPECT_FALSE(s.sni.has_value());
}

TEST(TlsClientHello, ExtensionPastEndOfBody) {
    auto msg = read_fixture("tls13_client_hello.bin");
    Bytes body(body_of(msg).begin(), body_of(msg).end());
    body.resize(body.size() - 10); // cut into the extension block
    EXPECT_EQ(code_of([&] { parse_client_hello(body); }), Errc::malformed_hello);
}

TEST(TlsClientHello, FragmentationInvariance) {
    auto msg = read_fixture("tls13_client_hello.bin");
    auto reference = parse_client_hello(body_of(msg));
    // split at every byte boundary into two records
    for (std::size_t cut = 1; cut + 1 < msg.size(); ++cut) {
        Bytes stream = one_record(ByteView(msg).subspan(0, cut));
        testsupport::append(stream, one_record(ByteView(msg).subspan(cut)));
        auto msgs = reassemble_handshake(parse_records(stream).records);
        ASSERT_EQ(msgs.size(), 1u) << "cut=" << cut;
        EXPECT_EQ(parse_client_hello(msgs[0].body), reference) << "cut=" << cut;
    }
}

TEST(TlsServerHello, FixtureSummary) {
    auto msg = read_fixture("tls13_server_hello.bin");
    ASSERT_EQ(msg[0], kHsServerHello);
    auto s = parse_server_hello(body_of(msg));
    EXPECT_EQ(s.selected_version, 0x0304);
    EXPECT_EQ(s.cipher_suite, 0x1301);
    EXPECT_FALSE(s.is_hello_retry);
    ASSERT_TRUE(s.key_share.has_value());
    EXPECT_EQ(*s.key_share, (KeyShareEntry{0x6399, 1120}));
}

TEST(TlsServerHello, HelloRetryRequest) {
    auto msg = read_fixture("tls13_server_hello_hrr.bin");
    auto s = parse_server_hello(body_of(msg));
    EXPECT_TRUE(s.is_hello_retry);
    ASSERT_TRUE(s.key_share.has_value());
    EXPECT_EQ(s.key_share->group, 0x11EC);
    EXPECT_EQ(s.key_share->share_len, 0u);
}

TEST(TlsServerHello, Tls12NoKeyShare) {
    auto msg = read_fixture("tls12_server_hello.bin");
    auto s = parse_server_hello(body_of(msg));
    EXPECT_EQ(s.selected_version, 0x0303);
    EXPECT_FALSE(s.key_share.has_value());
    EXPECT_FALSE(s.is_hello_retry);
}

TEST(Tls12Kex, ServerKeyExchangeEcdhe) {
    auto msg = read_fixture("tls12_server_key_exchange.bin");
    ASSERT_EQ(msg[0], kHsServerKeyExchange);
    auto s = parse_server_key_exchange(body_of(msg), 0xC02F);
    EXPECT_EQ(s.kx_kind, KxKind::ecdhe);
    EXPECT_EQ(s.server_curve.value(), 0x0017);
    EXPECT_EQ(s.server_pub_len.value(), 65u);
}

TEST(Tls12Kex, ServerKeyExchangeDhe) {
    Bytes body;
    testsupport::put_u16be(body, 4); // p
    for (int i = 0; i < 4; ++i) body.push_back(0xFF);
    testsupport::put_u16be(body, 1); // g
    body.push_back(2);
    testsupport::put_u16be(body, 256); // Ys
    for (int i = 0; i < 256; ++i) body.push_back(0x55);
    auto s = parse_server_key_exchange(body, 0x009E);
    EXPECT_EQ(s.kx_kind, KxKind::dhe);
    EXPECT_EQ(s.server_pub_len.value(), 256u);
    EXPECT_FALSE(s.server_curve.has_value());
}

TEST(Tls12Kex, ExplicitCurveEncodingRejected) {
    Bytes body = {0x01, 0x00, 0x00}; // curve_type 1 = explicit_prime
    EXPECT_EQ(code_of([&] { parse_server_key_exchange(body, 0xC02F); }),
              Errc::unknown_kx_encoding);
}

TEST(Tls12Kex, ClientKeyExchange) {
    Bytes ecdhe = {0x41};
    for (int i = 0; i < 65; ++i) ecdhe.push_back(0xAA);
    auto s1 = parse_client_key_exchange(ecdhe, KxKind::ecdhe);
    EXPECT_EQ(s1.client_pub_len.value(), 65u);

    Bytes rsa = {0x01, 0x00};
    for (int i = 0; i < 256; ++i) rsa.push_back(0xBB);
    auto s2 = parse_client_key_exchange(rsa, KxKind::rsa);
    EXPECT_EQ(s2.client_pub_len.value(), 256u);
    EXPECT_EQ(s2.kx_kind, KxKind::rsa);

    Bytes shortbody = {0x41};
    for (int i = 0; i < 10; ++i) shortbody.push_back(0xAA);
    EXPECT_EQ(code_of([&] { parse_client_key_exchange(shortbody, KxKind::ecdhe); }),
              Errc::malformed_body);
}

// Random mutations must either parse or raise a typed error; never crash.
TEST(TlsFuzz, MutatedClientHelloNeverOverreads) {
    auto msg = read_fixture("tls13_client_hello.bin");
    Bytes body(body_of(msg).begin(), body_of(msg).end());
    std::mt19937_64 rng(123);
    for (int iter = 0; iter < 4000; ++iter) {
        Bytes mutated = body;
        int flips = 1 + static_cast<int>(rng() % 4);
        for (int i = 0; i < flips; ++i)
            mutated[rng() % mutated.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        if (rng() % 4 == 0) mutated.resize(rng() % (mutated.size() + 1));
        try {
            parse_client_hello(mutated);
        } catch (const Error&) {
            // typed failure is acceptable
        }
    }
    SUCCEED();
}
