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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "pqscope/capture.hpp"
#include "pqscope/flow.hpp"
#include "pqscope/openvpn.hpp"
#include "support/builders.hpp"

using namespace pqscope;
using namespace pqscope::capture;
using namespace pqscope::flow;
using namespace testsupport;

namespace {

Bytes bytes_of(const char* s) { return Bytes(s, s + std::string(s).size()); }

constexpr std::uint32_t kClientIp = 0x0A000001; // 10.0.0.1
constexpr std::uint32_t kServerIp = 0x0A000002; // 10.0.0.2

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected a pqscope::Error";
    return Errc::parse_error;
}

} // namespace

TEST(Capture, EmptyPcap) {
    auto file = write_pcap({});
    EXPECT_EQ(file.size(), 24u);
    EXPECT_TRUE(read_capture(file).empty());
}

TEST(Capture, BadMagic) {
    Bytes junk = {0xDE, 0xAD, 0xBE, 0xEF, 0, 0, 0, 0};
    EXPECT_EQ(code_of([&] { read_capture(junk); }), Errc::malformed_capture);
    Bytes tiny = {0xDE, 0xAD};
    EXPECT_EQ(code_of([&] { read_capture(tiny); }), Errc::malformed_capture);
}

TEST(Capture, PcapngSingleEpb) {
    auto frame = tcp_frame(1234, kClientIp, kServerIp, 40000, 443, 1, 0x18, bytes_of("hi"));
    auto file = write_pcapng({frame});
    auto frames = read_capture(file);
    ASSERT_EQ(frames.size(), 1u);
    EXPECT_EQ(frames[0].link_type, kLinkEthernet);
    EXPECT_EQ(frames[0].ts_ns, 1234u);
    EXPECT_EQ(frames[0].data, frame.data);
}

TEST(Capture, RoundTripProperty) {
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<Frame> frames;
        std::size_t n = rng() % 6;
        for (std::size_t i = 0; i < n; ++i) {
            Frame f;
            f.ts_ns = (rng() % 1000000) * 1000u; // microsecond-representable
            f.link_type = kLinkEthernet;
            f.data.resize(14 + rng() % 64);
            for (auto& b : f.data) b = static_cast<std::uint8_t>(rng());
            frames.push_back(std::move(f));
        }
        for (bool nanos : {false, true}) {
            auto readback = read_capture(write_pcap(frames, nanos));
            ASSERT_EQ(readback.size(), frames.size());
            for (std::size_t i = 0; i < frames.size(); ++i) {
                EXPECT_EQ(readback[i].ts_ns, frames[i].ts_ns);
                EXPECT_EQ(readback[i].data, frames[i].data);
            }
        }
        auto readback = read_capture(write_pcapng(frames));
        ASSERT_EQ(readback.size(), frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i) {
            EXPECT_EQ(readback[i].ts_ns, frames[i].ts_ns);
            EXPECT_EQ(readback[i].data, frames[i].data);
        }
    }
}

TEST(Capture, UnsupportedLinkType) {
    std::vector<Frame> frames;
    Frame f;
    f.link_type = 147; // DLT_USER0
    f.data = {1, 2, 3};
    frames.push_back(f);
    EXPECT_EQ(code_of([&] { read_capture(write_pcap(frames)); }), Errc::unsupported_link_type);
}

TEST(Capture, UnknownBlockTypesSkipped) {
    auto frame = tcp_frame(50, kClientIp, kServerIp, 40000, 443, 1, 0x18, bytes_of("x"));
    auto file = write_pcapng({frame});
    Bytes custom;
    put_u32le(custom, 0xB16B00B5);
    pcapng_block(file, 0x00000BAD, custom);
    // re-append the EPB section after the unknown block
    auto tail = write_pcapng({frame});
    file.insert(file.end(), tail.begin(), tail.end());
    auto frames = read_capture(file);
    EXPECT_EQ(frames.size(), 2u);
}

TEST(Flows, OutOfOrderSegments) {
    Bytes part1 = bytes_of("hello ");
    Bytes part2 = bytes_of("world");
    auto f1 = tcp_frame(100, kClientIp, kServerIp, 40000, 443, 1000, 0x18, part1);
    auto f2 = tcp_frame(200, kClientIp, kServerIp, 40000, 443,
                        1000 + static_cast<std::uint32_t>(part1.size()), 0x18, part2);
    auto in_order = assemble_flows({f1, f2});
    auto reversed = assemble_flows({f2, f1});
    ASSERT_EQ(in_order.size(), 1u);
    ASSERT_EQ(reversed.size(), 1u);
    const auto& a = in_order.begin()->second;
    const auto& b = reversed.begin()->second;
    EXPECT_EQ(a.dir_ab, bytes_of("hello world"));
    EXPECT_EQ(a.dir_ab, b.dir_ab);
    EXPECT_FALSE(a.truncated);
    EXPECT_FALSE(b.truncated);
}

TEST(Flows, RetransmissionDeduplicated) {
    Bytes payload = bytes_of("abcd");
    auto f1 = tcp_frame(100, kClientIp, kServerIp, 40000, 443, 5, 0x18, payload);
    auto f2 = tcp_frame(150, kClientIp, kServerIp, 40000, 443, 5, 0x18, payload);
    auto flows = assemble_flows({f1, f2});
    EXPECT_EQ(flows.begin()->second.dir_ab, payload);
}

TEST(Flows, GapMarksTruncated) {
    auto f1 = tcp_frame(100, kClientIp, kServerIp, 40000, 443, 0, 0x18, bytes_of("aa"));
    auto f3 = tcp_frame(300, kClientIp, kServerIp, 40000, 443, 4, 0x18, bytes_of("cc"));
    auto flows = assemble_flows({f1, f3});
    const auto& fd = flows.begin()->second;
    EXPECT_TRUE(fd.truncated);
    EXPECT_EQ(fd.dir_ab, bytes_of("aa")); // stream ends at the gap
}

TEST(Flows, KeyCanonicalization) {
    Endpoint x, y;
    x.addr = {10, 0, 0, 1};
    x.port = 40000;
    y.addr = {10, 0, 0, 2};
    y.port = 443;
    EXPECT_EQ(FlowKey::canonical(x, y, Transport::tcp), FlowKey::canonical(y, x, Transport::tcp));
}

TEST(Flows, PermutationInvariance) {
    std::mt19937_64 rng(99);
    for (int iter = 0; iter < 50; ++iter) {
        // non-overlapping segments covering [0, n*4)
        std::size_t n = 2 + rng() % 6;
        std::vector<Frame> frames;
        Bytes expected;
        for (std::size_t i = 0; i < n; ++i) {
            Bytes chunk(4);
            for (auto& b : chunk) b = static_cast<std::uint8_t>(rng());
            expected.insert(expected.end(), chunk.begin(), chunk.end());
            frames.push_back(tcp_frame(i, kClientIp, kServerIp, 40000, 443,
                                       static_cast<std::uint32_t>(100 + i * 4), 0x18, chunk));
        }
        std::shuffle(frames.begin(), frames.end(), rng);
        auto flows = assemble_flows(frames);
        ASSERT_EQ(flows.size(), 1u);
        EXPECT_EQ(flows.begin()->second.dir_ab, expected);
        EXPECT_FALSE(flows.begin()->second.truncated);
    }
}

TEST(Flows, SynMarksInitiatorAndConsumesSequence) {
    auto syn = tcp_frame(1, kClientIp, kServerIp, 40000, 443, 999, 0x02, {});
    auto synack = tcp_frame(2, kServerIp, kClientIp, 443, 40000, 5000, 0x12, {});
    auto data = tcp_frame(3, kClientIp, kServerIp, 40000, 443, 1000, 0x18, bytes_of("xy"));
    auto flows = assemble_flows({syn, synack, data});
    const auto& fd = flows.begin()->second;
    ASSERT_TRUE(fd.initiator.has_value());
    EXPECT_EQ(fd.dir_ab, bytes_of("xy"));
    EXPECT_FALSE(fd.truncated);
}

TEST(Flows, VlanTagSkipped) {
    Frame f;
    f.ts_ns = 5;
    f.link_type = kLinkEthernet;
    f.data = eth_frame_vlan(
        ipv4_packet(kClientIp, kServerIp, 6, tcp_segment(40000, 443, 1, 0x18, bytes_of("v"))), 42);
    auto flows = assemble_flows({f});
    ASSERT_EQ(flows.size(), 1u);
    EXPECT_EQ(flows.begin()->second.dir_ab, bytes_of("v"));
}

TEST(Flows, HostileSequenceSpanIsCappedNotAllocated) {
    // two segments two gigabytes apart must not produce a 2 GiB stream
    auto near = tcp_frame(1, kClientIp, kServerIp, 40000, 443, 1000, 0x18, bytes_of("aa"));
    auto far = tcp_frame(2, kClientIp, kServerIp, 40000, 443, 1000 + (1u << 31) - 4, 0x18,
                         bytes_of("bb"));
    auto flows = assemble_flows({near, far});
    const auto& fd = flows.begin()->second;
    EXPECT_TRUE(fd.truncated);
    EXPECT_LE(fd.dir_ab.size(), static_cast<std::size_t>(2 * flow::detail::kMaxStreamSpan));
    EXPECT_EQ(fd.dir_ab, bytes_of("aa"));
}

TEST(Flows, UdpDatagramsKeptInOrder) {
    auto f1 = udp_frame(1, kClientIp, kServerIp, 50000, 443, bytes_of("one"));
    auto f2 = udp_frame(2, kClientIp, kServerIp, 50000, 443, bytes_of("two"));
    auto f3 = udp_frame(3, kServerIp, kClientIp, 443, 50000, bytes_of("three"));
    auto flows = assemble_flows({f1, f2, f3});
    ASSERT_EQ(flows.size(), 1u);
    const auto& fd = flows.begin()->second;
    ASSERT_EQ(fd.dgrams_ab.size(), 2u);
    EXPECT_EQ(fd.dgrams_ab[0], bytes_of("one"));
    EXPECT_EQ(fd.dgrams_ab[1], bytes_of("two"));
    ASSERT_EQ(fd.dgrams_ba.size(), 1u);
}

// --- OpenVPN ----------------------------------------------------------------

TEST(OpenVpn, BareTlsIsNotOpenVpn) {
    Bytes tls = {0x16, 0x03, 0x01, 0x00, 0x05, 1, 2, 3, 4, 5};
    EXPECT_EQ(code_of([&] { openvpn::deframe_openvpn_tcp(tls); }), Errc::not_openvpn);
}

TEST(OpenVpn, ControlPayloadRoundTrip) {
    Bytes tls = {0x16, 0x03, 0x01, 0x00, 0x04, 0x01, 0x00, 0x00, 0x00};
    Bytes first(tls.begin(), tls.begin() + 5);
    Bytes second(tls.begin() + 5, tls.end());

    Bytes stream = ovpn_record(openvpn::kControlHardResetClientV2, 0x1122334455667788ull, {}, 0, {});
    auto r1 = ovpn_record(openvpn::kControlV1, 0x1122334455667788ull, {0}, 1, first);
    auto r2 = ovpn_record(openvpn::kControlV1, 0x1122334455667788ull, {1}, 2, second);
    stream.insert(stream.end(), r1.begin(), r1.end());
    stream.insert(stream.end(), r2.begin(), r2.end());

    auto result = openvpn::deframe_openvpn_tcp_ex(stream);
    EXPECT_EQ(result.tls, tls);
    EXPECT_TRUE(result.saw_hard_reset_client);
    EXPECT_FALSE(result.truncated);
}

TEST(OpenVpn, PacketIdOrderingRestored) {
    Bytes tls = {0x16, 0x03, 0x03, 0x00, 0x02, 0xAB, 0xCD};
    Bytes first(tls.begin(), tls.begin() + 4);
    Bytes second(tls.begin() + 4, tls.end());
    auto r0 = ovpn_record(openvpn::kControlV1, 7, {}, 0, first);
    auto r1 = ovpn_record(openvpn::kControlV1, 7, {}, 1, second);
    Bytes stream;
    stream.insert(stream.end(), r1.begin(), r1.end()); // id 1 arrives first
    stream.insert(stream.end(), r0.begin(), r0.end());
    EXPECT_EQ(openvpn::deframe_openvpn_tcp(stream), tls);
}

TEST(OpenVpn, EncryptedControlChannelDetected) {
    Bytes garbage = {0x9f, 0x44, 0x21, 0xd0, 0x55};
    auto rec = ovpn_record(openvpn::kControlV1, 7, {}, 0, garbage);
    EXPECT_EQ(code_of([&] { openvpn::deframe_openvpn_tcp(rec); }),
              Errc::encrypted_control_channel);
}

TEST(OpenVpn, AckOnlyStreamYieldsEmptyTls) {
    auto rec = ovpn_record(openvpn::kAckV1, 7, {3}, 0, {}, /*is_ack=*/true);
    EXPECT_TRUE(openvpn::deframe_openvpn_tcp(rec).empty());
}
