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

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pqscope/bytes.hpp"
#include "pqscope/capture.hpp"
#include "pqscope/errors.hpp"

// Link/IP/transport decoding and per-flow stream assembly. TCP streams are
// reordered by sequence number with first-copy-wins deduplication; a hole
// marks the flow truncated at the gap. No IP fragment reassembly: fragmented
// flows are marked truncated instead.

namespace pqscope::flow {

enum class Transport : std::uint8_t { tcp, udp };

struct Endpoint {
    std::array<std::uint8_t, 16> addr{}; // IPv4 in the first 4 bytes
    bool v6 = false;
    std::uint16_t port = 0;

    auto tie() const { return std::tuple(v6, addr, port); }
    bool operator==(const Endpoint& o) const { return tie() == o.tie(); }
    bool operator<(const Endpoint& o) const { return tie() < o.tie(); }

    std::string ip_string() const {
        char buf[64];
        if (v6) {
            // minimal textual form: groups of 16 bits, no :: compression
            std::string s;
            for (int i = 0; i < 16; i += 2) {
                std::snprintf(buf, sizeof(buf), "%x", addr[i] << 8 | addr[i + 1]);
                if (i) s += ':';
                s += buf;
            }
            return s;
        }
        std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", addr[0], addr[1], addr[2], addr[3]);
        return buf;
    }

    std::string to_string() const {
        return ip_string() + ":" + std::to_string(port);
    }
};

// Canonical bidirectional flow identity: endpoint `a` is the smaller one.
struct FlowKey {
    Endpoint a, b;
    Transport transport = Transport::tcp;

    static FlowKey canonical(const Endpoint& x, const Endpoint& y, Transport t) {
        FlowKey k;
        if (y < x) {
            k.a = y;
            k.b = x;
        } else {
            k.a = x;
            k.b = y;
        }
        k.transport = t;
        return k;
    }

    auto tie() const { return std::tuple(a, b, transport); }
    bool operator==(const FlowKey& o) const { return tie() == o.tie(); }
    bool operator<(const FlowKey& o) const { return tie() < o.tie(); }
};

enum class Direction { ab, ba };

struct FlowData {
    FlowKey key;
    Bytes dir_ab, dir_ba;                         // reassembled TCP payload
    std::vector<Bytes> dgrams_ab, dgrams_ba;      // UDP datagrams in capture order
    std::uint64_t first_ts = 0, last_ts = 0;
    bool truncated = false;
    std::optional<Direction> initiator;           // from a captured SYN

    const Bytes& stream(Direction d) const { return d == Direction::ab ? dir_ab : dir_ba; }
    const std::vector<Bytes>& datagrams(Direction d) const {
        return d == Direction::ab ? dgrams_ab : dgrams_ba;
    }
};

namespace detail {

struct Segment {
    std::uint32_t seq;
    Bytes data;
};

struct DirAccum {
    std::vector<Segment> segments; // arrival order
    bool saw_syn = false;
};

struct FlowAccum {
    std::uint64_t first_ts = 0, last_ts = 0;
    bool seen = false;
    bool truncated = false;
    std::optional<Direction> initiator;
    DirAccum ab, ba;
    std::vector<Bytes> dgrams_ab, dgrams_ba;
};

// A handshake flight is small; a capture claiming a wider sequence span is
// either not a handshake or crafted to exhaust memory. Segments past the cap
// are dropped and the stream marked truncated.
inline constexpr std::int64_t kMaxStreamSpan = 16 << 20;

// Reassemble one direction. Offsets are sequence deltas relative to the
// first-arrived segment, so wraparound inside a 2^31 window is handled.
inline Bytes reassemble(const std::vector<Segment>& segments, bool* truncated) {
    if (segments.empty()) return {};
    std::uint32_t base = segments.front().seq;
    std::int64_t min_rel = 0, max_end = 0;
    std::vector<std::pair<std::int64_t, const Bytes*>> placed;
    placed.reserve(segments.size());
    for (const auto& s : segments) {
        std::int64_t rel = static_cast<std::int32_t>(s.seq - base);
        if (rel < -kMaxStreamSpan || rel + static_cast<std::int64_t>(s.data.size()) > kMaxStreamSpan) {
            *truncated = true;
            continue;
        }
        placed.emplace_back(rel, &s.data);
        min_rel = std::min(min_rel, rel);
        max_end = std::max(max_end, rel + static_cast<std::int64_t>(s.data.size()));
    }
    if (placed.empty()) return {};
    std::size_t total = static_cast<std::size_t>(max_end - min_rel);
    Bytes buf(total, 0);
    std::vector<bool> written(total, false);
    for (const auto& [rel, data] : placed) {
        std::size_t off = static_cast<std::size_t>(rel - min_rel);
        for (std::size_t i = 0; i < data->size(); ++i) {
            if (!written[off + i]) { // first copy wins
                buf[off + i] = (*data)[i];
                written[off + i] = true;
            }
        }
    }
    auto gap = std::find(written.begin(), written.end(), false);
    if (gap != written.end()) {
        *truncated = true;
        buf.resize(static_cast<std::size_t>(gap - written.begin()));
    }
    return buf;
}

struct Decoded {
    Endpoint src, dst;
    Transport transport;
    ByteView payload;
    std::uint32_t tcp_seq = 0;
    std::uint8_t tcp_flags = 0;
    bool fragmented = false;
};

inline std::optional<Decoded> decode_ip(ByteView pkt) {
    if (pkt.empty()) return std::nullopt;
    Decoded d{};
    std::uint8_t version = pkt[0] >> 4;
    ByteView l4;
    std::uint8_t proto = 0;
    if (version == 4) {
        if (pkt.size() < 20) return std::nullopt;
        std::size_t ihl = (pkt[0] & 0x0f) * 4u;
        if (ihl < 20 || pkt.size() < ihl) return std::nullopt;
        std::uint16_t flags_frag = static_cast<std::uint16_t>(pkt[6] << 8 | pkt[7]);
        bool more_fragments = flags_frag & 0x2000;
        std::uint16_t frag_offset = flags_frag & 0x1fff;
        if (frag_offset != 0) return std::nullopt; // continuation: cannot attribute
        d.fragmented = more_fragments;
        std::uint16_t total_len = static_cast<std::uint16_t>(pkt[2] << 8 | pkt[3]);
        std::size_t end = std::min<std::size_t>(pkt.size(), std::max<std::size_t>(total_len, ihl));
        proto = pkt[9];
        std::copy(pkt.begin() + 12, pkt.begin() + 16, d.src.addr.begin());
        std::copy(pkt.begin() + 16, pkt.begin() + 20, d.dst.addr.begin());
        l4 = pkt.subspan(ihl, end - ihl);
    } else if (version == 6) {
        if (pkt.size() < 40) return std::nullopt;
        std::copy(pkt.begin() + 8, pkt.begin() + 24, d.src.addr.begin());
        std::copy(pkt.begin() + 24, pkt.begin() + 40, d.dst.addr.begin());
        d.src.v6 = d.dst.v6 = true;
        proto = pkt[6];
        std::size_t off = 40;
        // walk extension headers we understand
        while (true) {
            if (proto == 0 || proto == 43 || proto == 60) {
                if (pkt.size() < off + 8) return std::nullopt;
                std::uint8_t next = pkt[off];
                std::size_t hlen = (pkt[off + 1] + 1u) * 8u;
                if (pkt.size() < off + hlen) return std::nullopt;
                proto = next;
                off += hlen;
            } else if (proto == 44) { // fragment header
                if (pkt.size() < off + 8) return std::nullopt;
                std::uint16_t fo = static_cast<std::uint16_t>((pkt[off + 2] << 8 | pkt[off + 3]) & 0xfff8);
                if (fo != 0) return std::nullopt;
                d.fragmented = true;
                proto = pkt[off];
                off += 8;
            } else {
                break;
            }
        }
        l4 = pkt.subspan(off);
    } else {
        return std::nullopt;
    }

    if (proto == 6) {
        if (l4.size() < 20) return std::nullopt;
        d.transport = Transport::tcp;
        d.src.port = static_cast<std::uint16_t>(l4[0] << 8 | l4[1]);
        d.dst.port = static_cast<std::uint16_t>(l4[2] << 8 | l4[3]);
        d.tcp_seq = static_cast<std::uint32_t>(l4[4]) << 24 | static_cast<std::uint32_t>(l4[5]) << 16 |
                    static_cast<std::uint32_t>(l4[6]) << 8 | l4[7];
        std::size_t doff = (l4[12] >> 4) * 4u;
        if (doff < 20 || l4.size() < doff) return std::nullopt;
        d.tcp_flags = l4[13];
        d.payload = l4.subspan(doff);
        return d;
    }
    if (proto == 17) {
        if (l4.size() < 8) return std::nullopt;
        d.transport = Transport::udp;
        d.src.port = static_cast<std::uint16_t>(l4[0] << 8 | l4[1]);
        d.dst.port = static_cast<std::uint16_t>(l4[2] << 8 | l4[3]);
        std::uint16_t ulen = static_cast<std::uint16_t>(l4[4] << 8 | l4[5]);
        std::size_t dlen = std::min<std::size_t>(l4.size() - 8, ulen >= 8 ? ulen - 8u : 0u);
        d.payload = l4.subspan(8, dlen);
        return d;
    }
    return std::nullopt;
}

inline std::optional<Decoded> decode_frame(const capture::Frame& f) {
    ByteView data(f.data);
    switch (f.link_type) {
        case capture::kLinkEthernet: {
            if (data.size() < 14) return std::nullopt;
            std::size_t off = 12;
            std::uint16_t ethertype = static_cast<std::uint16_t>(data[off] << 8 | data[off + 1]);
            off += 2;
            while (ethertype == 0x8100 || ethertype == 0x88A8) { // VLAN tags
                if (data.size() < off + 4) return std::nullopt;
                ethertype = static_cast<std::uint16_t>(data[off + 2] << 8 | data[off + 3]);
                off += 4;
            }
            if (ethertype != 0x0800 && ethertype != 0x86DD) return std::nullopt;
            return decode_ip(data.subspan(off));
        }
        case capture::kLinkRawIp:
            return decode_ip(data);
        case capture::kLinkNull: {
            if (data.size() < 4) return std::nullopt;
            std::uint32_t family = static_cast<std::uint32_t>(data[3]) << 24 |
                                   static_cast<std::uint32_t>(data[2]) << 16 |
                                   static_cast<std::uint32_t>(data[1]) << 8 | data[0];
            if (family > 0xFFFF) // other byte order
                family = static_cast<std::uint32_t>(data[0]) << 24 |
                         static_cast<std::uint32_t>(data[1]) << 16 |
                         static_cast<std::uint32_t>(data[2]) << 8 | data[3];
            if (family != 2 && family != 24 && family != 28 && family != 30) return std::nullopt;
            return decode_ip(data.subspan(4));
        }
        case capture::kLinkLinuxSll: {
            if (data.size() < 16) return std::nullopt;
            std::uint16_t proto = static_cast<std::uint16_t>(data[14] << 8 | data[15]);
            if (proto != 0x0800 && proto != 0x86DD) return std::nullopt;
            return decode_ip(data.subspan(16));
        }
        default:
            return std::nullopt;
    }
}

} // namespace detail

inline std::map<FlowKey, FlowData> assemble_flows(const std::vector<capture::Frame>& frames) {
    std::map<FlowKey, detail::FlowAccum> accums;
    for (const auto& f : frames) {
        auto decoded = detail::decode_frame(f);
        if (!decoded) continue;
        const auto& d = *decoded;
        FlowKey key = FlowKey::canonical(d.src, d.dst, d.transport);
        Direction dir = (d.src == key.a) ? Direction::ab : Direction::ba;
        auto& acc = accums[key];
        if (!acc.seen) {
            acc.first_ts = f.ts_ns;
            acc.seen = true;
        }
        acc.last_ts = std::max(acc.last_ts, f.ts_ns);
        if (f.truncated || d.fragmented) acc.truncated = true;
        if (d.transport == Transport::tcp) {
            auto& da = dir == Direction::ab ? acc.ab : acc.ba;
            bool syn = d.tcp_flags & 0x02, ack = d.tcp_flags & 0x10;
            if (syn && !ack && !acc.initiator) acc.initiator = dir;
            if (syn) da.saw_syn = true;
            if (!d.payload.empty()) {
                // SYN and FIN occupy one sequence number; data begins after SYN
                std::uint32_t seq = d.tcp_seq + (syn ? 1u : 0u);
                da.segments.push_back({seq, Bytes(d.payload.begin(), d.payload.end())});
            }
        } else {
            auto& list = dir == Direction::ab ? acc.dgrams_ab : acc.dgrams_ba;
            list.emplace_back(d.payload.begin(), d.payload.end());
        }
    }

    std::map<FlowKey, FlowData> out;
    for (auto& [key, acc] : accums) {
        FlowData fd;
        fd.key = key;
        fd.first_ts = acc.first_ts;
        fd.last_ts = acc.last_ts;
        fd.truncated = acc.truncated;
        fd.initiator = acc.initiator;
        bool trunc = false;
        fd.dir_ab = detail::reassemble(acc.ab.segments, &trunc);
        fd.dir_ba = detail::reassemble(acc.ba.segments, &trunc);
        if (trunc) fd.truncated = true;
        fd.dgrams_ab = std::move(acc.dgrams_ab);
        fd.dgrams_ba = std::move(acc.dgrams_ba);
        out.emplace(key, std::move(fd));
    }
    return out;
}

} // namespace pqscope::flow
