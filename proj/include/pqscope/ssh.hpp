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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pqscope/bytes.hpp"
#include "pqscope/errors.hpp"

// SSH transport pre-encryption dissection: version banner, binary packets up
// to NEWKEYS, KEXINIT name-lists and KEX_ECDH_INIT/REPLY value lengths.

namespace pqscope::ssh {

inline constexpr std::uint8_t kMsgKexInit = 20;
inline constexpr std::uint8_t kMsgNewKeys = 21;
inline constexpr std::uint8_t kMsgKexEcdhInit = 30;
inline constexpr std::uint8_t kMsgKexEcdhReply = 31;

struct Banner {
    std::string version; // text after "SSH-2.0-", up to space or CRLF
    std::size_t consumed = 0;
};

inline Banner parse_banner(ByteView stream) {
    // RFC 4253: servers may send arbitrary lines before the identification
    // string; scan line by line for one starting "SSH-".
    std::size_t pos = 0;
    int lines = 0;
    while (pos < stream.size() && lines < 64) {
        std::size_t eol = pos;
        while (eol < stream.size() && stream[eol] != '\n') ++eol;
        if (eol == stream.size()) break; // no complete line
        std::size_t end = eol;
        if (end > pos && stream[end - 1] == '\r') --end;
        std::string line(stream.begin() + pos, stream.begin() + end);
        if (line.rfind("SSH-", 0) == 0) {
            if (line.rfind("SSH-2.0-", 0) != 0)
                raise(Errc::not_ssh, "unsupported protocol version in banner");
            std::string rest = line.substr(8);
            std::size_t space = rest.find(' ');
            Banner b;
            b.version = space == std::string::npos ? rest : rest.substr(0, space);
            b.consumed = eol + 1;
            return b;
        }
        pos = eol + 1;
        ++lines;
    }
    raise(Errc::not_ssh, "no SSH identification line found");
}

struct BinaryPacket {
    std::uint8_t msg_type = 0;
    Bytes payload; // message body after the type byte
};

struct PacketParse {
    std::vector<BinaryPacket> packets;
    bool truncated = false; // stream ended mid-packet
};

// Unencrypted binary packet framing; stops at the first NEWKEYS.
inline PacketParse parse_binary_packets(ByteView stream) {
    PacketParse out;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        if (stream.size() - pos < 5) {
            out.truncated = true;
            break;
        }
        std::uint32_t packet_len = static_cast<std::uint32_t>(stream[pos]) << 24 |
                                   static_cast<std::uint32_t>(stream[pos + 1]) << 16 |
                                   static_cast<std::uint32_t>(stream[pos + 2]) << 8 |
                                   stream[pos + 3];
        std::uint8_t padding_len = stream[pos + 4];
        if (packet_len == 0 || packet_len > (1u << 20))
            raise(Errc::malformed_packet, "packet length " + std::to_string(packet_len));
        if (padding_len >= packet_len)
            raise(Errc::malformed_packet, "padding length >= packet length");
        if (stream.size() - pos - 4 < packet_len) {
            out.truncated = true;
            break;
        }
        std::size_t payload_len = packet_len - padding_len - 1;
        BinaryPacket p;
        if (payload_len > 0) {
            p.msg_type = stream[pos + 5];
            p.payload.assign(stream.begin() + pos + 6, stream.begin() + pos + 5 + payload_len);
        }
        pos += 4 + packet_len;
        bool stop = p.msg_type == kMsgNewKeys;
        out.packets.push_back(std::move(p));
        if (stop) break;
    }
    return out;
}

struct SshKexInitSummary {
    std::vector<std::string> kex_algorithms;
    std::vector<std::string> host_key_algorithms;
    bool operator==(const SshKexInitSummary&) const = default;
};

namespace detail {

inline std::vector<std::string> split_names(ByteView raw) {
    std::vector<std::string> out;
    std::string cur;
    for (std::uint8_t b : raw) {
        if (b == ',') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(b));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::vector<std::string> read_name_list(ByteReader& r) {
    std::uint32_t len = r.u32be();
    if (len > r.remaining()) raise(Errc::malformed_name_list, "name-list length exceeds payload");
    return split_names(r.take(len));
}

} // namespace detail

// payload = KEXINIT body after the message-type byte
inline SshKexInitSummary parse_kexinit(ByteView payload) {
    ByteReader r(payload, Errc::malformed_name_list);
    r.skip(16); // cookie
    SshKexInitSummary s;
    s.kex_algorithms = detail::read_name_list(r);
    s.host_key_algorithms = detail::read_name_list(r);
    return s;
}

struct SshKexDhSummary {
    std::uint8_t msg_type = 0;
    std::size_t public_value_len = 0;
    std::optional<std::size_t> reply_hostkey_len;
    bool operator==(const SshKexDhSummary&) const = default;
};

inline SshKexDhSummary parse_kex_dh(ByteView payload, std::uint8_t msg_type) {
    if (msg_type != kMsgKexEcdhInit && msg_type != kMsgKexEcdhReply)
        raise(Errc::malformed_body, "not a KEX_ECDH message");
    ByteReader r(payload, Errc::malformed_body);
    SshKexDhSummary s;
    s.msg_type = msg_type;
    auto read_string_len = [&]() -> std::size_t {
        std::uint32_t len = r.u32be();
        r.skip(len);
        return len;
    };
    if (msg_type == kMsgKexEcdhInit) {
        s.public_value_len = read_string_len(); // Q_C
    } else {
        s.reply_hostkey_len = read_string_len(); // K_S
        s.public_value_len = read_string_len();  // Q_S
        read_string_len();                       // signature
    }
    return s;
}

// RFC 4253 negotiation on one list pair: the first client algorithm that the
// server also supports.
inline std::optional<std::string> negotiate(const std::vector<std::string>& client,
                                            const std::vector<std::string>& server) {
    for (const auto& c : client)
        for (const auto& s : server)
            if (c == s) return c;
    return std::nullopt;
}

} // namespace pqscope::ssh
