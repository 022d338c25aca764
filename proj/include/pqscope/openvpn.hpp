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
#include <cstdint>
#include <map>
#include <vector>

#include "pqscope/bytes.hpp"
#include "pqscope/errors.hpp"

// OpenVPN-over-TCP control channel de-encapsulation (no tls-auth/tls-crypt).
// Each record is a 2-byte big-endian length followed by an OpenVPN packet;
// P_CONTROL_V1 payloads carry the TLS stream, ordered by message packet-id.

namespace pqscope::openvpn {

enum Opcode : std::uint8_t {
    kControlHardResetClientV1 = 1,
    kControlHardResetServerV1 = 2,
    kControlSoftResetV1 = 3,
    kControlV1 = 4,
    kAckV1 = 5,
    kDataV1 = 6,
    kControlHardResetClientV2 = 7,
    kControlHardResetServerV2 = 8,
    kDataV2 = 9,
    kControlHardResetClientV3 = 10,
};

struct DeframeResult {
    Bytes tls;
    bool saw_hard_reset_client = false;
    bool saw_hard_reset_server = false;
    bool truncated = false; // stream ended inside a record
};

namespace detail {

struct ControlParse {
    std::uint32_t packet_id = 0;
    ByteView payload;
    bool has_payload = false;
};

// Control/ack packet body after the opcode byte:
//   session_id(8) | ack_count(1) | ack_count*4 | [remote session(8) if acks] |
//   packet_id(4) + payload   (packet-id/payload absent for P_ACK)
inline bool parse_control(ByteView body, std::uint8_t opcode, ControlParse* out) {
    ByteReader r(body, Errc::not_openvpn);
    try {
        r.skip(8); // session id
        std::uint8_t ack_count = r.u8();
        if (ack_count > 8) return false;
        r.skip(static_cast<std::size_t>(ack_count) * 4);
        if (ack_count > 0) r.skip(8); // remote session id
        if (opcode == kAckV1) return r.empty();
        out->packet_id = r.u32be();
        out->payload = r.rest();
        out->has_payload = true;
        return true;
    } catch (const Error&) {
        return false;
    }
}

} // namespace detail

inline DeframeResult deframe_openvpn_tcp_ex(ByteView stream) {
    DeframeResult result;
    std::map<std::uint32_t, Bytes> control; // packet-id -> payload, first copy wins
    std::size_t pos = 0;
    bool first = true;
    while (pos + 2 <= stream.size()) {
        std::size_t len = static_cast<std::size_t>(stream[pos] << 8 | stream[pos + 1]);
        if (len < 1) {
            if (first) raise(Errc::not_openvpn, "zero-length record");
            result.truncated = true;
            break;
        }
        if (pos + 2 + len > stream.size()) {
            if (first) raise(Errc::not_openvpn, "first record incomplete");
            result.truncated = true;
            break;
        }
        ByteView record = stream.subspan(pos + 2, len);
        std::uint8_t opcode = record[0] >> 3;
        if (opcode < kControlHardResetClientV1 || opcode > kControlHardResetClientV3) {
            if (first) raise(Errc::not_openvpn, "invalid opcode");
            break;
        }
        if (opcode != kDataV1 && opcode != kDataV2) {
            detail::ControlParse cp;
            if (!detail::parse_control(record.subspan(1), opcode, &cp)) {
                if (first) raise(Errc::not_openvpn, "control packet structure check failed");
                break;
            }
            if (opcode == kControlHardResetClientV1 || opcode == kControlHardResetClientV2 ||
                opcode == kControlHardResetClientV3)
                result.saw_hard_reset_client = true;
            if (opcode == kControlHardResetServerV1 || opcode == kControlHardResetServerV2)
                result.saw_hard_reset_server = true;
            if (opcode == kControlV1 && cp.has_payload && !cp.payload.empty())
                control.emplace(cp.packet_id, Bytes(cp.payload.begin(), cp.payload.end()));
        }
        pos += 2 + len;
        first = false;
    }
    if (first) raise(Errc::not_openvpn, "no complete record");
    if (pos < stream.size() && !result.truncated) result.truncated = true;

    for (auto& [id, payload] : control)
        result.tls.insert(result.tls.end(), payload.begin(), payload.end());
    if (!result.tls.empty()) {
        if (result.tls.size() < 3 || result.tls[0] != 0x16 || result.tls[1] != 0x03)
            raise(Errc::encrypted_control_channel,
                  "deframed control payload is not a cleartext TLS stream");
    }
    return result;
}

inline Bytes deframe_openvpn_tcp(ByteView stream) {
    return deframe_openvpn_tcp_ex(stream).tls;
}

} // namespace pqscope::openvpn
