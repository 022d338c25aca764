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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pqscope/bytes.hpp"
#include "pqscope/errors.hpp"
#include "pqscope/kexdb.hpp"

// TLS record and handshake dissection for the cleartext part of the stream.
// Only the facts needed for key-exchange identification are extracted; no
// certificate parsing, no decryption.

namespace pqscope::tls {

inline constexpr std::size_t kMaxRecordPayload = (1u << 14) + 256; // TLSCiphertext bound
inline constexpr std::uint8_t kContentChangeCipherSpec = 20;
inline constexpr std::uint8_t kContentAlert = 21;
inline constexpr std::uint8_t kContentHandshake = 22;
inline constexpr std::uint8_t kContentApplicationData = 23;

inline constexpr std::uint16_t kExtServerName = 0;
inline constexpr std::uint16_t kExtSupportedGroups = 10;
inline constexpr std::uint16_t kExtPreSharedKey = 41;
inline constexpr std::uint16_t kExtSupportedVersions = 43;
inline constexpr std::uint16_t kExtKeyShare = 51;

inline constexpr std::uint8_t kHsClientHello = 1;
inline constexpr std::uint8_t kHsServerHello = 2;
inline constexpr std::uint8_t kHsServerKeyExchange = 12;
inline constexpr std::uint8_t kHsClientKeyExchange = 16;

// Fixed ServerHello.random of a HelloRetryRequest (RFC 8446 section 4.1.3).
inline constexpr std::array<std::uint8_t, 32> kHelloRetryRandom = {
    0xCF, 0x21, 0xAD, 0x74, 0xE5, 0x9A, 0x61, 0x11, 0xBE, 0x1D, 0x8C, 0x02, 0x1E, 0x65, 0xB8,
    0x91, 0xC2, 0xA2, 0x11, 0x16, 0x7A, 0xBB, 0x8C, 0x5E, 0x07, 0x9E, 0x09, 0xE2, 0xC8, 0xA8,
    0x33, 0x9C};

struct Record {
    std::uint8_t content_type = 0;
    std::uint16_t version = 0;
    Bytes payload;
};

struct RecordParse {
    std::vector<Record> records;
    bool truncated = false; // trailing partial record at stream end
};

inline RecordParse parse_records(ByteView stream) {
    RecordParse out;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        if (stream.size() - pos < 5) {
            out.truncated = true;
            break;
        }
        std::uint8_t type = stream[pos];
        if (type < kContentChangeCipherSpec || type > kContentApplicationData)
            raise(Errc::malformed_record, "content type " + std::to_string(type));
        std::uint16_t version = static_cast<std::uint16_t>(stream[pos + 1] << 8 | stream[pos + 2]);
        std::size_t len = static_cast<std::size_t>(stream[pos + 3] << 8 | stream[pos + 4]);
        if (len > kMaxRecordPayload)
            raise(Errc::malformed_record, "record length " + std::to_string(len));
        if (stream.size() - pos - 5 < len) {
            out.truncated = true;
            break;
        }
        Record r;
        r.content_type = type;
        r.version = version;
        r.payload.assign(stream.begin() + pos + 5, stream.begin() + pos + 5 + len);
        out.records.push_back(std::move(r));
        pos += 5 + len;
    }
    return out;
}

struct HandshakeMessage {
    std::uint8_t msg_type = 0;
    Bytes body;
};

struct HandshakeReassembly {
    std::vector<HandshakeMessage> messages;
    bool truncated = false; // message header or body cut off at stream end
};

// Concatenates handshake records (stopping at the first ChangeCipherSpec or
// encrypted record) and re-splits the byte stream into messages, so hellos
// fragmented across record boundaries parse the same as unfragmented ones.
inline HandshakeReassembly reassemble_handshake_partial(const std::vector<Record>& records) {
    Bytes stream;
    for (const auto& r : records) {
        if (r.content_type != kContentHandshake) break;
        stream.insert(stream.end(), r.payload.begin(), r.payload.end());
    }
    HandshakeReassembly out;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        if (stream.size() - pos < 4) {
            out.truncated = true;
            break;
        }
        std::uint8_t type = stream[pos];
        std::size_t len = static_cast<std::size_t>(stream[pos + 1]) << 16 |
                          static_cast<std::size_t>(stream[pos + 2]) << 8 | stream[pos + 3];
        if (stream.size() - pos - 4 < len) {
            out.truncated = true;
            break;
        }
        HandshakeMessage m;
        m.msg_type = type;
        m.body.assign(stream.begin() + pos + 4, stream.begin() + pos + 4 + len);
        out.messages.push_back(std::move(m));
        pos += 4 + len;
    }
    return out;
}

inline std::vector<HandshakeMessage> reassemble_handshake(const std::vector<Record>& records) {
    auto out = reassemble_handshake_partial(records);
    if (out.truncated)
        raise(Errc::truncated_handshake, "declared message length exceeds available bytes");
    return out.messages;
}

struct KeyShareEntry {
    std::uint16_t group = 0;
    std::size_t share_len = 0;
    bool operator==(const KeyShareEntry&) const = default;
};

struct ClientHelloSummary {
    std::uint16_t legacy_version = 0;
    std::vector<std::uint16_t> supported_versions;
    std::vector<std::uint16_t> cipher_suites;
    std::vector<std::uint16_t> supported_groups;
    std::vector<KeyShareEntry> key_shares;
    std::optional<std::string> sni;
    bool operator==(const ClientHelloSummary&) const = default;
};

namespace detail {

inline void append_non_grease(std::vector<std::uint16_t>& out, std::uint16_t v) {
    if (!kexdb::is_grease(v)) out.push_back(v);
}

} // namespace detail

inline ClientHelloSummary parse_client_hello(ByteView body) {
    ByteReader r(body, Errc::malformed_hello);
    ClientHelloSummary s;
    s.legacy_version = r.u16be();
    r.skip(32); // random
    r.skip(r.u8());
    std::uint16_t suites_len = r.u16be();
    if (suites_len % 2) raise(Errc::malformed_hello, "odd cipher suite vector length");
    for (std::uint16_t i = 0; i < suites_len; i += 2)
        detail::append_non_grease(s.cipher_suites, r.u16be());
    r.skip(r.u8()); // compression methods
    if (r.empty()) return s; // extension-free hello

    std::size_t ext_total = r.u16be();
    if (ext_total != r.remaining())
        raise(Errc::malformed_hello, "extension block length mismatch");
    while (!r.empty()) {
        std::uint16_t ext_type = r.u16be();
        std::uint16_t ext_len = r.u16be();
        ByteReader e(r.take(ext_len), Errc::malformed_hello);
        switch (ext_type) {
            case kExtServerName: {
                std::uint16_t list_len = e.u16be();
                if (list_len > 0) {
                    e.u8(); // name type 0 = host_name
                    std::uint16_t name_len = e.u16be();
                    ByteView name = e.take(name_len);
                    s.sni = std::string(name.begin(), name.end());
                }
                break;
            }
            case kExtSupportedGroups: {
                std::uint16_t list_len = e.u16be();
                if (list_len % 2 || list_len != e.remaining())
                    raise(Errc::malformed_hello, "bad supported_groups length");
                while (!e.empty()) detail::append_non_grease(s.supported_groups, e.u16be());
                break;
            }
            case kExtSupportedVersions: {
                std::uint8_t list_len = e.u8();
                if (list_len % 2 || list_len != e.remaining())
                    raise(Errc::malformed_hello, "bad supported_versions length");
                while (!e.empty()) detail::append_non_grease(s.supported_versions, e.u16be());
                break;
            }
            case kExtKeyShare: {
                std::uint16_t shares_len = e.u16be();
                if (shares_len != e.remaining())
                    raise(Errc::malformed_hello, "bad key_share length");
                while (!e.empty()) {
                    std::uint16_t group = e.u16be();
                    std::uint16_t kx_len = e.u16be();
                    e.skip(kx_len);
                    if (!kexdb::is_grease(group)) s.key_shares.push_back({group, kx_len});
                }
                break;
            }
            default:
                break; // unknown extensions skipped, lengths already honored
        }
    }
    return s;
}

struct ServerHelloSummary {
    std::uint16_t selected_version = 0;
    std::uint16_t cipher_suite = 0;
    std::optional<KeyShareEntry> key_share;
    bool is_hello_retry = false;
    bool has_pre_shared_key = false; // PSK selected: resumption, no share expected
    bool operator==(const ServerHelloSummary&) const = default;
};

inline ServerHelloSummary parse_server_hello(ByteView body) {
    ByteReader r(body, Errc::malformed_hello);
    ServerHelloSummary s;
    std::uint16_t legacy = r.u16be();
    ByteView random = r.take(32);
    s.is_hello_retry = std::equal(random.begin(), random.end(), kHelloRetryRandom.begin());
    r.skip(r.u8()); // legacy session id echo
    s.cipher_suite = r.u16be();
    r.u8(); // compression
    s.selected_version = legacy;
    if (r.empty()) return s;

    std::size_t ext_total = r.u16be();
    if (ext_total != r.remaining())
        raise(Errc::malformed_hello, "extension block length mismatch");
    while (!r.empty()) {
        std::uint16_t ext_type = r.u16be();
        std::uint16_t ext_len = r.u16be();
        ByteReader e(r.take(ext_len), Errc::malformed_hello);
        switch (ext_type) {
            case kExtSupportedVersions:
                s.selected_version = e.u16be();
                break;
            case kExtKeyShare: {
                if (s.is_hello_retry || ext_len == 2) {
                    // HRR form: the extension carries only the requested group
                    s.key_share = KeyShareEntry{e.u16be(), 0};
                } else {
                    std::uint16_t group = e.u16be();
                    std::uint16_t kx_len = e.u16be();
                    e.skip(kx_len);
                    s.key_share = KeyShareEntry{group, kx_len};
                }
                break;
            }
            case kExtPreSharedKey:
                s.has_pre_shared_key = true;
                break;
            default:
                break;
        }
    }
    return s;
}

enum class KxKind { ecdhe, dhe, rsa, unknown };

inline const char* kx_kind_name(KxKind k) {
    switch (k) {
        case KxKind::ecdhe: return "ecdhe";
        case KxKind::dhe: return "dhe";
        case KxKind::rsa: return "rsa";
        case KxKind::unknown: return "unknown";
    }
    return "?";
}

// Key-exchange family of common TLS 1.2 cipher suites.
inline KxKind kx_kind_for_suite(std::uint16_t suite) {
    switch (suite) {
        case 0xC009: case 0xC00A: case 0xC013: case 0xC014:
        case 0xC023: case 0xC024: case 0xC027: case 0xC028:
        case 0xC02B: case 0xC02C: case 0xC02F: case 0xC030:
        case 0xCCA8: case 0xCCA9:
            return KxKind::ecdhe;
        case 0x0016: case 0x0033: case 0x0039: case 0x0067:
        case 0x006B: case 0x009E: case 0x009F: case 0xCCAA:
            return KxKind::dhe;
        case 0x0005: case 0x000A: case 0x002F: case 0x0035:
        case 0x003C: case 0x003D: case 0x009C: case 0x009D:
            return KxKind::rsa;
        default:
            return KxKind::unknown;
    }
}

struct Tls12KexSummary {
    std::optional<std::uint16_t> server_curve;
    std::optional<std::size_t> server_pub_len;
    std::optional<std::size_t> client_pub_len;
    KxKind kx_kind = KxKind::unknown;
    bool operator==(const Tls12KexSummary&) const = default;
};

inline Tls12KexSummary parse_server_key_exchange(ByteView body, std::uint16_t cipher_suite) {
    Tls12KexSummary s;
    KxKind kind = kx_kind_for_suite(cipher_suite);
    if (kind == KxKind::unknown) {
        // a ServerKeyExchange implies an ephemeral exchange; guess by shape
        kind = (!body.empty() && body[0] == 3) ? KxKind::ecdhe : KxKind::dhe;
    }
    ByteReader r(body, Errc::malformed_body);
    if (kind == KxKind::ecdhe) {
        std::uint8_t curve_type = r.u8();
        if (curve_type != 3)
            raise(Errc::unknown_kx_encoding,
                  "ECDHE curve_type " + std::to_string(curve_type) + " (want named_curve)");
        s.kx_kind = KxKind::ecdhe;
        s.server_curve = r.u16be();
        std::uint8_t pub_len = r.u8();
        r.skip(pub_len); // the point itself; signature follows, not parsed
        s.server_pub_len = pub_len;
        return s;
    }
    // DHE: opaque p, g, Ys each with a 16-bit length prefix
    s.kx_kind = KxKind::dhe;
    r.skip(r.u16be()); // p
    r.skip(r.u16be()); // g
    std::uint16_t ys_len = r.u16be();
    r.skip(ys_len);
    s.server_pub_len = ys_len;
    return s;
}

inline Tls12KexSummary parse_client_key_exchange(ByteView body, KxKind kind) {
    Tls12KexSummary s;
    ByteReader r(body, Errc::malformed_body);
    s.kx_kind = kind;
    std::size_t len = 0;
    if (kind == KxKind::ecdhe) {
        len = r.u8();
    } else { // dhe and rsa both use a 16-bit length prefix
        len = r.u16be();
    }
    r.skip(len);
    if (!r.empty()) raise(Errc::malformed_body, "trailing bytes after public value");
    s.client_pub_len = len;
    return s;
}

} // namespace pqscope::tls
