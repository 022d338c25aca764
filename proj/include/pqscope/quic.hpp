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
#include <vector>

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "pqscope/bytes.hpp"
#include "pqscope/errors.hpp"

// QUIC version 1 Initial packet processing: key derivation from the
// published salt and destination connection id, header unprotection, AEAD
// decryption and CRYPTO frame reassembly. Initial packets are decryptable by
// any on-path observer; this is what makes QUIC hellos readable at all.

namespace pqscope::quic {

inline constexpr std::uint32_t kVersion1 = 0x00000001;

inline constexpr std::array<std::uint8_t, 20> kInitialSaltV1 = {
    0x38, 0x76, 0x2c, 0xf7, 0xf5, 0x59, 0x34, 0xb3, 0x4d, 0x17,
    0x9a, 0xe6, 0xa4, 0xc8, 0x0c, 0xad, 0xcc, 0xbb, 0x7f, 0x0a};

enum class Side { client, server };

struct InitialKeys {
    std::array<std::uint8_t, 16> key{};
    std::array<std::uint8_t, 12> iv{};
    std::array<std::uint8_t, 16> hp{};
};

namespace detail {

inline Bytes hmac_sha256(ByteView key, ByteView data) {
    Bytes out(32);
    unsigned int len = 32;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
              out.data(), &len))
        raise(Errc::decrypt_failed, "HMAC failure");
    out.resize(len);
    return out;
}

inline Bytes hkdf_expand(ByteView prk, ByteView info, std::size_t length) {
    Bytes out;
    Bytes t;
    std::uint8_t counter = 1;
    while (out.size() < length) {
        Bytes block(t);
        block.insert(block.end(), info.begin(), info.end());
        block.push_back(counter++);
        t = hmac_sha256(prk, block);
        out.insert(out.end(), t.begin(), t.end());
    }
    out.resize(length);
    return out;
}

inline Bytes hkdf_expand_label(ByteView secret, const std::string& label, std::size_t length) {
    std::string full = "tls13 " + label;
    Bytes info;
    info.push_back(static_cast<std::uint8_t>(length >> 8));
    info.push_back(static_cast<std::uint8_t>(length));
    info.push_back(static_cast<std::uint8_t>(full.size()));
    info.insert(info.end(), full.begin(), full.end());
    info.push_back(0); // empty context
    return hkdf_expand(secret, info, length);
}

inline Bytes aes_ecb_block(ByteView key, ByteView block16) {
    Bytes out(32);
    int len = 0;
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) raise(Errc::decrypt_failed, "cipher ctx");
    bool ok = EVP_EncryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key.data(), nullptr) == 1 &&
              EVP_CIPHER_CTX_set_padding(ctx, 0) == 1 &&
              EVP_EncryptUpdate(ctx, out.data(), &len, block16.data(),
                                static_cast<int>(block16.size())) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) raise(Errc::decrypt_failed, "AES-ECB failure");
    out.resize(static_cast<std::size_t>(len));
    return out;
}

inline Bytes aes_gcm_decrypt(ByteView key, ByteView nonce, ByteView aad, ByteView ciphertext) {
    if (ciphertext.size() < 16) raise(Errc::decrypt_failed, "ciphertext shorter than tag");
    std::size_t body_len = ciphertext.size() - 16;
    Bytes out(body_len + 16);
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) raise(Errc::decrypt_failed, "cipher ctx");
    int len = 0, total = 0;
    bool ok = EVP_DecryptInit_ex(ctx, EVP_aes_128_gcm(), nullptr, nullptr, nullptr) == 1 &&
              EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()),
                                  nullptr) == 1 &&
              EVP_DecryptInit_ex(ctx, nullptr, nullptr, key.data(), nonce.data()) == 1;
    if (ok && !aad.empty())
        ok = EVP_DecryptUpdate(ctx, nullptr, &len, aad.data(), static_cast<int>(aad.size())) == 1;
    if (ok) {
        ok = EVP_DecryptUpdate(ctx, out.data(), &len, ciphertext.data(),
                               static_cast<int>(body_len)) == 1;
        total = len;
    }
    if (ok)
        ok = EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, 16,
                                 const_cast<std::uint8_t*>(ciphertext.data() + body_len)) == 1;
    if (ok) ok = EVP_DecryptFinal_ex(ctx, out.data() + total, &len) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) raise(Errc::decrypt_failed, "AEAD tag mismatch");
    out.resize(static_cast<std::size_t>(total + len));
    return out;
}

// RFC 9000 variable-length integer
inline std::uint64_t read_varint(ByteReader& r) {
    std::uint8_t first = r.u8();
    unsigned prefix = first >> 6;
    std::uint64_t value = first & 0x3f;
    for (unsigned i = 0; i < (1u << prefix) - 1; ++i) value = value << 8 | r.u8();
    return value;
}

inline std::uint64_t decode_packet_number(std::uint64_t truncated, unsigned bits,
                                          std::uint64_t largest_seen) {
    std::uint64_t expected = largest_seen + 1;
    std::uint64_t win = 1ull << bits;
    std::uint64_t hwin = win / 2;
    std::uint64_t mask = win - 1;
    std::uint64_t candidate = (expected & ~mask) | truncated;
    if (candidate + hwin <= expected && candidate + win < (1ull << 62)) return candidate + win;
    if (candidate > expected + hwin && candidate >= win) return candidate - win;
    return candidate;
}

} // namespace detail

inline InitialKeys derive_initial_protection(ByteView dcid, std::uint32_t version, Side side) {
    if (version != kVersion1)
        raise(Errc::unsupported_version, "QUIC version " + std::to_string(version));
    Bytes initial_secret = detail::hmac_sha256(kInitialSaltV1, dcid); // HKDF-Extract
    Bytes side_secret = detail::hkdf_expand_label(
        initial_secret, side == Side::client ? "client in" : "server in", 32);
    InitialKeys keys;
    Bytes key = detail::hkdf_expand_label(side_secret, "quic key", 16);
    Bytes iv = detail::hkdf_expand_label(side_secret, "quic iv", 12);
    Bytes hp = detail::hkdf_expand_label(side_secret, "quic hp", 16);
    std::copy(key.begin(), key.end(), keys.key.begin());
    std::copy(iv.begin(), iv.end(), keys.iv.begin());
    std::copy(hp.begin(), hp.end(), keys.hp.begin());
    return keys;
}

struct CryptoFrame {
    std::uint64_t offset = 0;
    Bytes data;
};

struct QuicInitialPacket {
    std::uint32_t version = 0;
    Bytes dcid, scid;
    std::uint64_t packet_number = 0;
    std::vector<CryptoFrame> crypto_frames;
};

struct DatagramResult {
    std::vector<QuicInitialPacket> packets;
    std::optional<Bytes> retry_new_dcid; // scid carried by a Retry packet
};

// Header-unprotect and decrypt every v1 Initial packet in one UDP datagram.
// Other packet types (Handshake, 0-RTT, short header, other versions) are
// skipped. Throws DecryptFailed when an Initial is present but the AEAD tag
// does not verify under `keys`.
inline DatagramResult unprotect_and_decrypt(ByteView datagram, const InitialKeys& keys,
                                            std::uint64_t largest_pn_seen = 0) {
    DatagramResult result;
    std::size_t pos = 0;
    while (pos < datagram.size()) {
        ByteView rest = datagram.subspan(pos);
        std::uint8_t first = rest[0];
        if ((first & 0x80) == 0) break; // short header: consumes the rest
        ByteReader r(rest, Errc::decrypt_failed);
        r.skip(1);
        std::uint32_t version = r.u32be();
        if (version == 0) break; // version negotiation
        std::uint8_t dcid_len = r.u8();
        if (dcid_len > 20) raise(Errc::decrypt_failed, "dcid too long");
        Bytes dcid = r.take_copy(dcid_len);
        std::uint8_t scid_len = r.u8();
        if (scid_len > 20) raise(Errc::decrypt_failed, "scid too long");
        Bytes scid = r.take_copy(scid_len);
        std::uint8_t packet_type = (first & 0x30) >> 4;

        if (version != kVersion1) break; // cannot parse type bits of other versions
        if (packet_type == 3) {          // Retry: no length field, ends the datagram
            result.retry_new_dcid = scid;
            break;
        }
        if (packet_type == 0) r.skip(static_cast<std::size_t>(detail::read_varint(r))); // token
        std::uint64_t length = detail::read_varint(r);
        std::size_t pn_offset = pos + r.position();
        if (length < 4 + 16 || length > r.remaining())
            raise(Errc::decrypt_failed, "bad packet length field");
        std::size_t packet_end = pn_offset + static_cast<std::size_t>(length);

        if (packet_type != 0) { // Handshake / 0-RTT: skip whole packet
            pos = packet_end;
            continue;
        }

        // header protection: sample starts 4 bytes past the pn offset
        if (pn_offset + 4 + 16 > datagram.size())
            raise(Errc::decrypt_failed, "datagram too short for hp sample");
        Bytes mask = detail::aes_ecb_block(keys.hp, datagram.subspan(pn_offset + 4, 16));
        std::uint8_t unprot_first = first ^ (mask[0] & 0x0f);
        unsigned pn_len = (unprot_first & 0x03) + 1;
        Bytes pn_bytes(datagram.begin() + pn_offset, datagram.begin() + pn_offset + pn_len);
        for (unsigned i = 0; i < pn_len; ++i) pn_bytes[i] ^= mask[1 + i];
        std::uint64_t truncated_pn = 0;
        for (unsigned i = 0; i < pn_len; ++i) truncated_pn = truncated_pn << 8 | pn_bytes[i];
        std::uint64_t pn =
            detail::decode_packet_number(truncated_pn, pn_len * 8, largest_pn_seen);

        // rebuild the unprotected header as AAD
        Bytes aad(datagram.begin() + pos, datagram.begin() + pn_offset);
        aad[0] = unprot_first;
        aad.insert(aad.end(), pn_bytes.begin(), pn_bytes.end());

        std::array<std::uint8_t, 12> nonce = keys.iv;
        for (unsigned i = 0; i < 8; ++i)
            nonce[4 + i] ^= static_cast<std::uint8_t>(pn >> (8 * (7 - i)));

        ByteView ciphertext = datagram.subspan(pn_offset + pn_len,
                                               static_cast<std::size_t>(length) - pn_len);
        Bytes plaintext = detail::aes_gcm_decrypt(keys.key, nonce, aad, ciphertext);

        QuicInitialPacket pkt;
        pkt.version = version;
        pkt.dcid = std::move(dcid);
        pkt.scid = std::move(scid);
        pkt.packet_number = pn;

        ByteReader f(plaintext, Errc::decrypt_failed);
        bool stop = false;
        while (!f.empty() && !stop) {
            std::uint64_t ftype = detail::read_varint(f);
            switch (ftype) {
                case 0x00: break; // PADDING
                case 0x01: break; // PING
                case 0x02:
                case 0x03: { // ACK
                    detail::read_varint(f); // largest acknowledged
                    detail::read_varint(f); // ack delay
                    std::uint64_t ranges = detail::read_varint(f);
                    detail::read_varint(f); // first ack range
                    for (std::uint64_t i = 0; i < ranges; ++i) {
                        detail::read_varint(f); // gap
                        detail::read_varint(f); // range length
                    }
                    if (ftype == 0x03)
                        for (int i = 0; i < 3; ++i) detail::read_varint(f); // ECN counts
                    break;
                }
                case 0x06: { // CRYPTO
                    CryptoFrame cf;
                    cf.offset = detail::read_varint(f);
                    std::uint64_t len = detail::read_varint(f);
                    cf.data = f.take_copy(static_cast<std::size_t>(len));
                    pkt.crypto_frames.push_back(std::move(cf));
                    break;
                }
                case 0x1c:
                case 0x1d: { // CONNECTION_CLOSE
                    detail::read_varint(f); // error code
                    if (ftype == 0x1c) detail::read_varint(f); // frame type
                    std::uint64_t reason_len = detail::read_varint(f);
                    f.skip(static_cast<std::size_t>(reason_len));
                    break;
                }
                default:
                    stop = true; // frame we cannot measure; keep what we have
                    break;
            }
        }
        result.packets.push_back(std::move(pkt));
        pos = packet_end;
    }
    return result;
}

struct CryptoStream {
    Bytes data;
    bool truncated = false; // a gap in the offset space
};

// Initial-space CRYPTO data is a handshake flight; anything claiming more
// offset space than this is hostile or corrupt.
inline constexpr std::uint64_t kMaxCryptoSpan = 16 << 20;

// Order CRYPTO frames by offset, deduplicate overlaps (first copy wins) and
// cut the stream at the first gap.
inline CryptoStream reassemble_crypto(std::vector<CryptoFrame> frames) {
    CryptoStream out;
    std::erase_if(frames, [&](const CryptoFrame& fr) {
        bool oversize = fr.offset > kMaxCryptoSpan || fr.offset + fr.data.size() > kMaxCryptoSpan;
        if (oversize) out.truncated = true;
        return oversize;
    });
    std::uint64_t end = 0;
    for (const auto& fr : frames) end = std::max(end, fr.offset + fr.data.size());
    Bytes buf(static_cast<std::size_t>(end), 0);
    std::vector<bool> written(static_cast<std::size_t>(end), false);
    for (const auto& fr : frames) {
        for (std::size_t i = 0; i < fr.data.size(); ++i) {
            std::size_t at = static_cast<std::size_t>(fr.offset) + i;
            if (!written[at]) {
                buf[at] = fr.data[i];
                written[at] = true;
            }
        }
    }
    auto gap = std::find(written.begin(), written.end(), false);
    if (gap != written.end()) {
        out.truncated = true;
        buf.resize(static_cast<std::size_t>(gap - written.begin()));
    }
    out.data = std::move(buf);
    return out;
}

} // namespace pqscope::quic
