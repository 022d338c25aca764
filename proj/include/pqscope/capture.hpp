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
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pqscope/bytes.hpp"
#include "pqscope/errors.hpp"

// pcap / pcapng file readers. Supported link types: Ethernet(1),
// Null/Loopback(0), Raw-IP(101), Linux SLL(113). Unknown pcapng block types
// are skipped; unknown link types are a hard error.

namespace pqscope::capture {

inline constexpr std::uint16_t kLinkNull = 0;
inline constexpr std::uint16_t kLinkEthernet = 1;
inline constexpr std::uint16_t kLinkRawIp = 101;
inline constexpr std::uint16_t kLinkLinuxSll = 113;

inline bool link_type_supported(std::uint16_t lt) {
    return lt == kLinkNull || lt == kLinkEthernet || lt == kLinkRawIp || lt == kLinkLinuxSll;
}

struct Frame {
    std::uint64_t ts_ns = 0;
    std::uint16_t link_type = kLinkEthernet;
    Bytes data;
    bool truncated = false; // snap length cut the frame short
};

namespace detail {

inline std::uint64_t pow10(unsigned n) {
    std::uint64_t v = 1;
    while (n--) v *= 10;
    return v;
}

// pcapng timestamps are ticks at an interface-declared resolution.
inline std::uint64_t ticks_to_ns(std::uint64_t ticks, std::uint8_t tsresol) {
    if (tsresol & 0x80) {
        unsigned shift = tsresol & 0x7f;
        unsigned __int128 ns = static_cast<unsigned __int128>(ticks) * 1000000000u;
        return static_cast<std::uint64_t>(ns >> shift);
    }
    if (tsresol <= 9) return ticks * pow10(9 - tsresol);
    return ticks / pow10(tsresol - 9);
}

inline std::vector<Frame> read_pcap(ByteReader& r, std::uint32_t magic) {
    bool big_endian = magic == 0xA1B2C3D4 || magic == 0xA1B23C4D;
    bool nanos = magic == 0xA1B23C4D || magic == 0x4D3CB2A1;
    r.u16(big_endian); // version major
    r.u16(big_endian); // version minor
    r.skip(8);         // thiszone + sigfigs
    r.u32(big_endian); // snaplen
    std::uint32_t link = r.u32(big_endian) & 0x0000FFFF;
    if (!link_type_supported(static_cast<std::uint16_t>(link)))
        raise(Errc::unsupported_link_type, "pcap link type " + std::to_string(link));

    std::vector<Frame> out;
    while (!r.empty()) {
        if (r.remaining() < 16) raise(Errc::malformed_capture, "truncated pcap record header");
        std::uint32_t ts_sec = r.u32(big_endian);
        std::uint32_t ts_frac = r.u32(big_endian);
        std::uint32_t incl = r.u32(big_endian);
        std::uint32_t orig = r.u32(big_endian);
        if (incl > (1u << 28)) raise(Errc::malformed_capture, "implausible record length");
        if (r.remaining() < incl) raise(Errc::malformed_capture, "truncated pcap record body");
        Frame f;
        f.ts_ns = static_cast<std::uint64_t>(ts_sec) * 1000000000u +
                  (nanos ? ts_frac : static_cast<std::uint64_t>(ts_frac) * 1000u);
        f.link_type = static_cast<std::uint16_t>(link);
        f.data = r.take_copy(incl);
        f.truncated = incl < orig;
        out.push_back(std::move(f));
    }
    return out;
}

struct NgInterface {
    std::uint16_t link_type = kLinkEthernet;
    std::uint8_t tsresol = 6; // default microseconds
};

inline std::vector<Frame> read_pcapng(ByteReader& r) {
    std::vector<Frame> out;
    bool big_endian = false;
    std::vector<NgInterface> interfaces;
    bool in_section = false;

    while (!r.empty()) {
        if (r.remaining() < 12) raise(Errc::malformed_capture, "truncated pcapng block header");
        ByteView head = r.rest();
        std::uint32_t type_le = static_cast<std::uint32_t>(head[3]) << 24 |
                                static_cast<std::uint32_t>(head[2]) << 16 |
                                static_cast<std::uint32_t>(head[1]) << 8 | head[0];
        std::uint32_t type_be = static_cast<std::uint32_t>(head[0]) << 24 |
                                static_cast<std::uint32_t>(head[1]) << 16 |
                                static_cast<std::uint32_t>(head[2]) << 8 | head[3];
        bool shb = type_le == 0x0A0D0D0A; // palindrome, same both ways
        if (shb) {
            // byte-order magic decides endianness for the section
            std::uint32_t bom_le = static_cast<std::uint32_t>(head[11]) << 24 |
                                   static_cast<std::uint32_t>(head[10]) << 16 |
                                   static_cast<std::uint32_t>(head[9]) << 8 | head[8];
            if (bom_le == 0x1A2B3C4D) big_endian = false;
            else if (bom_le == 0x4D3C2B1A) big_endian = true;
            else raise(Errc::malformed_capture, "bad pcapng byte-order magic");
            interfaces.clear();
            in_section = true;
        } else if (!in_section) {
            raise(Errc::malformed_capture, "pcapng data before section header");
        }
        std::uint32_t type = big_endian ? type_be : type_le;
        r.skip(4);
        std::uint32_t total = r.u32(big_endian);
        if (total < 12 || total % 4 != 0) raise(Errc::malformed_capture, "bad pcapng block length");
        if (r.remaining() < total - 8) raise(Errc::malformed_capture, "truncated pcapng block");
        ByteReader body(r.take(total - 12), Errc::malformed_capture);
        r.skip(4); // trailing total length

        if (shb) {
            continue; // options ignored
        }
        switch (type) {
            case 1: { // Interface Description Block
                NgInterface iface;
                iface.link_type = body.u16(big_endian);
                body.u16(big_endian); // reserved
                body.u32(big_endian); // snaplen
                // walk options for if_tsresol (code 9)
                while (body.remaining() >= 4) {
                    std::uint16_t code = body.u16(big_endian);
                    std::uint16_t len = body.u16(big_endian);
                    if (code == 0) break;
                    std::size_t padded = (len + 3u) & ~3u;
                    if (body.remaining() < padded) break;
                    ByteView val = body.take(padded);
                    if (code == 9 && len >= 1) iface.tsresol = val[0];
                }
                if (!link_type_supported(iface.link_type))
                    raise(Errc::unsupported_link_type,
                          "pcapng link type " + std::to_string(iface.link_type));
                interfaces.push_back(iface);
                break;
            }
            case 6: { // Enhanced Packet Block
                std::uint32_t iface_id = body.u32(big_endian);
                std::uint32_t ts_hi = body.u32(big_endian);
                std::uint32_t ts_lo = body.u32(big_endian);
                std::uint32_t captured = body.u32(big_endian);
                std::uint32_t orig = body.u32(big_endian);
                if (iface_id >= interfaces.size())
                    raise(Errc::malformed_capture, "EPB references unknown interface");
                if (body.remaining() < captured)
                    raise(Errc::malformed_capture, "EPB data shorter than captured length");
                Frame f;
                const NgInterface& iface = interfaces[iface_id];
                f.ts_ns = ticks_to_ns(static_cast<std::uint64_t>(ts_hi) << 32 | ts_lo,
                                      iface.tsresol);
                f.link_type = iface.link_type;
                f.data = body.take_copy(captured);
                f.truncated = captured < orig;
                out.push_back(std::move(f));
                break;
            }
            case 3: { // Simple Packet Block
                std::uint32_t orig = body.u32(big_endian);
                if (interfaces.empty())
                    raise(Errc::malformed_capture, "SPB without interface description");
                std::size_t avail = body.remaining();
                std::size_t captured = std::min<std::size_t>(orig, avail);
                Frame f;
                f.link_type = interfaces[0].link_type;
                f.data = body.take_copy(captured);
                f.truncated = captured < orig;
                out.push_back(std::move(f));
                break;
            }
            default:
                break; // unknown block types skipped
        }
    }
    return out;
}

} // namespace detail

inline std::vector<Frame> read_capture(ByteView file) {
    ByteReader r(file, Errc::malformed_capture);
    if (file.size() < 4) raise(Errc::malformed_capture, "file shorter than any capture magic");
    std::uint32_t magic_be = static_cast<std::uint32_t>(file[0]) << 24 |
                             static_cast<std::uint32_t>(file[1]) << 16 |
                             static_cast<std::uint32_t>(file[2]) << 8 | file[3];
    if (magic_be == 0x0A0D0D0A) return detail::read_pcapng(r);
    if (magic_be == 0xA1B2C3D4 || magic_be == 0xD4C3B2A1 || magic_be == 0xA1B23C4D ||
        magic_be == 0x4D3CB2A1) {
        if (file.size() < 24) raise(Errc::malformed_capture, "truncated pcap header");
        r.skip(4);
        return detail::read_pcap(r, magic_be);
    }
    raise(Errc::malformed_capture, "unrecognized capture magic");
}

inline Bytes read_stream(std::istream& in) {
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::vector<Frame> read_capture_file(const std::string& path) {
    if (path == "-") return read_capture(read_stream(std::cin));
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) raise(Errc::malformed_capture, "cannot open '" + path + "'");
    return read_capture(read_stream(in));
}

} // namespace pqscope::capture
