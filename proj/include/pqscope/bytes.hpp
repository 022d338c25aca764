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
#include <span>
#include <string>
#include <vector>

#include "pqscope/errors.hpp"

namespace pqscope {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Bounds-checked cursor over a byte buffer. Every accessor throws the error
// code the reader was constructed with when the input is too short, so the
// wire parsers never read past declared lengths.
class ByteReader {
public:
    ByteReader(ByteView data, Errc on_underrun)
        : data_(data), errc_(on_underrun) {}

    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    std::size_t position() const noexcept { return pos_; }
    bool empty() const noexcept { return remaining() == 0; }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    std::uint16_t u16be() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    std::uint32_t u24be() {
        need(3);
        std::uint32_t v = static_cast<std::uint32_t>(data_[pos_]) << 16 |
                          static_cast<std::uint32_t>(data_[pos_ + 1]) << 8 |
                          static_cast<std::uint32_t>(data_[pos_ + 2]);
        pos_ += 3;
        return v;
    }

    std::uint32_t u32be() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
        pos_ += 4;
        return v;
    }

    std::uint16_t u16le() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_ + 1] << 8 | data_[pos_]);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32le() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = v << 8 | data_[pos_ + i];
        pos_ += 4;
        return v;
    }

    std::uint64_t u64le() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = v << 8 | data_[pos_ + i];
        pos_ += 8;
        return v;
    }

    std::uint32_t u32(bool big_endian) { return big_endian ? u32be() : u32le(); }
    std::uint16_t u16(bool big_endian) { return big_endian ? u16be() : u16le(); }

    ByteView take(std::size_t n) {
        need(n);
        ByteView v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }

    Bytes take_copy(std::size_t n) {
        ByteView v = take(n);
        return Bytes(v.begin(), v.end());
    }

    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

    ByteView rest() const { return data_.subspan(pos_); }

private:
    void need(std::size_t n) const {
        if (remaining() < n) raise(errc_, "need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()));
    }

    ByteView data_;
    std::size_t pos_ = 0;
    Errc errc_;
};

inline std::string to_hex(ByteView data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

inline Bytes from_hex(const std::string& hex) {
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out;
    out.reserve(hex.size() / 2);
    int hi = -1;
    for (char c : hex) {
        if (c == ' ' || c == '\n' || c == '\t') continue;
        int v = nib(c);
        if (v < 0) raise(Errc::value_error, "invalid hex digit");
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<std::uint8_t>(hi << 4 | v));
            hi = -1;
        }
    }
    if (hi >= 0) raise(Errc::value_error, "odd-length hex string");
    return out;
}

} // namespace pqscope
