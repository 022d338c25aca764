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
#include <cassert>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqscope/errors.hpp"

namespace pqscope::kexdb {

enum class Family { classical, post_quantum, hybrid };
enum class Mechanism { ecdh, ffdhe, rsa_kex, kem, hybrid_kem };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::classical: return "classical";
        case Family::post_quantum: return "post_quantum";
        case Family::hybrid: return "hybrid";
    }
    return "?";
}

inline const char* mechanism_name(Mechanism m) {
    switch (m) {
        case Mechanism::ecdh: return "ecdh";
        case Mechanism::ffdhe: return "ffdhe";
        case Mechanism::rsa_kex: return "rsa_kex";
        case Mechanism::kem: return "kem";
        case Mechanism::hybrid_kem: return "hybrid_kem";
    }
    return "?";
}

// One key-exchange algorithm as it appears on the wire: the byte length of
// the value each side transmits (public key, point, or KEM ciphertext) plus
// the registry identifiers that may name it directly.
struct AlgorithmProfile {
    std::string id;           // stable slug
    std::string display_name;
    Family family = Family::classical;
    Mechanism mechanism = Mechanism::ecdh;
    std::size_t client_share_len = 0; // bytes the client sends
    std::size_t server_share_len = 0; // bytes the server sends (point or ciphertext)
    std::vector<std::uint16_t> tls_group_codepoints;
    std::vector<std::string> ssh_kex_names;
    std::vector<std::string> components; // profile ids; nonempty iff family==hybrid
    bool broken = false;                 // known cryptanalytic break, kept for detection
};

// TLS GREASE codepoints follow the 0x?A?A pattern with equal bytes.
inline bool is_grease(std::uint16_t v) {
    return (v >> 8) == (v & 0xff) && (v & 0x0f) == 0x0a;
}

class ProfileSet {
public:
    explicit ProfileSet(std::vector<AlgorithmProfile> profiles) : profiles_(std::move(profiles)) {
        validate();
        index();
    }

    const std::vector<AlgorithmProfile>& profiles() const { return profiles_; }

    const AlgorithmProfile* find(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &profiles_[it->second];
    }

    std::vector<std::string> candidates_by_client_len(std::size_t len, std::size_t tolerance = 0) const {
        return by_len(by_client_len_, len, tolerance);
    }

    std::vector<std::string> candidates_by_server_len(std::size_t len, std::size_t tolerance = 0) const {
        return by_len(by_server_len_, len, tolerance);
    }

    std::optional<std::string> candidate_by_group(std::uint16_t codepoint) const {
        if (is_grease(codepoint)) return std::nullopt;
        auto it = by_codepoint_.find(codepoint);
        if (it == by_codepoint_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::string> candidate_by_ssh_name(const std::string& name) const {
        auto it = by_ssh_name_.find(name);
        if (it == by_ssh_name_.end()) return std::nullopt;
        return it->second;
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : profiles_) {
            nlohmann::json j;
            j["id"] = p.id;
            j["display_name"] = p.display_name;
            j["family"] = family_name(p.family);
            j["mechanism"] = mechanism_name(p.mechanism);
            j["client_share_len"] = p.client_share_len;
            j["server_share_len"] = p.server_share_len;
            j["tls_group_codepoints"] = p.tls_group_codepoints;
            j["ssh_kex_names"] = p.ssh_kex_names;
            j["components"] = p.components;
            j["broken"] = p.broken;
            arr.push_back(std::move(j));
        }
        return arr;
    }

    static ProfileSet from_json(const nlohmann::json& arr) {
        if (!arr.is_array()) raise(Errc::schema_error, "profile document must be a JSON array");
        std::vector<AlgorithmProfile> out;
        for (const auto& j : arr) {
            AlgorithmProfile p;
            p.id = j.at("id").get<std::string>();
            p.display_name = j.value("display_name", p.id);
            std::string fam = j.at("family").get<std::string>();
            if (fam == "classical") p.family = Family::classical;
            else if (fam == "post_quantum") p.family = Family::post_quantum;
            else if (fam == "hybrid") p.family = Family::hybrid;
            else raise(Errc::schema_error, "unknown family '" + fam + "'");
            std::string mech = j.at("mechanism").get<std::string>();
            if (mech == "ecdh") p.mechanism = Mechanism::ecdh;
            else if (mech == "ffdhe") p.mechanism = Mechanism::ffdhe;
            else if (mech == "rsa_kex") p.mechanism = Mechanism::rsa_kex;
            else if (mech == "kem") p.mechanism = Mechanism::kem;
            else if (mech == "hybrid_kem") p.mechanism = Mechanism::hybrid_kem;
            else raise(Errc::schema_error, "unknown mechanism '" + mech + "'");
            p.client_share_len = j.at("client_share_len").get<std::size_t>();
            p.server_share_len = j.at("server_share_len").get<std::size_t>();
            if (j.contains("tls_group_codepoints"))
                p.tls_group_codepoints = j["tls_group_codepoints"].get<std::vector<std::uint16_t>>();
            if (j.contains("ssh_kex_names"))
                p.ssh_kex_names = j["ssh_kex_names"].get<std::vector<std::string>>();
            if (j.contains("components"))
                p.components = j["components"].get<std::vector<std::string>>();
            p.broken = j.value("broken", false);
            out.push_back(std::move(p));
        }
        return ProfileSet(std::move(out));
    }

private:
    void validate() const {
        std::map<std::string, int> seen;
        for (const auto& p : profiles_) {
            if (++seen[p.id] > 1) raise(Errc::schema_error, "duplicate profile id '" + p.id + "'");
            bool needs_lens = p.mechanism == Mechanism::ecdh || p.mechanism == Mechanism::kem ||
                              p.mechanism == Mechanism::hybrid_kem;
            if (needs_lens && (p.client_share_len == 0 || p.server_share_len == 0))
                raise(Errc::schema_error, "profile '" + p.id + "' has zero share length");
            if ((p.family == Family::hybrid) != !p.components.empty())
                raise(Errc::schema_error, "profile '" + p.id + "': hybrid iff components nonempty");
        }
        // Hybrid share lengths must equal the sum over components.
        for (const auto& p : profiles_) {
            if (p.family != Family::hybrid) continue;
            std::size_t csum = 0, ssum = 0;
            for (const auto& cid : p.components) {
                auto it = std::find_if(profiles_.begin(), profiles_.end(),
                                       [&](const AlgorithmProfile& q) { return q.id == cid; });
                if (it == profiles_.end())
                    raise(Errc::schema_error, "hybrid '" + p.id + "' references unknown component '" + cid + "'");
                csum += it->client_share_len;
                ssum += it->server_share_len;
            }
            if (csum != p.client_share_len || ssum != p.server_share_len)
                raise(Errc::schema_error, "hybrid '" + p.id + "' share lengths do not equal component sums");
        }
    }

    void index() {
        for (std::size_t i = 0; i < profiles_.size(); ++i) {
            const auto& p = profiles_[i];
            by_id_[p.id] = i;
            by_client_len_.emplace(p.client_share_len, p.id);
            if (p.server_share_len > 0) by_server_len_.emplace(p.server_share_len, p.id);
            for (std::uint16_t cp : p.tls_group_codepoints) by_codepoint_[cp] = p.id;
            for (const auto& n : p.ssh_kex_names) by_ssh_name_[n] = p.id;
        }
    }

    static std::vector<std::string> by_len(const std::multimap<std::size_t, std::string>& idx,
                                           std::size_t len, std::size_t tolerance) {
        std::size_t lo = len > tolerance ? len - tolerance : 0;
        std::size_t hi = len + tolerance;
        std::vector<std::string> out;
        for (auto it = idx.lower_bound(lo); it != idx.end() && it->first <= hi; ++it)
            out.push_back(it->second);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    std::vector<AlgorithmProfile> profiles_;
    std::map<std::string, std::size_t> by_id_;
    std::multimap<std::size_t, std::string> by_client_len_;
    std::multimap<std::size_t, std::string> by_server_len_;
    std::map<std::uint16_t, std::string> by_codepoint_;
    std::map<std::string, std::string> by_ssh_name_;
};

// Built-in profile table. Share lengths are stored data; the test suite
// cross-checks every entry against reference constants derived from the
// algorithms' parameter sets (tests/data/kex_lengths_reference.json) and
// against runtime-computed classical key sizes, so a bad entry fails CI.
inline ProfileSet load_builtin() {
    std::vector<AlgorithmProfile> p;
    auto add = [&](AlgorithmProfile q) { p.push_back(std::move(q)); };

    // classical ECDH-style groups
    add({"x25519", "X25519", Family::classical, Mechanism::ecdh, 32, 32,
         {0x001D}, {"curve25519-sha256", "curve25519-sha256@libssh.org"}, {}});
    add({"x448", "X448", Family::classical, Mechanism::ecdh, 56, 56, {0x001E}, {}, {}});
    add({"ecdh_p256", "ECDH P-256", Family::classical, Mechanism::ecdh, 65, 65,
         {0x0017}, {"ecdh-sha2-nistp256"}, {}});
    add({"ecdh_p384", "ECDH P-384", Family::classical, Mechanism::ecdh, 97, 97,
         {0x0018}, {"ecdh-sha2-nistp384"}, {}});
    add({"ecdh_p521", "ECDH P-521", Family::classical, Mechanism::ecdh, 133, 133,
         {0x0019}, {"ecdh-sha2-nistp521"}, {}});
    add({"ffdhe_2048", "FFDHE-2048", Family::classical, Mechanism::ffdhe, 256, 256,
         {0x0100}, {"diffie-hellman-group14-sha256", "diffie-hellman-group14-sha1"}, {}});
    // RSA key transport: only the encrypted premaster length is observable
    // (TLS 1.2 ClientKeyExchange); matches are low-confidence by design.
    add({"rsa_2048", "RSA-2048 key transport", Family::classical, Mechanism::rsa_kex, 256, 0, {}, {}, {}});
    add({"rsa_3072", "RSA-3072 key transport", Family::classical, Mechanism::rsa_kex, 384, 0, {}, {}, {}});
    add({"rsa_4096", "RSA-4096 key transport", Family::classical, Mechanism::rsa_kex, 512, 0, {}, {}, {}});

    // lattice KEMs (ML-KEM shares the Kyber parameter sets)
    add({"kyber512", "ML-KEM-512 (Kyber512)", Family::post_quantum, Mechanism::kem, 800, 768, {}, {}, {}});
    add({"kyber768", "ML-KEM-768 (Kyber768)", Family::post_quantum, Mechanism::kem, 1184, 1088, {}, {}, {}});
    add({"kyber1024", "ML-KEM-1024 (Kyber1024)", Family::post_quantum, Mechanism::kem, 1568, 1568, {}, {}, {}});
    add({"frodo_640", "FrodoKEM-640", Family::post_quantum, Mechanism::kem, 9616, 9720, {}, {}, {}});
    add({"frodo_976", "FrodoKEM-976", Family::post_quantum, Mechanism::kem, 15632, 15744, {}, {}, {}});
    add({"frodo_1344", "FrodoKEM-1344", Family::post_quantum, Mechanism::kem, 21520, 21632, {}, {}, {}});
    add({"sntrup761", "Streamlined NTRU Prime 761", Family::post_quantum, Mechanism::kem, 1158, 1039, {}, {}, {}});

    // code-based KEMs
    add({"hqc_128", "HQC-128", Family::post_quantum, Mechanism::kem, 2249, 4481, {}, {}, {}});
    add({"hqc_192", "HQC-192", Family::post_quantum, Mechanism::kem, 4522, 9026, {}, {}, {}});
    add({"hqc_256", "HQC-256", Family::post_quantum, Mechanism::kem, 7245, 14469, {}, {}, {}});
    add({"bike_l1", "BIKE-L1", Family::post_quantum, Mechanism::kem, 1541, 1573, {}, {}, {}});
    add({"bike_l3", "BIKE-L3", Family::post_quantum, Mechanism::kem, 3083, 3115, {}, {}, {}});
    add({"bike_l5", "BIKE-L5", Family::post_quantum, Mechanism::kem, 5122, 5154, {}, {}, {}});
    add({"classic_mceliece_348864", "Classic McEliece 348864", Family::post_quantum, Mechanism::kem,
         261120, 96, {}, {}, {}});
    add({"classic_mceliece_460896", "Classic McEliece 460896", Family::post_quantum, Mechanism::kem,
         524160, 156, {}, {}, {}});
    add({"classic_mceliece_6688128", "Classic McEliece 6688128", Family::post_quantum, Mechanism::kem,
         1044992, 208, {}, {}, {}});
    add({"classic_mceliece_6960119", "Classic McEliece 6960119", Family::post_quantum, Mechanism::kem,
         1047319, 194, {}, {}, {}});
    add({"classic_mceliece_8192128", "Classic McEliece 8192128", Family::post_quantum, Mechanism::kem,
         1357824, 208, {}, {}, {}});

    // isogeny KEMs: broken (2022), retained because detection still matters
    add({"sike_p434", "SIKE-p434 (broken)", Family::post_quantum, Mechanism::kem, 330, 346, {}, {}, {}, true});
    add({"sike_p503", "SIKE-p503 (broken)", Family::post_quantum, Mechanism::kem, 378, 402, {}, {}, {}, true});
    add({"sike_p610", "SIKE-p610 (broken)", Family::post_quantum, Mechanism::kem, 462, 486, {}, {}, {}, true});

    // hybrids: shares are plain concatenations of the component shares
    add({"x25519_kyber512", "X25519 + Kyber512", Family::hybrid, Mechanism::hybrid_kem, 832, 800,
         {}, {}, {"kyber512", "x25519"}});
    add({"x25519_kyber768", "X25519 + Kyber768 (draft00)", Family::hybrid, Mechanism::hybrid_kem, 1216, 1120,
         {0x6399}, {}, {"kyber768", "x25519"}});
    add({"p256_kyber768", "P-256 + Kyber768 (draft00)", Family::hybrid, Mechanism::hybrid_kem, 1249, 1153,
         {0x639A}, {}, {"kyber768", "ecdh_p256"}});
    add({"x448_kyber768", "X448 + Kyber768", Family::hybrid, Mechanism::hybrid_kem, 1240, 1144,
         {}, {}, {"kyber768", "x448"}});
    add({"x448_kyber1024", "X448 + Kyber1024", Family::hybrid, Mechanism::hybrid_kem, 1624, 1624,
         {}, {}, {"kyber1024", "x448"}});
    add({"x25519_mlkem768", "X25519MLKEM768", Family::hybrid, Mechanism::hybrid_kem, 1216, 1120,
         {0x11EC}, {"mlkem768x25519-sha256"}, {"kyber768", "x25519"}});
    add({"secp256r1_mlkem768", "SecP256r1MLKEM768", Family::hybrid, Mechanism::hybrid_kem, 1249, 1153,
         {0x11EB}, {}, {"kyber768", "ecdh_p256"}});
    add({"sntrup761_x25519", "sntrup761 + X25519", Family::hybrid, Mechanism::hybrid_kem, 1190, 1071,
         {}, {"sntrup761x25519-sha512@openssh.com", "sntrup761x25519-sha512"}, {"sntrup761", "x25519"}});

    return ProfileSet(std::move(p));
}

// Minimum client-share-length gap between classical ECDH-style groups and
// unbroken PQ KEMs. RSA/FFDHE transports and broken KEMs are excluded: the
// size argument applies to the shares deployed stacks actually negotiate.
inline std::size_t min_classical_pq_client_gap(const ProfileSet& set) {
    std::size_t best = SIZE_MAX;
    for (const auto& c : set.profiles()) {
        if (c.family != Family::classical || c.mechanism != Mechanism::ecdh) continue;
        for (const auto& q : set.profiles()) {
            if (q.family != Family::post_quantum || q.mechanism != Mechanism::kem || q.broken) continue;
            std::size_t gap = c.client_share_len > q.client_share_len
                                  ? c.client_share_len - q.client_share_len
                                  : q.client_share_len - c.client_share_len;
            best = std::min(best, gap);
        }
    }
    return best;
}

} // namespace pqscope::kexdb
