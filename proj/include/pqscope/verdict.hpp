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
#include <optional>
#include <string>
#include <vector>

#include "pqscope/flow.hpp"
#include "pqscope/kexdb.hpp"
#include "pqscope/tls.hpp"

// Evidence fusion: one flow's extracted handshake facts become a
// classical / post-quantum / hybrid / unknown verdict with ranked algorithm
// candidates. Identification strength is ordered: an exact registry
// codepoint or negotiated SSH name beats a client+server size pair, which
// beats a single-sided size match.

namespace pqscope::verdict {

enum class Protocol { tls13, tls12, ssh, quic, openvpn_tls };

inline const char* protocol_name(Protocol p) {
    switch (p) {
        case Protocol::tls13: return "tls13";
        case Protocol::tls12: return "tls12";
        case Protocol::ssh: return "ssh";
        case Protocol::quic: return "quic";
        case Protocol::openvpn_tls: return "openvpn_tls";
    }
    return "?";
}

struct ConnectionEvidence {
    flow::FlowKey flow;
    Protocol protocol = Protocol::tls13;
    std::optional<std::uint16_t> client_group;
    std::optional<std::size_t> client_share_len;
    std::optional<std::uint16_t> server_group;
    std::optional<std::size_t> server_share_len;
    std::optional<std::string> ssh_negotiated_name;
    bool complete = false; // both sides observed

    // collection context carried through to the verdict notes
    bool resumed = false;     // PSK-only ServerHello, no key share on the wire
    bool hello_retry = false; // an HRR was seen for this flow
    tls::KxKind tls12_kx = tls::KxKind::unknown;
    std::vector<std::string> notes;
};

enum class Classification { classical, post_quantum, hybrid, unknown };

inline const char* classification_name(Classification c) {
    switch (c) {
        case Classification::classical: return "classical";
        case Classification::post_quantum: return "post_quantum";
        case Classification::hybrid: return "hybrid";
        case Classification::unknown: return "unknown";
    }
    return "?";
}

enum class Basis { codepoint, ssh_name, size_pair, size_client_only, size_server_only };

inline const char* basis_name(Basis b) {
    switch (b) {
        case Basis::codepoint: return "codepoint";
        case Basis::ssh_name: return "ssh_name";
        case Basis::size_pair: return "size_pair";
        case Basis::size_client_only: return "size_client_only";
        case Basis::size_server_only: return "size_server_only";
    }
    return "?";
}

struct Candidate {
    std::string id;
    Basis basis;
    bool operator==(const Candidate&) const = default;
};

struct Verdict {
    flow::FlowKey flow;
    Classification classification = Classification::unknown;
    std::vector<Candidate> candidates;
    std::vector<std::string> notes;
};

struct EvaluateOptions {
    std::size_t tolerance = 0;
    bool prefer_pq = false; // bias mixed-family ambiguity toward the PQ reading
};

namespace detail {

inline Classification family_to_classification(kexdb::Family f) {
    switch (f) {
        case kexdb::Family::classical: return Classification::classical;
        case kexdb::Family::post_quantum: return Classification::post_quantum;
        case kexdb::Family::hybrid: return Classification::hybrid;
    }
    return Classification::unknown;
}

inline void classify_from_candidates(Verdict& v, const kexdb::ProfileSet& profiles,
                                     const EvaluateOptions& opt) {
    if (v.candidates.empty()) {
        v.classification = Classification::unknown;
        return;
    }
    std::optional<kexdb::Family> family;
    bool mixed = false;
    for (const auto& c : v.candidates) {
        const auto* p = profiles.find(c.id);
        if (!p) continue;
        if (!family) family = p->family;
        else if (*family != p->family) mixed = true;
    }
    if (!mixed && family) {
        v.classification = family_to_classification(*family);
        return;
    }
    v.notes.push_back("ambiguous");
    if (opt.prefer_pq) {
        for (const auto& c : v.candidates) {
            const auto* p = profiles.find(c.id);
            if (p && p->family != kexdb::Family::classical) {
                v.classification = family_to_classification(p->family);
                v.notes.push_back("prefer-pq applied");
                return;
            }
        }
    }
    v.classification = Classification::unknown;
}

} // namespace detail

inline Verdict evaluate(const ConnectionEvidence& ev, const kexdb::ProfileSet& profiles,
                        const EvaluateOptions& opt = {}) {
    Verdict v;
    v.flow = ev.flow;
    v.notes = ev.notes;
    if (ev.hello_retry) v.notes.push_back("hello_retry");

    if (ev.resumed) {
        v.classification = Classification::unknown;
        v.notes.push_back("resumed");
        return v;
    }

    // (1) exact registry codepoint selected by the server
    if (ev.server_group) {
        if (auto id = profiles.candidate_by_group(*ev.server_group)) {
            v.candidates.push_back({*id, Basis::codepoint});
            detail::classify_from_candidates(v, profiles, opt);
            return v;
        }
        v.notes.push_back("unknown group codepoint");
    }

    // (2) negotiated SSH algorithm name
    if (ev.ssh_negotiated_name) {
        if (auto id = profiles.candidate_by_ssh_name(*ev.ssh_negotiated_name)) {
            v.candidates.push_back({*id, Basis::ssh_name});
            detail::classify_from_candidates(v, profiles, opt);
            return v;
        }
        v.notes.push_back("unknown ssh kex name '" + *ev.ssh_negotiated_name + "'");
    }

    // (3) both share lengths observed: intersect the per-side candidates
    if (ev.client_share_len && ev.server_share_len) {
        auto client = profiles.candidates_by_client_len(*ev.client_share_len, opt.tolerance);
        auto server = profiles.candidates_by_server_len(*ev.server_share_len, opt.tolerance);
        std::vector<std::string> both;
        std::set_intersection(client.begin(), client.end(), server.begin(), server.end(),
                              std::back_inserter(both));
        if (both.empty() && !client.empty() && !server.empty()) {
            v.classification = Classification::unknown;
            v.notes.push_back("inconsistent pair");
            return v;
        }
        for (const auto& id : both) v.candidates.push_back({id, Basis::size_pair});
        detail::classify_from_candidates(v, profiles, opt);
        return v;
    }

    // (4) one side only: every length match is reported, ambiguity included
    if (ev.client_share_len) {
        for (const auto& id : profiles.candidates_by_client_len(*ev.client_share_len, opt.tolerance))
            v.candidates.push_back({id, Basis::size_client_only});
        detail::classify_from_candidates(v, profiles, opt);
        return v;
    }
    if (ev.server_share_len) {
        for (const auto& id : profiles.candidates_by_server_len(*ev.server_share_len, opt.tolerance))
            v.candidates.push_back({id, Basis::size_server_only});
        detail::classify_from_candidates(v, profiles, opt);
        return v;
    }

    v.classification = Classification::unknown;
    v.notes.push_back("no usable evidence");
    return v;
}

} // namespace pqscope::verdict
