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

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqscope/capture.hpp"
#include "pqscope/flow.hpp"
#include "pqscope/openvpn.hpp"
#include "pqscope/quic.hpp"
#include "pqscope/ssh.hpp"
#include "pqscope/tls.hpp"
#include "pqscope/verdict.hpp"

// Capture-level orchestration: detect the handshake protocol per flow,
// extract evidence through the protocol dissectors, and fuse everything into
// a CaptureReport. Per-flow failures degrade to notes; only a malformed
// capture container aborts the analysis.

namespace pqscope::analyze {

using verdict::Classification;
using verdict::ConnectionEvidence;
using verdict::Protocol;

struct AnalyzeOptions {
    std::size_t tolerance = 0;
    bool prefer_pq = false;
};

struct FlowReport {
    ConnectionEvidence evidence;
    verdict::Verdict verdict;
    flow::Endpoint client, server;
    std::uint64_t first_ts = 0;
};

struct CaptureReport {
    std::vector<FlowReport> flows;

    std::map<Classification, int> counts() const {
        std::map<Classification, int> c;
        for (const auto& f : flows) ++c[f.verdict.classification];
        return c;
    }

    nlohmann::json to_json() const {
        nlohmann::json flows_json = nlohmann::json::array();
        std::map<std::string, std::set<std::string>> pq_ips;
        int classical = 0, post_quantum = 0, hybrid = 0, unknown = 0;
        for (const auto& f : flows) {
            nlohmann::json fj;
            fj["src"] = f.client.to_string();
            fj["dst"] = f.server.to_string();
            fj["protocol"] = verdict::protocol_name(f.evidence.protocol);
            fj["classification"] = verdict::classification_name(f.verdict.classification);
            nlohmann::json cands = nlohmann::json::array();
            for (const auto& c : f.verdict.candidates)
                cands.push_back({{"id", c.id}, {"basis", verdict::basis_name(c.basis)}});
            fj["candidates"] = std::move(cands);
            fj["notes"] = f.verdict.notes;
            flows_json.push_back(std::move(fj));

            switch (f.verdict.classification) {
                case Classification::classical: ++classical; break;
                case Classification::post_quantum: ++post_quantum; break;
                case Classification::hybrid: ++hybrid; break;
                case Classification::unknown: ++unknown; break;
            }
            if (f.verdict.classification == Classification::post_quantum ||
                f.verdict.classification == Classification::hybrid) {
                auto& ids = pq_ips[f.server.ip_string()];
                for (const auto& c : f.verdict.candidates) ids.insert(c.id);
            }
        }
        nlohmann::json pq = nlohmann::json::array();
        for (const auto& [ip, ids] : pq_ips)
            pq.push_back({{"ip", ip}, {"candidates", std::vector<std::string>(ids.begin(), ids.end())}});
        return nlohmann::json{
            {"flows", std::move(flows_json)},
            {"summary",
             {{"flows", flows.size()},
              {"classical", classical},
              {"post_quantum", post_quantum},
              {"hybrid", hybrid},
              {"unknown", unknown}}},
            {"pq_ips", std::move(pq)}};
    }
};

namespace detail {

inline bool looks_like_tls(const Bytes& s) {
    return s.size() >= 3 && s[0] == 0x16 && s[1] == 0x03 && s[2] <= 0x04;
}

inline bool looks_like_ssh(const Bytes& s) {
    if (s.size() >= 4 && std::equal(s.begin(), s.begin() + 4, "SSH-")) return true;
    // banner may follow pre-banner text lines
    auto limit = std::min<std::size_t>(s.size(), 1024);
    for (std::size_t i = 0; i + 5 < limit; ++i)
        if (s[i] == '\n' && std::equal(s.begin() + i + 1, s.begin() + i + 5, "SSH-")) return true;
    return false;
}

struct TlsStreamFacts {
    std::optional<tls::ClientHelloSummary> client_hello;
    std::optional<tls::ServerHelloSummary> server_hello;
    std::optional<tls::ServerHelloSummary> hello_retry;
    std::optional<tls::Tls12KexSummary> server_kex;
    std::optional<std::size_t> client_kex_pub_len;
    tls::KxKind client_kex_kind = tls::KxKind::unknown;
    std::vector<std::string> notes;
};

// Pull hello and key-exchange facts out of one direction's cleartext stream.
// The ServerKeyExchange parse needs the negotiated suite, and the
// ClientKeyExchange parse needs the key-exchange kind, so the two directions
// are walked in one pass over both message lists.
inline void walk_tls_messages(const std::vector<tls::HandshakeMessage>& msgs, TlsStreamFacts& f,
                              std::uint16_t negotiated_suite, tls::KxKind kx_hint) {
    for (const auto& m : msgs) {
        try {
            switch (m.msg_type) {
                case tls::kHsClientHello:
                    f.client_hello = tls::parse_client_hello(m.body);
                    break;
                case tls::kHsServerHello: {
                    auto sh = tls::parse_server_hello(m.body);
                    if (sh.is_hello_retry) f.hello_retry = sh;
                    else f.server_hello = sh;
                    break;
                }
                case tls::kHsServerKeyExchange:
                    f.server_kex = tls::parse_server_key_exchange(m.body, negotiated_suite);
                    break;
                case tls::kHsClientKeyExchange: {
                    auto cke = tls::parse_client_key_exchange(m.body, kx_hint);
                    f.client_kex_pub_len = cke.client_pub_len;
                    f.client_kex_kind = cke.kx_kind;
                    break;
                }
                default:
                    break;
            }
        } catch (const Error& e) {
            f.notes.push_back(e.what());
        }
    }
}

inline std::vector<tls::HandshakeMessage> messages_of_stream(const Bytes& stream,
                                                             std::vector<std::string>& notes) {
    try {
        auto records = tls::parse_records(stream);
        auto reassembled = tls::reassemble_handshake_partial(records.records);
        if (reassembled.truncated && reassembled.messages.empty())
            notes.push_back("handshake truncated before any complete message");
        return reassembled.messages;
    } catch (const Error& e) {
        notes.push_back(e.what());
        return {};
    }
}

// Build evidence from the two directions' handshake message lists. The
// caller supplies messages because the framing differs by carrier: TLS and
// OpenVPN streams are record-framed, QUIC CRYPTO streams are not.
inline std::optional<ConnectionEvidence> tls_evidence_messages(
    const flow::FlowKey& key, Protocol proto, const std::vector<tls::HandshakeMessage>& msgs_a,
    const std::vector<tls::HandshakeMessage>& msgs_b, std::vector<std::string> notes,
    bool* a_is_client) {
    ConnectionEvidence ev;
    ev.flow = key;
    ev.protocol = proto;
    std::vector<std::string> notes_a = std::move(notes), notes_b;
    auto has_type = [](const std::vector<tls::HandshakeMessage>& msgs, std::uint8_t t) {
        return std::any_of(msgs.begin(), msgs.end(),
                           [&](const auto& m) { return m.msg_type == t; });
    };
    bool a_client = has_type(msgs_a, tls::kHsClientHello);
    bool b_client = has_type(msgs_b, tls::kHsClientHello);
    bool a_server = has_type(msgs_a, tls::kHsServerHello);
    bool b_server = has_type(msgs_b, tls::kHsServerHello);
    if (!a_client && !b_client && !a_server && !b_server)
        return std::nullopt; // no hello at all: nothing to classify
    if (a_client) *a_is_client = true;
    else if (b_client) *a_is_client = false;
    else *a_is_client = !a_server; // server-only capture: the hello names the server
    const auto& client_msgs = *a_is_client ? msgs_a : msgs_b;
    const auto& server_msgs = *a_is_client ? msgs_b : msgs_a;
    ev.notes.insert(ev.notes.end(), notes_a.begin(), notes_a.end());
    ev.notes.insert(ev.notes.end(), notes_b.begin(), notes_b.end());

    // first pass over the server flight to learn suite and version
    TlsStreamFacts facts;
    walk_tls_messages(server_msgs, facts, 0, tls::KxKind::unknown);
    std::uint16_t suite = facts.server_hello ? facts.server_hello->cipher_suite : 0;
    tls::KxKind kind = tls::kx_kind_for_suite(suite);
    if (!facts.server_hello) {
        // client-only capture: a unanimous offered-suite family still tells
        // us how to read the ClientKeyExchange
        TlsStreamFacts probe_facts;
        walk_tls_messages(client_msgs, probe_facts, 0, tls::KxKind::unknown);
        if (probe_facts.client_hello) {
            tls::KxKind unanimous = tls::KxKind::unknown;
            bool mixed = false;
            for (std::uint16_t s : probe_facts.client_hello->cipher_suites) {
                tls::KxKind k = tls::kx_kind_for_suite(s);
                if (k == tls::KxKind::unknown) continue;
                if (unanimous == tls::KxKind::unknown) unanimous = k;
                else if (unanimous != k) mixed = true;
            }
            if (!mixed) kind = unanimous;
        }
    }
    facts = TlsStreamFacts{};
    walk_tls_messages(server_msgs, facts, suite, kind);
    walk_tls_messages(client_msgs, facts, suite,
                      facts.server_kex ? facts.server_kex->kx_kind : kind);
    ev.notes.insert(ev.notes.end(), facts.notes.begin(), facts.notes.end());

    bool is_tls13 = false;
    if (facts.server_hello) {
        is_tls13 = facts.server_hello->selected_version == 0x0304;
    } else if (facts.hello_retry) {
        is_tls13 = true;
    } else if (facts.client_hello) {
        const auto& sv = facts.client_hello->supported_versions;
        is_tls13 = std::find(sv.begin(), sv.end(), 0x0304) != sv.end();
    }
    if (proto != Protocol::openvpn_tls && proto != Protocol::quic)
        ev.protocol = is_tls13 ? Protocol::tls13 : Protocol::tls12;
    ev.hello_retry = facts.hello_retry.has_value();

    if (is_tls13) {
        if (facts.server_hello) {
            const auto& sh = *facts.server_hello;
            if (sh.key_share) {
                ev.server_group = sh.key_share->group;
                if (sh.key_share->share_len > 0) ev.server_share_len = sh.key_share->share_len;
            } else if (sh.has_pre_shared_key) {
                ev.resumed = true;
            } else {
                ev.notes.push_back("no key_share in ServerHello");
            }
        } else if (facts.hello_retry && facts.hello_retry->key_share) {
            ev.server_group = facts.hello_retry->key_share->group;
        }
        if (facts.client_hello && !facts.client_hello->key_shares.empty()) {
            const auto& shares = facts.client_hello->key_shares;
            const tls::KeyShareEntry* chosen = &shares.front();
            if (ev.server_group) {
                for (const auto& e : shares)
                    if (e.group == *ev.server_group) chosen = &e;
            }
            ev.client_group = chosen->group;
            ev.client_share_len = chosen->share_len;
            if (!facts.server_hello && !facts.hello_retry) {
                ev.notes.push_back("unconfirmed (client offer only)");
                if (shares.size() > 1) {
                    std::string offered = "offered groups:";
                    for (const auto& e : shares)
                        offered += " 0x" + to_hex(Bytes{static_cast<std::uint8_t>(e.group >> 8),
                                                        static_cast<std::uint8_t>(e.group)});
                    ev.notes.push_back(offered);
                }
            }
        }
    } else {
        if (facts.server_kex) {
            if (facts.server_kex->server_curve) ev.server_group = *facts.server_kex->server_curve;
            if (facts.server_kex->server_pub_len) ev.server_share_len = *facts.server_kex->server_pub_len;
            ev.tls12_kx = facts.server_kex->kx_kind;
        }
        if (facts.client_kex_pub_len) {
            ev.client_share_len = *facts.client_kex_pub_len;
            if (ev.tls12_kx == tls::KxKind::unknown) ev.tls12_kx = facts.client_kex_kind;
        }
        if (ev.tls12_kx == tls::KxKind::unknown && kind == tls::KxKind::rsa)
            ev.tls12_kx = tls::KxKind::rsa;
        if (ev.tls12_kx == tls::KxKind::rsa)
            ev.notes.push_back("rsa key transport match (low confidence)");
        if (!facts.server_hello && facts.client_hello)
            ev.notes.push_back("unconfirmed (client offer only)");
    }

    ev.complete = (ev.client_share_len || ev.client_group) &&
                  (ev.server_share_len || ev.server_group || ev.resumed);
    return ev;
}

// Record-framed variant for native TLS and de-encapsulated OpenVPN streams.
inline std::optional<ConnectionEvidence> tls_evidence(const flow::FlowKey& key, Protocol proto,
                                                      const Bytes& stream_a, const Bytes& stream_b,
                                                      bool* a_is_client) {
    std::vector<std::string> notes;
    auto msgs_a = messages_of_stream(stream_a, notes);
    auto msgs_b = messages_of_stream(stream_b, notes);
    return tls_evidence_messages(key, proto, msgs_a, msgs_b, std::move(notes), a_is_client);
}

// Unframed variant for QUIC CRYPTO streams.
inline std::vector<tls::HandshakeMessage> messages_of_crypto_stream(
    const quic::CryptoStream& stream, std::vector<std::string>& notes) {
    if (stream.data.empty()) return {};
    auto reassembled = tls::reassemble_handshake_partial(
        {tls::Record{tls::kContentHandshake, 0x0303, stream.data}});
    if (stream.truncated || reassembled.truncated)
        notes.push_back("crypto stream truncated");
    return reassembled.messages;
}

inline std::optional<ConnectionEvidence> ssh_evidence(const flow::FlowData& fd) {
    const Bytes* streams[2] = {&fd.dir_ab, &fd.dir_ba};
    ssh::SshKexInitSummary kexinit[2];
    bool have_kexinit[2] = {false, false};
    std::optional<ssh::SshKexDhSummary> dh[2];
    std::vector<std::string> notes;
    int client_idx = -1;

    for (int i = 0; i < 2; ++i) {
        try {
            auto banner = ssh::parse_banner(*streams[i]);
            auto packets = ssh::parse_binary_packets(ByteView(*streams[i]).subspan(banner.consumed));
            for (const auto& p : packets.packets) {
                if (p.msg_type == ssh::kMsgKexInit && !have_kexinit[i]) {
                    kexinit[i] = ssh::parse_kexinit(p.payload);
                    have_kexinit[i] = true;
                } else if (p.msg_type == ssh::kMsgKexEcdhInit) {
                    dh[i] = ssh::parse_kex_dh(p.payload, p.msg_type);
                    client_idx = i;
                } else if (p.msg_type == ssh::kMsgKexEcdhReply) {
                    dh[i] = ssh::parse_kex_dh(p.payload, p.msg_type);
                }
            }
        } catch (const Error& e) {
            notes.push_back(e.what());
        }
    }
    if (!have_kexinit[0] && !have_kexinit[1] && !dh[0] && !dh[1]) return std::nullopt;
    if (client_idx < 0) {
        // no KEXDH yet; the flow initiator (when captured) is the client
        client_idx = fd.initiator && *fd.initiator == flow::Direction::ba ? 1 : 0;
    }
    int server_idx = 1 - client_idx;

    ConnectionEvidence ev;
    ev.flow = fd.key;
    ev.protocol = Protocol::ssh;
    ev.notes = std::move(notes);
    if (have_kexinit[client_idx] && have_kexinit[server_idx]) {
        auto chosen = ssh::negotiate(kexinit[client_idx].kex_algorithms,
                                     kexinit[server_idx].kex_algorithms);
        if (chosen) ev.ssh_negotiated_name = *chosen;
        else ev.notes.push_back("no common kex algorithm");
    }
    if (dh[client_idx] && dh[client_idx]->msg_type == ssh::kMsgKexEcdhInit)
        ev.client_share_len = dh[client_idx]->public_value_len;
    if (dh[server_idx] && dh[server_idx]->msg_type == ssh::kMsgKexEcdhReply)
        ev.server_share_len = dh[server_idx]->public_value_len;
    ev.complete = ev.client_share_len && ev.server_share_len;
    // report direction for src/dst display
    ev.notes.insert(ev.notes.begin(), client_idx == 0 ? "#client=ab" : "#client=ba");
    return ev;
}

inline std::optional<ConnectionEvidence> quic_evidence(const flow::FlowData& fd) {
    const std::vector<Bytes>* sides[2] = {&fd.dgrams_ab, &fd.dgrams_ba};
    std::vector<std::string> notes;

    // locate a v1 long-header datagram to establish the genesis dcid
    auto long_header_dcid = [](const Bytes& d) -> std::optional<Bytes> {
        if (d.size() < 7 || (d[0] & 0x80) == 0) return std::nullopt;
        std::uint32_t version = static_cast<std::uint32_t>(d[1]) << 24 |
                                static_cast<std::uint32_t>(d[2]) << 16 |
                                static_cast<std::uint32_t>(d[3]) << 8 | d[4];
        if (version != quic::kVersion1) return std::nullopt;
        std::uint8_t dcid_len = d[5];
        if (dcid_len > 20 || d.size() < 6u + dcid_len) return std::nullopt;
        return Bytes(d.begin() + 6, d.begin() + 6 + dcid_len);
    };

    int client_idx = -1;
    Bytes genesis;
    for (int i = 0; i < 2 && client_idx < 0; ++i) {
        for (const auto& d : *sides[i]) {
            auto dcid = long_header_dcid(d);
            if (!dcid) continue;
            // the client's first Initial is padded to at least 1200 bytes
            if (d.size() >= 1200) {
                client_idx = i;
                genesis = *dcid;
                break;
            }
        }
    }
    if (client_idx < 0) {
        // fall back: first side with any v1 long header
        for (int i = 0; i < 2 && client_idx < 0; ++i)
            for (const auto& d : *sides[i])
                if (auto dcid = long_header_dcid(d)) {
                    client_idx = i;
                    genesis = *dcid;
                    break;
                }
    }
    if (client_idx < 0) return std::nullopt;
    int server_idx = 1 - client_idx;

    auto client_keys = quic::derive_initial_protection(genesis, quic::kVersion1,
                                                       quic::Side::client);
    auto server_keys = quic::derive_initial_protection(genesis, quic::kVersion1,
                                                       quic::Side::server);

    auto collect = [&](int side_idx, const quic::InitialKeys& keys) {
        std::vector<quic::CryptoFrame> frames;
        for (const auto& d : *sides[side_idx]) {
            try {
                auto res = quic::unprotect_and_decrypt(d, keys);
                for (auto& p : res.packets)
                    for (auto& cf : p.crypto_frames) frames.push_back(std::move(cf));
                if (res.retry_new_dcid) notes.push_back("retry packet seen");
            } catch (const Error& e) {
                notes.push_back(std::string("quic: ") + e.what());
            }
        }
        return quic::reassemble_crypto(frames);
    };
    auto client_stream = collect(client_idx, client_keys);
    auto server_stream = collect(server_idx, server_keys);

    bool a_is_client = true;
    auto msgs_client = messages_of_crypto_stream(client_stream, notes);
    auto msgs_server = messages_of_crypto_stream(server_stream, notes);
    auto ev = tls_evidence_messages(fd.key, Protocol::quic,
                                    client_idx == 0 ? msgs_client : msgs_server,
                                    client_idx == 0 ? msgs_server : msgs_client,
                                    std::move(notes), &a_is_client);
    if (!ev) return std::nullopt;
    ev->protocol = Protocol::quic;
    ev->notes.insert(ev->notes.begin(), a_is_client ? "#client=ab" : "#client=ba");
    return ev;
}

} // namespace detail

inline CaptureReport analyze_flows(const std::map<flow::FlowKey, flow::FlowData>& flows,
                                   const kexdb::ProfileSet& profiles,
                                   const AnalyzeOptions& options = {}) {
    CaptureReport report;
    for (const auto& [key, fd] : flows) {
        std::optional<ConnectionEvidence> ev;
        bool a_is_client = true;
        if (key.transport == flow::Transport::udp) {
            ev = detail::quic_evidence(fd);
        } else if (detail::looks_like_ssh(fd.dir_ab) || detail::looks_like_ssh(fd.dir_ba)) {
            ev = detail::ssh_evidence(fd);
        } else if (detail::looks_like_tls(fd.dir_ab) || detail::looks_like_tls(fd.dir_ba)) {
            ev = detail::tls_evidence(key, Protocol::tls13, fd.dir_ab, fd.dir_ba, &a_is_client);
        } else if (!fd.dir_ab.empty() || !fd.dir_ba.empty()) {
            try {
                // a direction missing from the capture is an empty TLS stream,
                // not a framing failure
                auto deframe_dir = [](const Bytes& s) {
                    return s.empty() ? openvpn::DeframeResult{}
                                     : openvpn::deframe_openvpn_tcp_ex(s);
                };
                auto ovpn_a = deframe_dir(fd.dir_ab);
                auto ovpn_b = deframe_dir(fd.dir_ba);
                ev = detail::tls_evidence(key, Protocol::openvpn_tls, ovpn_a.tls, ovpn_b.tls,
                                          &a_is_client);
            } catch (const Error& e) {
                if (e.code() == Errc::encrypted_control_channel) {
                    ConnectionEvidence enc;
                    enc.flow = key;
                    enc.protocol = Protocol::openvpn_tls;
                    enc.notes.push_back(e.what());
                    ev = enc;
                }
                // NotOpenVPN: not a handshake protocol we know; skip the flow
            }
        }
        if (!ev) continue;

        // consume the direction marker some extractors prepend
        if (!ev->notes.empty() && ev->notes.front().rfind("#client=", 0) == 0) {
            a_is_client = ev->notes.front() == "#client=ab";
            ev->notes.erase(ev->notes.begin());
        }
        if (fd.truncated) ev->notes.push_back("flow truncated");

        FlowReport fr;
        fr.evidence = *ev;
        fr.verdict = verdict::evaluate(*ev, profiles, {options.tolerance, options.prefer_pq});
        fr.client = a_is_client ? key.a : key.b;
        fr.server = a_is_client ? key.b : key.a;
        fr.first_ts = fd.first_ts;
        report.flows.push_back(std::move(fr));
    }
    std::sort(report.flows.begin(), report.flows.end(), [](const FlowReport& x, const FlowReport& y) {
        return std::tie(x.first_ts, x.evidence.flow) < std::tie(y.first_ts, y.evidence.flow);
    });
    return report;
}

inline CaptureReport analyze_capture(const std::vector<capture::Frame>& frames,
                                     const kexdb::ProfileSet& profiles,
                                     const AnalyzeOptions& options = {}) {
    return analyze_flows(flow::assemble_flows(frames), profiles, options);
}

inline CaptureReport analyze_capture_bytes(ByteView file, const kexdb::ProfileSet& profiles,
                                           const AnalyzeOptions& options = {}) {
    return analyze_capture(capture::read_capture(file), profiles, options);
}

} // namespace pqscope::analyze
