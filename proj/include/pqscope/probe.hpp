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

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/rand.h>

#include "pqscope/bytes.hpp"
#include "pqscope/errors.hpp"
#include "pqscope/kexdb.hpp"
#include "pqscope/tls.hpp"
#include "pqscope/verdict.hpp"

// Active probing: offer chosen named groups in a TLS 1.3 ClientHello and
// record what the server selects. The default mode advertises the groups but
// sends only a fresh X25519 share; servers preferring another group answer
// with a HelloRetryRequest that names it, which is exactly the evidence we
// want without having to fabricate valid KEM public keys.

namespace pqscope::probe {

enum class ShareSource { hrr_mode, blob_mode };

struct HelloOptions {
    std::vector<std::uint16_t> offer; // named groups, client preference order
    ShareSource mode = ShareSource::hrr_mode;
    std::map<std::uint16_t, Bytes> blobs; // blob_mode: share bytes per group
    std::string sni;
};

namespace detail {

inline void put_u16(Bytes& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u24(Bytes& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

inline Bytes random_bytes(std::size_t n) {
    Bytes b(n);
    if (RAND_bytes(b.data(), static_cast<int>(n)) != 1)
        raise(Errc::parse_error, "RAND_bytes failed");
    return b;
}

inline void put_extension(Bytes& out, std::uint16_t type, const Bytes& body) {
    put_u16(out, type);
    put_u16(out, static_cast<std::uint16_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
}

} // namespace detail

// Returns the record-framed ClientHello flight, ready to write to a socket.
inline Bytes build_probe_hello(const HelloOptions& options) {
    using detail::put_u16;
    if (options.offer.empty()) raise(Errc::parse_error, "no groups offered");

    Bytes body;
    put_u16(body, 0x0303); // legacy version
    Bytes random = detail::random_bytes(32);
    body.insert(body.end(), random.begin(), random.end());
    Bytes session = detail::random_bytes(32); // middlebox-compatible session id
    body.push_back(32);
    body.insert(body.end(), session.begin(), session.end());
    const std::uint16_t suites[] = {0x1301, 0x1302, 0x1303};
    put_u16(body, sizeof(suites) / sizeof(suites[0]) * 2);
    for (auto s : suites) put_u16(body, s);
    body.push_back(1); // compression methods: null
    body.push_back(0);

    Bytes exts;
    if (!options.sni.empty()) {
        Bytes sni;
        put_u16(sni, static_cast<std::uint16_t>(options.sni.size() + 3));
        sni.push_back(0);
        put_u16(sni, static_cast<std::uint16_t>(options.sni.size()));
        sni.insert(sni.end(), options.sni.begin(), options.sni.end());
        detail::put_extension(exts, tls::kExtServerName, sni);
    }
    {
        Bytes groups;
        put_u16(groups, static_cast<std::uint16_t>(options.offer.size() * 2));
        for (auto g : options.offer) put_u16(groups, g);
        detail::put_extension(exts, tls::kExtSupportedGroups, groups);
    }
    {
        Bytes versions = {2};
        put_u16(versions, 0x0304);
        detail::put_extension(exts, tls::kExtSupportedVersions, versions);
    }
    {
        Bytes sigalgs;
        const std::uint16_t algs[] = {0x0403, 0x0804, 0x0401, 0x0503, 0x0805,
                                      0x0501, 0x0806, 0x0601};
        put_u16(sigalgs, sizeof(algs) / sizeof(algs[0]) * 2);
        for (auto a : algs) put_u16(sigalgs, a);
        detail::put_extension(exts, 13, sigalgs);
    }
    {
        Bytes modes = {1, 1}; // psk_dhe_ke
        detail::put_extension(exts, 45, modes);
    }
    {
        Bytes shares;
        Bytes list;
        if (options.mode == ShareSource::hrr_mode) {
            bool offers_x25519 =
                std::find(options.offer.begin(), options.offer.end(), std::uint16_t{0x001D}) !=
                options.offer.end();
            if (offers_x25519) {
                Bytes pub = detail::random_bytes(32);
                put_u16(list, 0x001D);
                put_u16(list, 32);
                list.insert(list.end(), pub.begin(), pub.end());
            }
            // no X25519 in the offer: empty client shares, server must HRR
        } else {
            for (auto g : options.offer) {
                auto it = options.blobs.find(g);
                if (it == options.blobs.end())
                    raise(Errc::missing_blob,
                          "no key-share bytes for offered group " + std::to_string(g));
                put_u16(list, g);
                put_u16(list, static_cast<std::uint16_t>(it->second.size()));
                list.insert(list.end(), it->second.begin(), it->second.end());
            }
        }
        put_u16(shares, static_cast<std::uint16_t>(list.size()));
        shares.insert(shares.end(), list.begin(), list.end());
        detail::put_extension(exts, tls::kExtKeyShare, shares);
    }
    put_u16(body, static_cast<std::uint16_t>(exts.size()));
    body.insert(body.end(), exts.begin(), exts.end());

    Bytes msg;
    msg.push_back(tls::kHsClientHello);
    detail::put_u24(msg, static_cast<std::uint32_t>(body.size()));
    msg.insert(msg.end(), body.begin(), body.end());

    Bytes record;
    record.push_back(tls::kContentHandshake);
    put_u16(record, 0x0301); // first-flight record version, by convention
    put_u16(record, static_cast<std::uint16_t>(msg.size()));
    record.insert(record.end(), msg.begin(), msg.end());

    // self-check: the built hello must parse back to the offered groups
    auto parsed = tls::parse_client_hello(
        ByteView(record).subspan(9)); // 5 record + 4 handshake header
    std::vector<std::uint16_t> expected;
    for (auto g : options.offer)
        if (!kexdb::is_grease(g)) expected.push_back(g);
    if (parsed.supported_groups != expected)
        raise(Errc::parse_error, "probe hello self-check failed");
    return record;
}

enum class Outcome { selected_group, hello_retry, alert, timeout, dns_failure, tcp_refused };

inline const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::selected_group: return "selected_group";
        case Outcome::hello_retry: return "hello_retry";
        case Outcome::alert: return "alert";
        case Outcome::timeout: return "timeout";
        case Outcome::dns_failure: return "dns_failure";
        case Outcome::tcp_refused: return "tcp_refused";
    }
    return "?";
}

struct ProbeResult {
    std::string domain;
    std::optional<std::string> ip;
    Outcome outcome = Outcome::timeout;
    std::uint16_t group = 0;    // selected_group / hello_retry
    std::uint8_t alert_code = 0;
    std::optional<double> rtt_ms;
    std::optional<verdict::Verdict> verdict_;
    std::vector<std::string> notes;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["domain"] = domain;
        j["ip"] = ip ? nlohmann::json(*ip) : nlohmann::json(nullptr);
        j["outcome"] = outcome_name(outcome);
        if (outcome == Outcome::selected_group || outcome == Outcome::hello_retry)
            j["group"] = group;
        if (outcome == Outcome::alert) j["alert_code"] = alert_code;
        if (rtt_ms) j["rtt_ms"] = *rtt_ms;
        if (verdict_) {
            nlohmann::json cands = nlohmann::json::array();
            for (const auto& c : verdict_->candidates)
                cands.push_back({{"id", c.id}, {"basis", verdict::basis_name(c.basis)}});
            j["classification"] = verdict::classification_name(verdict_->classification);
            j["candidates"] = std::move(cands);
        }
        j["notes"] = notes;
        j["org"] = nullptr; // reserved for external enrichment
        return j;
    }
};

struct ProbeOptions {
    int timeout_ms = 5000;
    int retries_on_timeout = 1;
    std::size_t tolerance = 0;
};

namespace detail {

struct Fd {
    int fd = -1;
    ~Fd() {
        if (fd >= 0) ::close(fd);
    }
};

inline bool wait_fd(int fd, short events, int timeout_ms) {
    pollfd p{fd, events, 0};
    return ::poll(&p, 1, timeout_ms) > 0;
}

// one TCP connect + hello + first-flight read
inline ProbeResult probe_once(const std::string& host, std::uint16_t port, ByteView hello,
                              const kexdb::ProfileSet& profiles, const ProbeOptions& options) {
    ProbeResult result;
    result.domain = host;

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* addrs = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &addrs) != 0 ||
        !addrs) {
        result.outcome = Outcome::dns_failure;
        return result;
    }
    char ipbuf[INET6_ADDRSTRLEN] = {0};
    if (addrs->ai_family == AF_INET)
        ::inet_ntop(AF_INET, &reinterpret_cast<sockaddr_in*>(addrs->ai_addr)->sin_addr, ipbuf,
                    sizeof(ipbuf));
    else if (addrs->ai_family == AF_INET6)
        ::inet_ntop(AF_INET6, &reinterpret_cast<sockaddr_in6*>(addrs->ai_addr)->sin6_addr, ipbuf,
                    sizeof(ipbuf));
    result.ip = ipbuf;

    Fd sock;
    sock.fd = ::socket(addrs->ai_family, SOCK_STREAM | SOCK_NONBLOCK, 0);
    if (sock.fd < 0) {
        ::freeaddrinfo(addrs);
        result.outcome = Outcome::tcp_refused;
        result.notes.push_back("socket() failed");
        return result;
    }
    int rc = ::connect(sock.fd, addrs->ai_addr, addrs->ai_addrlen);
    ::freeaddrinfo(addrs);
    if (rc != 0 && errno != EINPROGRESS) {
        result.outcome = errno == ECONNREFUSED ? Outcome::tcp_refused : Outcome::timeout;
        return result;
    }
    if (rc != 0) {
        if (!wait_fd(sock.fd, POLLOUT, options.timeout_ms)) {
            result.outcome = Outcome::timeout;
            return result;
        }
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(sock.fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            result.outcome = err == ECONNREFUSED ? Outcome::tcp_refused : Outcome::timeout;
            return result;
        }
    }

    auto start = std::chrono::steady_clock::now();
    std::size_t sent = 0;
    while (sent < hello.size()) {
        ssize_t n = ::send(sock.fd, hello.data() + sent, hello.size() - sent, MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            if (!wait_fd(sock.fd, POLLOUT, options.timeout_ms)) {
                result.outcome = Outcome::timeout;
                return result;
            }
            continue;
        }
        result.outcome = Outcome::tcp_refused;
        result.notes.push_back("send failed");
        return result;
    }

    Bytes buffer;
    auto deadline = start + std::chrono::milliseconds(options.timeout_ms);
    while (true) {
        auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            result.outcome = Outcome::timeout;
            return result;
        }
        int remain = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
        if (!wait_fd(sock.fd, POLLIN, remain)) {
            result.outcome = Outcome::timeout;
            return result;
        }
        std::uint8_t chunk[4096];
        ssize_t n = ::recv(sock.fd, chunk, sizeof(chunk), 0);
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) continue;
            result.outcome = Outcome::tcp_refused;
            result.notes.push_back("recv failed");
            return result;
        }
        if (n == 0) {
            result.outcome = Outcome::tcp_refused;
            result.notes.push_back("connection closed before a server flight");
            return result;
        }
        if (!result.rtt_ms) {
            result.rtt_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - start)
                                .count();
        }
        buffer.insert(buffer.end(), chunk, chunk + n);

        tls::RecordParse records;
        try {
            records = tls::parse_records(buffer);
        } catch (const Error& e) {
            result.outcome = Outcome::alert;
            result.alert_code = 0;
            result.notes.push_back(std::string("unparseable server bytes: ") + e.what());
            return result;
        }
        for (const auto& r : records.records) {
            if (r.content_type == tls::kContentAlert && r.payload.size() >= 2) {
                result.outcome = Outcome::alert;
                result.alert_code = r.payload[1];
                return result;
            }
        }
        auto reassembled = tls::reassemble_handshake_partial(records.records);
        for (const auto& m : reassembled.messages) {
            if (m.msg_type != tls::kHsServerHello) continue;
            tls::ServerHelloSummary sh;
            try {
                sh = tls::parse_server_hello(m.body);
            } catch (const Error& e) {
                result.outcome = Outcome::alert;
                result.notes.push_back(std::string("bad ServerHello: ") + e.what());
                return result;
            }
            verdict::ConnectionEvidence ev;
            ev.protocol = verdict::Protocol::tls13;
            if (sh.key_share) {
                ev.server_group = sh.key_share->group;
                if (sh.key_share->share_len > 0) ev.server_share_len = sh.key_share->share_len;
            }
            if (sh.is_hello_retry) {
                result.outcome = Outcome::hello_retry;
                result.group = sh.key_share ? sh.key_share->group : 0;
                ev.hello_retry = true;
            } else {
                result.outcome = Outcome::selected_group;
                result.group = sh.key_share ? sh.key_share->group : 0;
                if (!sh.key_share)
                    result.notes.push_back("no key_share in ServerHello (pre-1.3 server?)");
            }
            result.verdict_ = verdict::evaluate(ev, profiles, {options.tolerance, false});
            return result;
        }
        // otherwise keep reading until the hello completes or time runs out
    }
}

} // namespace detail

inline ProbeResult probe(const std::string& host, std::uint16_t port, ByteView hello,
                         const kexdb::ProfileSet& profiles, const ProbeOptions& options = {}) {
    ProbeResult result = detail::probe_once(host, port, hello, profiles, options);
    for (int attempt = 0;
         result.outcome == Outcome::timeout && attempt < options.retries_on_timeout; ++attempt) {
        result = detail::probe_once(host, port, hello, profiles, options);
        if (result.outcome != Outcome::timeout) result.notes.push_back("succeeded on retry");
    }
    return result;
}

struct ScanOptions {
    std::size_t concurrency = 32;
    double rate_limit_per_sec = 0; // 0 = unlimited
    ProbeOptions probe;
    HelloOptions hello;
    std::uint16_t default_port = 443;
};

struct ScanSummary {
    int domains = 0;
    int classical = 0, post_quantum = 0, hybrid = 0, unknown = 0, error = 0;

    struct IpCounts {
        int classical = 0, post_quantum = 0, hybrid = 0, unknown = 0, error = 0;
    };
    std::map<std::string, IpCounts> by_ip;

    nlohmann::json to_json() const {
        nlohmann::json ips = nlohmann::json::array();
        for (const auto& [ip, c] : by_ip)
            ips.push_back({{"ip", ip},
                           {"classical", c.classical},
                           {"post_quantum", c.post_quantum},
                           {"hybrid", c.hybrid},
                           {"unknown", c.unknown},
                           {"error", c.error}});
        return {{"domains", domains},   {"classical", classical},
                {"post_quantum", post_quantum}, {"hybrid", hybrid},
                {"unknown", unknown},   {"error", error},
                {"by_ip", std::move(ips)}};
    }
};

// "host" or "host:port" entries; results stream to `out` as JSON Lines.
inline ScanSummary scan(const std::vector<std::string>& domains, const ScanOptions& options,
                        std::ostream& out, const kexdb::ProfileSet& profiles) {
    Bytes hello = build_probe_hello(options.hello);
    ScanSummary summary;
    summary.domains = static_cast<int>(domains.size());

    std::atomic<std::size_t> next{0};
    std::mutex sink_mutex;
    std::mutex rate_mutex;
    auto last_start = std::chrono::steady_clock::now() - std::chrono::hours(1);

    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= domains.size()) return;
            if (options.rate_limit_per_sec > 0) {
                std::unique_lock lock(rate_mutex);
                auto interval = std::chrono::duration<double>(1.0 / options.rate_limit_per_sec);
                auto earliest =
                    last_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     interval);
                auto now = std::chrono::steady_clock::now();
                if (earliest > now) std::this_thread::sleep_until(earliest);
                last_start = std::chrono::steady_clock::now();
            }
            std::string entry = domains[i];
            std::string host = entry;
            std::uint16_t port = options.default_port;
            if (auto colon = entry.rfind(':');
                colon != std::string::npos && entry.find(':') == colon) {
                host = entry.substr(0, colon);
                port = static_cast<std::uint16_t>(std::atoi(entry.c_str() + colon + 1));
            }
            auto opts = options.probe;
            auto result = detail::probe_once(host, port, hello, profiles, opts);
            for (int r = 0; result.outcome == Outcome::timeout && r < opts.retries_on_timeout;
                 ++r)
                result = detail::probe_once(host, port, hello, profiles, opts);

            std::lock_guard lock(sink_mutex);
            out << result.to_json().dump() << "\n";
            ScanSummary::IpCounts* per_ip =
                result.ip ? &summary.by_ip[*result.ip] : nullptr;
            if (result.verdict_) {
                switch (result.verdict_->classification) {
                    case verdict::Classification::classical:
                        ++summary.classical;
                        if (per_ip) ++per_ip->classical;
                        break;
                    case verdict::Classification::post_quantum:
                        ++summary.post_quantum;
                        if (per_ip) ++per_ip->post_quantum;
                        break;
                    case verdict::Classification::hybrid:
                        ++summary.hybrid;
                        if (per_ip) ++per_ip->hybrid;
                        break;
                    case verdict::Classification::unknown:
                        ++summary.unknown;
                        if (per_ip) ++per_ip->unknown;
                        break;
                }
            } else {
                ++summary.error;
                if (per_ip) ++per_ip->error;
            }
        }
    };
    std::size_t n_workers = std::max<std::size_t>(1, std::min(options.concurrency, domains.size()));
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < n_workers; ++i) workers.emplace_back(worker);
    for (auto& w : workers) w.join();
    out.flush();
    return summary;
}

} // namespace pqscope::probe
