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

#include <stdexcept>
#include <string>

namespace pqscope {

// Every recoverable failure in the toolkit carries one of these codes so
// callers can branch on the condition without string matching.
enum class Errc {
    // capture ingest
    malformed_capture,
    unsupported_link_type,
    // openvpn de-encapsulation
    not_openvpn,
    encrypted_control_channel,
    // tls dissection
    malformed_record,
    truncated_handshake,
    malformed_hello,
    unknown_kx_encoding,
    malformed_body,
    // ssh dissection
    not_ssh,
    malformed_packet,
    malformed_name_list,
    // quic initial
    unsupported_version,
    decrypt_failed,
    // feature schema
    schema_error,
    value_error,
    missing_field,
    parse_error,
    // ml core
    negative_feature,
    invalid_k,
    single_class,
    unsupported_model_version,
    malformed_model,
    // prober
    missing_blob,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::malformed_capture: return "MalformedCapture";
        case Errc::unsupported_link_type: return "UnsupportedLinkType";
        case Errc::not_openvpn: return "NotOpenVPN";
        case Errc::encrypted_control_channel: return "EncryptedControlChannel";
        case Errc::malformed_record: return "MalformedRecord";
        case Errc::truncated_handshake: return "TruncatedHandshake";
        case Errc::malformed_hello: return "MalformedHello";
        case Errc::unknown_kx_encoding: return "UnknownKxEncoding";
        case Errc::malformed_body: return "MalformedBody";
        case Errc::not_ssh: return "NotSsh";
        case Errc::malformed_packet: return "MalformedPacket";
        case Errc::malformed_name_list: return "MalformedNameList";
        case Errc::unsupported_version: return "UnsupportedVersion";
        case Errc::decrypt_failed: return "DecryptFailed";
        case Errc::schema_error: return "SchemaError";
        case Errc::value_error: return "ValueError";
        case Errc::missing_field: return "MissingField";
        case Errc::parse_error: return "ParseError";
        case Errc::negative_feature: return "NegativeFeature";
        case Errc::invalid_k: return "InvalidK";
        case Errc::single_class: return "SingleClass";
        case Errc::unsupported_model_version: return "UnsupportedModelVersion";
        case Errc::malformed_model: return "MalformedModel";
        case Errc::missing_blob: return "MissingBlob";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) {
    throw Error(code, msg);
}

} // namespace pqscope
