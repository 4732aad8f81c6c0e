#include "iiot/tls_wire.hpp"

#include <algorithm>
#include <cstdio>

namespace iiot::tls {
namespace {

constexpr std::size_t kMaxRecord = (1u << 14) + 2048;

constexpr std::uint16_t kGroups[] = {29, 23, 24, 25};  // x25519, P-256, P-384, P-521

// Broad on purpose: legacy servers must be able to sign with whatever
// their certificate supports, MD5 and SHA-1 included.
constexpr std::uint16_t kSigAlgs[] = {
    0x0403, 0x0503, 0x0603,  // ecdsa sha256/384/512
    0x0804, 0x0805, 0x0806,  // rsa_pss_rsae
    0x0401, 0x0501, 0x0601,  // rsa_pkcs1
    0x0402, 0x0502, 0x0602,  // dsa
    0x0201, 0x0203, 0x0202,  // sha1 rsa/ecdsa/dsa
    0x0101,                  // md5 rsa
};

void put_extensions(ByteWriter& w) {
    ByteWriter ext;
    // supported_groups
    ext.u16(10).u16(2 + 2 * std::size(kGroups)).u16(2 * std::size(kGroups));
    for (auto g : kGroups) ext.u16(g);
    // ec_point_formats: uncompressed
    ext.u16(11).u16(2).u8(1).u8(0);
    // signature_algorithms
    ext.u16(13).u16(2 + 2 * std::size(kSigAlgs)).u16(2 * std::size(kSigAlgs));
    for (auto s : kSigAlgs) ext.u16(s);
    // renegotiation_info, empty
    ext.u16(0xFF01).u16(1).u8(0);
    w.u16(static_cast<std::uint16_t>(ext.size())).bytes(ext.data());
}

std::vector<std::uint16_t> read_extension_types(ByteReader& r) {
    std::vector<std::uint16_t> types;
    if (r.empty()) return types;
    const auto total = r.u16();
    ByteReader ext(r.take(total));
    while (!ext.empty()) {
        types.push_back(ext.u16());
        ext.skip(ext.u16());
    }
    return types;
}

}  // namespace

std::string version_name(std::uint16_t v) {
    switch (v) {
        case kSsl30: return "SSL 3.0";
        case kTls10: return "TLS 1.0";
        case kTls11: return "TLS 1.1";
        case kTls12: return "TLS 1.2";
        case kTls13: return "TLS 1.3";
        case kDtls10: return "DTLS 1.0";
        case kDtls12: return "DTLS 1.2";
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%04X", v);
    return buf;
}

std::optional<std::uint16_t> parse_version_name(std::string_view name) {
    for (std::uint16_t v : {kSsl30, kTls10, kTls11, kTls12, kTls13, kDtls10, kDtls12})
        if (version_name(v) == name) return v;
    return std::nullopt;
}

bool is_dtls(std::uint16_t v) { return (v >> 8) == 0xFE; }

int version_rank(std::uint16_t v) {
    switch (v) {
        case kDtls10: return kTls11;
        case kDtls12: return kTls12;
        default: return v;
    }
}

bool detect_downgrade_sentinel(ByteView server_random) {
    if (server_random.size() != 32)
        throw AuditError("server random must be 32 bytes, got " +
                         std::to_string(server_random.size()));
    return std::equal(kDowngradeSentinelTls12.begin(), kDowngradeSentinelTls12.end(),
                      server_random.begin() + 24);
}

Bytes wrap_handshake(std::uint8_t type, ByteView body, bool dtls, std::uint16_t message_seq) {
    ByteWriter w;
    w.u8(type).u24(static_cast<std::uint32_t>(body.size()));
    if (dtls) w.u16(message_seq).u24(0).u24(static_cast<std::uint32_t>(body.size()));
    w.bytes(body);
    return std::move(w).take();
}

Bytes wrap_record(std::uint8_t type, std::uint16_t version, ByteView fragment, bool dtls,
                  std::uint64_t record_seq) {
    ByteWriter w;
    w.u8(type).u16(version);
    if (dtls) {
        w.u16(0);  // epoch
        w.u16(static_cast<std::uint16_t>(record_seq >> 32)).u32(static_cast<std::uint32_t>(record_seq));
    }
    w.u16(static_cast<std::uint16_t>(fragment.size())).bytes(fragment);
    return std::move(w).take();
}

Bytes encode_client_hello(const ClientHelloSpec& spec) {
    const bool dtls = is_dtls(spec.max_version);
    ByteWriter body;
    body.u16(spec.max_version).bytes(spec.random);
    body.u8(static_cast<std::uint8_t>(spec.session_id.size())).bytes(spec.session_id);
    if (dtls) body.u8(static_cast<std::uint8_t>(spec.cookie.size())).bytes(spec.cookie);
    body.u16(static_cast<std::uint16_t>(2 * spec.suites.size()));
    for (auto s : spec.suites) body.u16(s);
    body.u8(1).u8(0);  // null compression only
    put_extensions(body);
    return wrap_handshake(kClientHello, body.data(), dtls, spec.message_seq);
}

Bytes encode_client_hello_record(const ClientHelloSpec& spec) {
    const bool dtls = is_dtls(spec.max_version);
    // Record-layer version stays at the floor for compatibility with
    // servers that reject unknown record versions.
    const std::uint16_t record_version = dtls ? kDtls10 : kTls10;
    return wrap_record(kHandshake, record_version, encode_client_hello(spec), dtls, spec.record_seq);
}

ParsedClientHello parse_client_hello_body(ByteView body, bool dtls) {
    ByteReader r(body);
    ParsedClientHello ch;
    ch.version = r.u16();
    auto rnd = r.take(32);
    std::copy(rnd.begin(), rnd.end(), ch.random.begin());
    auto sid = r.take(r.u8());
    ch.session_id.assign(sid.begin(), sid.end());
    if (dtls) {
        auto cookie = r.take(r.u8());
        ch.cookie.assign(cookie.begin(), cookie.end());
    }
    const auto suites_len = r.u16();
    if (suites_len % 2) throw AuditError("odd cipher suite length");
    ByteReader sr(r.take(suites_len));
    while (!sr.empty()) ch.suites.push_back(sr.u16());
    r.skip(r.u8());  // compression methods
    ch.extension_types = read_extension_types(r);
    return ch;
}

ServerHello parse_server_hello_body(ByteView body) {
    ByteReader r(body);
    ServerHello sh;
    sh.version = r.u16();
    auto rnd = r.take(32);
    std::copy(rnd.begin(), rnd.end(), sh.random.begin());
    const auto sid_len = r.u8();
    if (sid_len > 32) throw AuditError("session id too long");
    auto sid = r.take(sid_len);
    sh.session_id.assign(sid.begin(), sid.end());
    sh.suite = r.u16();
    sh.compression = r.u8();
    sh.extension_types = read_extension_types(r);
    if (!r.empty()) throw AuditError("trailing bytes after ServerHello");
    return sh;
}

void FlightParser::restart() {
    // message_seq keeps counting: after a HelloVerifyRequest (seq 0) the
    // ServerHello arrives as seq 1.
    pending_.clear();
    handshake_.clear();
    stream_.clear();
    flight_ = ServerFlight{};
}

void FlightParser::fail(std::string why) {
    flight_.status = FlightStatus::malformed;
    flight_.error = std::move(why);
}

const ServerFlight& FlightParser::feed(ByteView data) {
    if (done()) return flight_;
    try {
        if (dtls_) {
            ByteReader r(data);
            while (!r.empty() && !done()) {
                const auto type = r.u8();
                const auto version = r.u16();
                r.skip(8);  // epoch + sequence
                const auto len = r.u16();
                if ((version >> 8) != 0xFE) return fail("bad DTLS record version"), flight_;
                if (len > kMaxRecord) return fail("oversized record"), flight_;
                process_record(type, r.take(len));
            }
        } else {
            stream_.insert(stream_.end(), data.begin(), data.end());
            std::size_t off = 0;
            while (!done()) {
                ByteReader r(ByteView{stream_}.subspan(off));
                if (r.remaining() < 5) break;
                const auto type = r.u8();
                const auto version = r.u16();
                const auto len = r.u16();
                if ((version >> 8) != 0x03) {
                    fail("bad TLS record version");
                    break;
                }
                if (len > kMaxRecord) {
                    fail("oversized record");
                    break;
                }
                if (r.remaining() < len) break;
                process_record(type, r.take(len));
                off += 5 + len;
            }
            stream_.erase(stream_.begin(), stream_.begin() + static_cast<std::ptrdiff_t>(
                                                              std::min(off, stream_.size())));
        }
    } catch (const AuditError& e) {
        fail(e.what());
    }
    return flight_;
}

void FlightParser::process_record(std::uint8_t type, ByteView fragment) {
    switch (type) {
        case kAlert: {
            ByteReader r(fragment);
            Alert a;
            a.level = r.u8();
            a.description = r.u8();
            flight_.alert = a;
            flight_.status = FlightStatus::alert;
            return;
        }
        case kHandshake:
            if (dtls_) {
                ByteReader r(fragment);
                while (!r.empty() && !done()) {
                    // Peek the fragment length to slice out one fragment.
                    ByteReader hdr(r.rest());
                    hdr.skip(9);
                    const auto frag_len = hdr.u24();
                    process_dtls_fragment(r.take(12 + frag_len));
                }
            } else {
                handshake_.insert(handshake_.end(), fragment.begin(), fragment.end());
                process_handshake_stream();
            }
            return;
        default:
            fail("unexpected content type " + std::to_string(type) + " in server flight");
    }
}

void FlightParser::process_handshake_stream() {
    std::size_t off = 0;
    while (!done()) {
        ByteReader r(ByteView{handshake_}.subspan(off));
        if (r.remaining() < 4) break;
        const auto type = r.u8();
        const auto len = r.u24();
        if (len > (1u << 24) - 1 || r.remaining() < len) break;
        handle_message(type, r.take(len));
        off += 4 + len;
    }
    handshake_.erase(handshake_.begin(),
                     handshake_.begin() + static_cast<std::ptrdiff_t>(std::min(off, handshake_.size())));
}

void FlightParser::process_dtls_fragment(ByteView fragment) {
    ByteReader r(fragment);
    const auto type = r.u8();
    const auto length = r.u24();
    const auto seq = r.u16();
    const auto offset = r.u24();
    const auto frag_len = r.u24();
    auto data = r.take(frag_len);
    if (std::uint64_t{offset} + frag_len > length) return fail("DTLS fragment exceeds message");
    if (length > (1u << 20)) return fail("DTLS message too large");
    if (seq < next_seq_) return;  // retransmission of something handled

    auto& p = pending_[seq];
    if (p.have.empty()) {
        p.type = type;
        p.length = length;
        p.data.assign(length, 0);
        p.have.assign(length, false);
    } else if (p.type != type || p.length != length) {
        return fail("inconsistent DTLS fragments");
    }
    for (std::uint32_t i = 0; i < frag_len; ++i) {
        if (!p.have[offset + i]) {
            p.have[offset + i] = true;
            p.data[offset + i] = data[i];
            ++p.filled;
        }
    }
    while (!done()) {
        auto it = pending_.find(next_seq_);
        if (it == pending_.end() || it->second.filled != it->second.length) break;
        Pending msg = std::move(it->second);
        pending_.erase(it);
        ++next_seq_;
        handle_message(msg.type, msg.data);
    }
}

void FlightParser::handle_message(std::uint8_t type, ByteView body) {
    switch (type) {
        case kHelloRequest: return;
        case kHelloVerifyRequest: {
            if (!dtls_) return fail("HelloVerifyRequest on TLS");
            ByteReader r(body);
            r.u16();
            auto cookie = r.take(r.u8());
            flight_.cookie.assign(cookie.begin(), cookie.end());
            flight_.status = FlightStatus::verify;
            return;
        }
        case kServerHello:
            if (flight_.hello) return fail("duplicate ServerHello");
            flight_.hello = parse_server_hello_body(body);
            return;
        case kCertificate: {
            if (!flight_.hello) return fail("Certificate before ServerHello");
            ByteReader r(body);
            ByteReader list(r.take(r.u24()));
            if (!r.empty()) return fail("trailing bytes after certificate list");
            while (!list.empty()) {
                auto der = list.take(list.u24());
                flight_.chain.emplace_back(der.begin(), der.end());
            }
            return;
        }
        case kServerKeyExchange:
        case kCertificateStatus:
            if (!flight_.hello) return fail("key exchange before ServerHello");
            return;
        case kCertificateRequest:
            if (!flight_.hello) return fail("CertificateRequest before ServerHello");
            flight_.certificate_request = true;
            return;
        case kServerHelloDone:
            if (!flight_.hello) return fail("ServerHelloDone before ServerHello");
            if (!body.empty()) return fail("non-empty ServerHelloDone");
            flight_.status = FlightStatus::complete;
            return;
        default:
            fail("unexpected handshake type " + std::to_string(type));
    }
}

Bytes encode_server_flight(const ServerFlightSpec& spec, bool dtls) {
    std::vector<Bytes> msgs;
    {
        ByteWriter b;
        b.u16(spec.version).bytes(spec.random).u8(0).u16(spec.suite).u8(0);
        b.u16(5).u16(0xFF01).u16(1).u8(0);  // renegotiation_info
        msgs.push_back(std::move(b).take());
    }
    std::vector<std::uint8_t> types = {kServerHello};
    if (!spec.chain.empty()) {
        ByteWriter list;
        for (const auto& c : spec.chain) list.u24(static_cast<std::uint32_t>(c.size())).bytes(c);
        ByteWriter b;
        b.u24(static_cast<std::uint32_t>(list.size())).bytes(list.data());
        msgs.push_back(std::move(b).take());
        types.push_back(kCertificate);
    }
    if (spec.certificate_request) {
        ByteWriter b;
        b.u8(1).u8(1);  // rsa_sign
        if (version_rank(spec.version) >= kTls12) b.u16(2).u16(0x0401);
        b.u16(0);  // no CA names
        msgs.push_back(std::move(b).take());
        types.push_back(kCertificateRequest);
    }
    msgs.emplace_back();
    types.push_back(kServerHelloDone);

    Bytes out;
    if (dtls) {
        for (std::size_t i = 0; i < msgs.size(); ++i) {
            auto hs = wrap_handshake(types[i], msgs[i], true,
                                     static_cast<std::uint16_t>(spec.message_seq + i));
            auto rec = wrap_record(kHandshake, spec.version, hs, true, i + 1);
            out.insert(out.end(), rec.begin(), rec.end());
        }
    } else {
        Bytes hs;
        for (std::size_t i = 0; i < msgs.size(); ++i) {
            auto m = wrap_handshake(types[i], msgs[i], false);
            hs.insert(hs.end(), m.begin(), m.end());
        }
        // Split into records no larger than the protocol limit.
        for (std::size_t off = 0; off < hs.size(); off += 1u << 14) {
            auto n = std::min<std::size_t>(1u << 14, hs.size() - off);
            auto rec = wrap_record(kHandshake, spec.version, ByteView{hs}.subspan(off, n), false);
            out.insert(out.end(), rec.begin(), rec.end());
        }
    }
    return out;
}

Bytes encode_alert_record(std::uint16_t version, Alert alert, bool dtls) {
    const std::uint8_t body[] = {alert.level, alert.description};
    return wrap_record(kAlert, version, body, dtls);
}

Bytes encode_hello_verify_request(std::uint16_t version, ByteView cookie) {
    ByteWriter b;
    b.u16(version).u8(static_cast<std::uint8_t>(cookie.size())).bytes(cookie);
    auto hs = wrap_handshake(kHelloVerifyRequest, b.data(), true, 0);
    return wrap_record(kHandshake, version, hs, true);
}

}  // namespace iiot::tls
