#include "iiot/codecs.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace iiot {
namespace {

using V = ValidationVerdict;
using R = VerdictReason;

V truncated(std::string detail) { return V::bad(R::bad_length_field, std::move(detail), true); }

bool is_prefix_of(ByteView buf, std::string_view magic) {
    const auto n = std::min(buf.size(), magic.size());
    return std::equal(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n), magic.begin());
}

std::string_view as_text(ByteView b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

// ---------------------------------------------------------------- MQTT

constexpr std::string_view kMqttClientId = "iiot-audit-probe";

struct VarInt {
    std::size_t value = 0;
    std::size_t bytes = 0;
};

// nullopt: need more bytes. Throws on a length longer than four bytes.
std::optional<VarInt> read_varint(ByteView buf, std::size_t off) {
    VarInt v;
    std::size_t mult = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        if (off + i >= buf.size()) return std::nullopt;
        const auto b = buf[off + i];
        v.value += (b & 0x7F) * mult;
        mult *= 128;
        v.bytes = i + 1;
        if (!(b & 0x80)) return v;
    }
    throw AuditError("remaining length exceeds four bytes");
}

V validate_mqtt(ByteView b) {
    const std::uint8_t type = b[0] >> 4;
    if (type == 0 || type == 15) return V::bad(R::bad_magic, "reserved packet type");
    std::optional<VarInt> rl;
    try {
        rl = read_varint(b, 1);
    } catch (const AuditError& e) {
        return V::bad(R::bad_length_field, e.what());
    }
    if (!rl) return truncated("remaining length incomplete");
    const std::size_t total = 1 + rl->bytes + rl->value;
    if (type != mqtt::kConnack) {
        if (total > b.size()) return truncated("packet exceeds buffer");
        return V::bad(R::error_response, "expected CONNACK, got packet type " + std::to_string(type));
    }
    if ((b[0] & 0x0F) != 0) return V::bad(R::unparsable, "CONNACK with non-zero flags");
    if (rl->value != 2) return V::bad(R::bad_length_field, "CONNACK remaining length must be 2");
    if (total > b.size()) return truncated("CONNACK exceeds buffer");
    if (total < b.size()) return V::bad(R::bad_length_field, "trailing bytes after CONNACK");
    const std::uint8_t ack_flags = b[2 + rl->bytes - 1];
    const std::uint8_t rc = b[3 + rl->bytes - 1];
    if (ack_flags & 0xFE) return V::bad(R::unparsable, "reserved CONNACK flag bits set");
    if (rc > 5) return V::bad(R::unparsable, "CONNACK return code out of range");
    return V::ok(rc, rc == 0 ? "connection accepted" : "connection refused");
}

std::optional<DecodedRequest> decode_mqtt(ByteView b) {
    DecodedRequest d;
    std::size_t off = 0;
    try {
        while (off < b.size()) {
            auto p = mqtt::next_packet(b.subspan(off));
            if (!p) return std::nullopt;
            d.operations.push_back(p->type);
            if (p->type == mqtt::kConnect) {
                ByteReader r(p->body);
                auto name = r.take(r.u16());
                if (as_text(name) != "MQTT" && as_text(name) != "MQIsdp") return std::nullopt;
                r.u8();  // level
                const auto flags = r.u8();
                if (flags & 0x01) return std::nullopt;  // reserved bit
                r.u16();
                r.take(r.u16());  // client id
                if (flags & 0x04) {
                    r.take(r.u16());
                    r.take(r.u16());
                }
                if (flags & 0x80) r.take(r.u16());
                if (flags & 0x40) r.take(r.u16());
                if (!r.empty()) return std::nullopt;
                if (d.kind.empty()) d.kind = "CONNECT";
            } else if (d.kind.empty()) {
                d.kind = "packet-" + std::to_string(p->type);
            }
            off += p->wire_size;
        }
    } catch (const AuditError&) {
        return std::nullopt;
    }
    if (d.operations.empty()) return std::nullopt;
    return d;
}

// ---------------------------------------------------------------- AMQP

V validate_amqp(ByteView b) {
    if (b[0] == 'A') {
        if (!is_prefix_of(b, "AMQP")) return V::bad(R::bad_magic, "bad protocol header");
        if (b.size() < 8) return truncated("protocol header incomplete");
        // A header in reply to ours announces the broker's own version.
        const int version = b[5] << 16 | b[6] << 8 | b[7];
        return V::ok(version, "protocol header");
    }
    const std::uint8_t type = b[0];
    if (type != 1 && type != 2 && type != 3 && type != 8) return V::bad(R::bad_magic, "unknown frame type");
    if (b.size() < 7) return truncated("frame header incomplete");
    ByteReader r(b);
    r.u8();
    r.u16();
    const auto size = r.u32();
    if (size > (1u << 20)) return V::bad(R::bad_length_field, "frame size implausible");
    if (7 + std::size_t{size} + 1 > b.size()) return truncated("frame exceeds buffer");
    if (b[7 + size] != amqp::kFrameEnd) return V::bad(R::unparsable, "bad frame-end octet");
    if (7 + std::size_t{size} + 1 < b.size()) return V::bad(R::bad_length_field, "trailing bytes after frame");
    if (type != 1) return V::bad(R::error_response, "expected a method frame");
    ByteReader m(b.subspan(7, size));
    try {
        const auto cls = m.u16();
        const auto meth = m.u16();
        if (cls == 10 && meth == 10) {
            m.u8();
            m.u8();
            m.skip(m.u32());  // server-properties
            m.skip(m.u32());  // mechanisms
            m.skip(m.u32());  // locales
            if (!m.empty()) return V::bad(R::bad_length_field, "trailing bytes in Connection.Start");
            return V::ok(std::nullopt, "Connection.Start");
        }
        if (cls == 10 && meth == 50) return V::ok(m.u16(), "Connection.Close");
        return V::bad(R::error_response, "unexpected method " + std::to_string(cls) + "." + std::to_string(meth));
    } catch (const TruncatedInput&) {
        return V::bad(R::bad_length_field, "method arguments exceed frame");
    }
}

std::optional<DecodedRequest> decode_amqp(ByteView b) {
    DecodedRequest d;
    // Mid-session messages arrive without the protocol header; those are 0-9-1 frames.
    const bool header = b.size() >= 8 && is_prefix_of(b, "AMQP");
    const bool v10 = header && b[5] == 1;
    d.kind = !header ? "AMQP 0-9-1 frames" : v10 ? "AMQP 1.0 header" : "AMQP 0-9-1 header";
    std::size_t off = header ? 8 : 0;
    try {
        if (v10) {
            while (off < b.size()) {
                ByteReader r(b.subspan(off));
                const auto size = r.u32();
                const auto doff = r.u8();
                r.u8();
                r.u16();
                if (size < 8 || doff < 2) return std::nullopt;
                auto body = ByteReader(b.subspan(off)).take(size).subspan(doff * 4u);
                ByteReader br(body);
                if (br.u8() != 0x00 || br.u8() != 0x53) return std::nullopt;
                d.operations.push_back(br.u8());  // performative descriptor
                off += size;
            }
        } else {
            while (off < b.size()) {
                auto m = amqp::next_method(b.subspan(off));
                if (!m) return std::nullopt;
                d.operations.push_back(std::uint32_t{m->first.class_id} << 16 | m->first.method_id);
                off += m->second;
            }
        }
    } catch (const AuditError&) {
        return std::nullopt;
    }
    return d;
}

// ---------------------------------------------------------------- CoAP

constexpr std::uint16_t kCoapMid = 0x0001;

// Walks the options and payload marker. Returns an error verdict or nullopt.
std::optional<V> walk_coap_options(ByteView b, std::size_t off) {
    while (off < b.size()) {
        const auto h = b[off++];
        if (h == 0xFF) {
            if (off >= b.size()) return V::bad(R::unparsable, "payload marker without payload");
            return std::nullopt;
        }
        std::size_t delta = h >> 4, len = h & 0x0F;
        if (delta == 15 || len == 15) return V::bad(R::unparsable, "reserved option nibble");
        auto ext = [&](std::size_t& v) -> bool {
            if (v == 13) {
                if (off + 1 > b.size()) return false;
                v = 13 + b[off];
                off += 1;
            } else if (v == 14) {
                if (off + 2 > b.size()) return false;
                v = 269 + (b[off] << 8 | b[off + 1]);
                off += 2;
            }
            return true;
        };
        if (!ext(delta) || !ext(len)) return V::bad(R::bad_length_field, "option header exceeds datagram");
        if (off + len > b.size()) return V::bad(R::bad_length_field, "option value exceeds datagram");
        off += len;
    }
    return std::nullopt;
}

V validate_coap(ByteView b) {
    if (b.size() < 4) return V::bad(R::bad_length_field, "shorter than CoAP header");
    if ((b[0] >> 6) != 1) return V::bad(R::bad_magic, "CoAP version is not 1");
    const std::size_t tkl = b[0] & 0x0F;
    const std::uint8_t type = (b[0] >> 4) & 0x03;
    const std::uint8_t code = b[1];
    const std::uint16_t mid = static_cast<std::uint16_t>(b[2] << 8 | b[3]);
    if (tkl > 8) return V::bad(R::unparsable, "reserved token length");
    if (4 + tkl > b.size()) return V::bad(R::bad_length_field, "token exceeds datagram");
    // Our request carries no token, so a reply must not either.
    if (tkl != 0) return V::bad(R::unparsable, "token does not match request");
    if ((type == 2 || type == 3) && mid != kCoapMid) return V::bad(R::unparsable, "message id does not match");
    if (auto err = walk_coap_options(b, 4 + tkl)) return *err;
    const int cls = code >> 5;
    if (type == 3) {
        if (code != 0) return V::bad(R::unparsable, "reset with non-empty code");
        return V::ok(0, "reset");
    }
    if (type == 2 && code == 0) return V::ok(0, "empty acknowledgement");
    if (cls == 2 || cls == 4 || cls == 5) return V::ok(code, "response " + std::to_string(cls) + "." +
                                                               std::to_string(code & 0x1F));
    if (cls == 0) return V::bad(R::error_response, "request instead of response");
    return V::bad(R::unparsable, "reserved code class");
}

std::optional<DecodedRequest> decode_coap(ByteView b) {
    if (b.size() < 4 || (b[0] >> 6) != 1) return std::nullopt;
    const std::size_t tkl = b[0] & 0x0F;
    if (tkl > 8 || 4 + tkl > b.size()) return std::nullopt;
    if (walk_coap_options(b, 4 + tkl)) return std::nullopt;
    const std::uint8_t code = b[1];
    if ((code >> 5) != 0 || code == 0) return std::nullopt;
    static constexpr const char* names[] = {"", "GET", "POST", "PUT", "DELETE"};
    DecodedRequest d;
    d.kind = code <= 4 ? names[code] : "method-" + std::to_string(code);
    d.operations.push_back(code);
    return d;
}

// ---------------------------------------------------------------- OPC UA

constexpr std::string_view kOpcUaEndpoint = "opc.tcp://localhost:4840/";

V validate_opcua(ByteView b) {
    static constexpr std::string_view types[] = {"HEL", "ACK", "ERR", "RHE", "OPN", "MSG", "CLO"};
    const bool known_prefix = std::ranges::any_of(types, [&](auto t) { return is_prefix_of(b, t); });
    if (!known_prefix) return V::bad(R::bad_magic, "unknown message type");
    if (b.size() < 8) return truncated("message header incomplete");
    const auto t = as_text(b.subspan(0, 3));
    const char chunk = static_cast<char>(b[3]);
    if (chunk != 'F' && !((t == "MSG" || t == "OPN" || t == "CLO") && (chunk == 'C' || chunk == 'A')))
        return V::bad(R::bad_magic, "bad chunk type");
    ByteReader r(b);
    r.skip(4);
    const auto size = r.u32le();
    if (size < 8) return V::bad(R::bad_length_field, "message size below header size");
    if (size > b.size()) return truncated("message exceeds buffer");
    if (size < b.size()) return V::bad(R::bad_length_field, "trailing bytes after message");
    if (t == "ACK") {
        if (size != 28) return V::bad(R::bad_length_field, "ACK must be 28 bytes");
        return V::ok(std::nullopt, "ACK");
    }
    if (t == "ERR") {
        if (size < 16) return V::bad(R::bad_length_field, "ERR too short");
        const auto error = r.u32le();
        const auto len = static_cast<std::int32_t>(r.u32le());
        if (len > static_cast<std::int32_t>(r.remaining()) || len < -1)
            return V::bad(R::bad_length_field, "reason exceeds message");
        if (len >= 0 && static_cast<std::size_t>(len) != r.remaining())
            return V::bad(R::bad_length_field, "trailing bytes after reason");
        return V::ok(static_cast<int>(error), "ERR");
    }
    return V::bad(R::error_response, "expected ACK to HEL, got " + std::string(t));
}

std::optional<DecodedRequest> decode_opcua(ByteView b) {
    try {
        ByteReader r(b);
        auto magic = as_text(r.take(4));
        if (magic != "HELF") return std::nullopt;
        if (r.u32le() != b.size()) return std::nullopt;
        for (int i = 0; i < 5; ++i) r.u32le();
        const auto len = static_cast<std::int32_t>(r.u32le());
        if (len > 4096 || len < -1) return std::nullopt;
        if (len > 0) r.take(static_cast<std::size_t>(len));
        if (!r.empty()) return std::nullopt;
        return DecodedRequest{"HEL", {0x48454C}};
    } catch (const TruncatedInput&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------- IEC 104

V validate_iec104(ByteView b) {
    if (b[0] != 0x68) return V::bad(R::bad_magic, "APCI start byte is not 0x68");
    if (b.size() < 2) return truncated("APCI length missing");
    const std::size_t len = b[1];
    if (len < 4 || len > 253) return V::bad(R::bad_length_field, "APDU length out of range");
    if (len + 2 > b.size()) return V::bad(R::bad_length_field, "declared length exceeds buffer", true);
    const std::uint8_t c1 = b[2];
    if ((c1 & 0x03) == 0x03) {
        if (len != 4 || b[3] != 0 || b[4] != 0 || b[5] != 0) return V::bad(R::unparsable, "malformed U-format APCI");
        switch (c1) {
            case 0x0B: return V::ok(0x0B, "STARTDT con");
            case 0x07:
            case 0x13:
            case 0x23:
            case 0x43:
            case 0x83: return V::bad(R::error_response, "unexpected U-format function");
            default: return V::bad(R::unparsable, "unknown U-format function");
        }
    }
    return V::bad(R::error_response, "data frame instead of STARTDT con");
}

std::optional<DecodedRequest> decode_iec104(ByteView b) {
    DecodedRequest d;
    std::size_t off = 0;
    while (off < b.size()) {
        if (b.size() - off < 6 || b[off] != 0x68) return std::nullopt;
        const std::size_t len = b[off + 1];
        if (len < 4 || len > 253 || off + 2 + len > b.size()) return std::nullopt;
        const std::uint8_t c1 = b[off + 2];
        if ((c1 & 0x03) == 0x03) {
            d.operations.push_back(c1);
            if (d.kind.empty()) d.kind = c1 == 0x07 ? "STARTDT act" : "U-format";
        } else if ((c1 & 0x01) == 0) {
            if (len < 6) return std::nullopt;
            d.operations.push_back(0x100u | b[off + 6]);  // ASDU type id
            if (d.kind.empty()) d.kind = "I-format";
        } else {
            d.operations.push_back(0x01);
            if (d.kind.empty()) d.kind = "S-format";
        }
        off += 2 + len;
    }
    if (d.operations.empty()) return std::nullopt;
    return d;
}

// ---------------------------------------------------------------- Modbus

constexpr std::uint16_t kModbusTid = 0x0001;

V validate_modbus(ByteView b) {
    if (b.size() < 7) {
        if (b.size() >= 2 && (b[0] << 8 | b[1]) != kModbusTid)
            return V::bad(R::bad_magic, "transaction id does not match");
        if (b.size() >= 4 && (b[2] | b[3]) != 0) return V::bad(R::bad_magic, "protocol id is not 0");
        return truncated("MBAP header incomplete");
    }
    ByteReader r(b);
    if (r.u16() != kModbusTid) return V::bad(R::bad_magic, "transaction id does not match");
    if (r.u16() != 0) return V::bad(R::bad_magic, "protocol id is not 0");
    const std::size_t len = r.u16();
    if (len < 2 || len > 254) return V::bad(R::bad_length_field, "MBAP length out of range");
    if (6 + len > b.size()) return V::bad(R::bad_length_field, "declared length exceeds buffer", true);
    if (6 + len < b.size()) return V::bad(R::bad_length_field, "trailing bytes after PDU");
    r.u8();  // unit id
    ByteReader pdu(r.take(len - 1));
    try {
        const auto fc = pdu.u8();
        if (fc == 0xAB) {
            const auto ex = pdu.u8();
            if (!pdu.empty()) return V::bad(R::bad_length_field, "exception PDU too long");
            return V::ok(ex, "exception response");
        }
        if (fc != 0x2B) return V::bad(R::error_response, "unexpected function " + std::to_string(fc));
        if (pdu.u8() != 0x0E) return V::bad(R::error_response, "unexpected MEI type");
        pdu.u8();  // read device id code
        pdu.u8();  // conformity
        pdu.u8();  // more follows
        pdu.u8();  // next object id
        const auto count = pdu.u8();
        for (int i = 0; i < count; ++i) {
            pdu.u8();
            pdu.take(pdu.u8());
        }
        if (!pdu.empty()) return V::bad(R::bad_length_field, "trailing bytes after objects");
        return V::ok(std::nullopt, "device identification");
    } catch (const TruncatedInput&) {
        return V::bad(R::bad_length_field, "PDU shorter than its fields");
    }
}

std::optional<DecodedRequest> decode_modbus(ByteView b) {
    try {
        ByteReader r(b);
        r.u16();
        if (r.u16() != 0) return std::nullopt;
        const std::size_t len = r.u16();
        if (len < 2 || 6 + len != b.size()) return std::nullopt;
        r.u8();
        const auto fc = r.u8();
        DecodedRequest d;
        if (fc == 0x2B) {
            const auto mei = r.u8();
            d.operations.push_back(0x2B00u | mei);
            d.kind = mei == 0x0E ? "Read Device Identification" : "MEI";
        } else {
            d.operations.push_back(fc);
            d.kind = "function " + std::to_string(fc);
        }
        return d;
    } catch (const TruncatedInput&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------- EtherNet/IP

constexpr std::uint16_t kListIdentity = 0x0063;
constexpr std::uint16_t kRegisterSession = 0x0065;

bool known_encap_command(std::uint16_t c) {
    switch (c) {
        case 0x0000:
        case 0x0004:
        case 0x0063:
        case 0x0064:
        case 0x0065:
        case 0x0066:
        case 0x006F:
        case 0x0070: return true;
        default: return false;
    }
}

Bytes encap_header(std::uint16_t cmd, std::uint16_t len, std::uint32_t session = 0, std::uint32_t status = 0) {
    ByteWriter w;
    w.u16le(cmd).u16le(len).u32le(session).u32le(status);
    for (int i = 0; i < 8; ++i) w.u8(0);  // sender context
    w.u32le(0);                            // options
    return std::move(w).take();
}

V validate_enip(ByteView b) {
    if (b.size() >= 2 && !known_encap_command(static_cast<std::uint16_t>(b[0] | b[1] << 8)))
        return V::bad(R::bad_magic, "unknown encapsulation command");
    if (b.size() < 24) return truncated("encapsulation header incomplete");
    ByteReader r(b);
    const auto cmd = r.u16le();
    const std::size_t len = r.u16le();
    r.u32le();
    const auto status = r.u32le();
    r.skip(12);
    if (24 + len > b.size()) return V::bad(R::bad_length_field, "declared length exceeds buffer", true);
    if (24 + len < b.size()) return V::bad(R::bad_length_field, "trailing bytes after packet");
    if (status != 0) return V::ok(static_cast<int>(status), "encapsulation error status");
    ByteReader data(r.take(len));
    try {
        if (cmd == kListIdentity) {
            const auto count = data.u16le();
            bool identity = false;
            for (int i = 0; i < count; ++i) {
                const auto type = data.u16le();
                const auto ilen = data.u16le();
                auto item = data.take(ilen);
                if (type == 0x000C) {
                    ByteReader it(item);
                    it.u16le();       // encapsulation version
                    it.skip(16);      // socket address
                    it.skip(10);      // vendor, device type, product code, revision, status
                    it.u32le();       // serial
                    it.take(it.u8());  // product name
                    it.u8();          // state
                    if (!it.empty()) return V::bad(R::bad_length_field, "identity item length mismatch");
                    identity = true;
                }
            }
            if (!data.empty()) return V::bad(R::bad_length_field, "trailing bytes after items");
            if (!identity) return V::bad(R::unparsable, "no identity item");
            return V::ok(std::nullopt, "ListIdentity");
        }
        if (cmd == kRegisterSession) {
            if (len != 4) return V::bad(R::bad_length_field, "RegisterSession data must be 4 bytes");
            if (data.u16le() != 1) return V::bad(R::unparsable, "unsupported protocol version");
            return V::ok(std::nullopt, "RegisterSession");
        }
    } catch (const TruncatedInput&) {
        return V::bad(R::bad_length_field, "item exceeds packet");
    }
    return V::bad(R::error_response, "unexpected command " + std::to_string(cmd));
}

std::optional<DecodedRequest> decode_enip(ByteView b) {
    DecodedRequest d;
    std::size_t off = 0;
    while (off < b.size()) {
        if (b.size() - off < 24) return std::nullopt;
        ByteReader r(b.subspan(off));
        const auto cmd = r.u16le();
        const std::size_t len = r.u16le();
        if (!known_encap_command(cmd) || off + 24 + len > b.size()) return std::nullopt;
        d.operations.push_back(cmd);
        if (d.kind.empty()) d.kind = cmd == kListIdentity ? "ListIdentity" : "command";
        off += 24 + len;
    }
    if (d.operations.empty()) return std::nullopt;
    return d;
}

// ---------------------------------------------------------------- DNP3

Bytes dnp3_frame(std::uint8_t ctrl, std::uint16_t dest, std::uint16_t src) {
    ByteWriter w;
    w.u8(0x05).u8(0x64).u8(5).u8(ctrl).u16le(dest).u16le(src);
    w.u16le(dnp3::crc(w.data()));
    return std::move(w).take();
}

std::size_t dnp3_frame_size(std::size_t len_field) {
    const std::size_t user = len_field - 5;
    return 10 + user + 2 * ((user + 15) / 16);
}

V validate_dnp3(ByteView b) {
    if (!is_prefix_of(b, "\x05\x64")) return V::bad(R::bad_magic, "start bytes are not 05 64");
    if (b.size() < 10) return truncated("link header incomplete");
    const std::size_t len = b[2];
    if (len < 5) return V::bad(R::bad_length_field, "link length below 5");
    const std::size_t total = dnp3_frame_size(len);
    if (total > b.size()) return V::bad(R::bad_length_field, "frame exceeds buffer", true);
    if (total < b.size()) return V::bad(R::bad_length_field, "trailing bytes after frame");
    if (dnp3::crc(b.subspan(0, 8)) != (b[8] | b[9] << 8)) return V::bad(R::unparsable, "header CRC mismatch");
    for (std::size_t off = 10; off < total;) {
        const std::size_t n = std::min<std::size_t>(16, total - off - 2);
        if (dnp3::crc(b.subspan(off, n)) != (b[off + n] | b[off + n + 1] << 8))
            return V::bad(R::unparsable, "data block CRC mismatch");
        off += n + 2;
    }
    const std::uint8_t ctrl = b[3];
    if (ctrl & 0x40) return V::bad(R::error_response, "primary frame instead of a response");
    const int fc = ctrl & 0x0F;
    if (fc == 11 || fc == 0 || fc == 1 || fc == 15) return V::ok(fc, fc == 11 ? "link status" : "link response");
    return V::bad(R::error_response, "unexpected secondary function " + std::to_string(fc));
}

std::optional<DecodedRequest> decode_dnp3(ByteView b) {
    if (b.size() < 10 || !is_prefix_of(b, "\x05\x64") || b[2] < 5) return std::nullopt;
    if (dnp3_frame_size(b[2]) != b.size()) return std::nullopt;
    if (dnp3::crc(b.subspan(0, 8)) != (b[8] | b[9] << 8)) return std::nullopt;
    DecodedRequest d;
    const std::uint8_t ctrl = b[3];
    if (!(ctrl & 0x40)) return std::nullopt;  // requests are primary frames
    d.operations.push_back(ctrl & 0x0F);
    d.kind = (ctrl & 0x0F) == 9 ? "request link status" : "link function";
    if (b[2] > 5 && b.size() > 12) d.operations.push_back(0x100u | b[12]);  // application function
    return d;
}

// ---------------------------------------------------------------- S7

constexpr std::uint8_t kS7ConnectRequest[] = {0x03, 0x00, 0x00, 0x16, 0x11, 0xE0, 0x00, 0x00, 0x00, 0x01, 0x00,
                                              0xC1, 0x02, 0x01, 0x00, 0xC2, 0x02, 0x01, 0x02, 0xC0, 0x01, 0x0A};
constexpr std::uint8_t kS7ConnectConfirm[] = {0x03, 0x00, 0x00, 0x16, 0x11, 0xD0, 0x00, 0x01, 0x00, 0x01, 0x00,
                                              0xC0, 0x01, 0x0A, 0xC1, 0x02, 0x01, 0x00, 0xC2, 0x02, 0x01, 0x02};

V validate_s7(ByteView b) {
    if (b[0] != 0x03) return V::bad(R::bad_magic, "TPKT version is not 3");
    if (b.size() >= 2 && b[1] != 0x00) return V::bad(R::bad_magic, "TPKT reserved byte set");
    if (b.size() < 4) return truncated("TPKT header incomplete");
    const std::size_t tlen = static_cast<std::size_t>(b[2] << 8 | b[3]);
    if (tlen < 7) return V::bad(R::bad_length_field, "TPKT length below minimum");
    if (tlen > b.size()) return V::bad(R::bad_length_field, "TPKT length exceeds buffer", true);
    if (tlen < b.size()) return V::bad(R::bad_length_field, "trailing bytes after TPKT");
    const std::size_t li = b[4];
    if (li + 5 != tlen && (b[5] & 0xF0) != 0xF0) return V::bad(R::bad_length_field, "COTP length mismatch");
    if (li + 5 > tlen) return V::bad(R::bad_length_field, "COTP length exceeds TPKT");
    switch (b[5] & 0xF0) {
        case 0xD0:
            if (li < 6) return V::bad(R::bad_length_field, "connection confirm too short");
            return V::ok(0xD0, "COTP connection confirm");
        case 0x80: return V::ok(0x80, "COTP disconnect request");
        case 0x70: return V::ok(0x70, "COTP error");
        case 0xE0:
        case 0xF0: return V::bad(R::error_response, "unexpected COTP PDU");
        default: return V::bad(R::unparsable, "unknown COTP PDU type");
    }
}

std::optional<DecodedRequest> decode_s7(ByteView b) {
    if (b.size() < 7 || b[0] != 0x03 || b[1] != 0x00) return std::nullopt;
    const std::size_t tlen = static_cast<std::size_t>(b[2] << 8 | b[3]);
    if (tlen != b.size() || b[4] + 5u > tlen) return std::nullopt;
    DecodedRequest d;
    const std::uint8_t pdu = b[5] & 0xF0;
    d.operations.push_back(pdu);
    d.kind = pdu == 0xE0 ? "COTP connection request" : "COTP";
    if (pdu == 0xF0 && tlen > 5u + b[4] + 1) {
        // S7 header follows a COTP DT: function code is the first parameter byte.
        const std::size_t s7 = 5 + b[4];
        if (s7 + 10 < tlen) d.operations.push_back(0x100u | b[s7 + 10]);
    }
    return d;
}

// ---------------------------------------------------------------- Tridium Fox

constexpr std::string_view kFoxHello =
    "fox a 1 -1 fox hello\n{\nfox.version=s:1.0\nid=i:1\nhostName=s:iiot-audit\napp.name=s:audit\n};;\n";
constexpr std::string_view kFoxHelloReply =
    "fox a 0 -1 fox hello\n{\nfox.version=s:1.0\nid=i:1\nhostName=s:lab-station\nhostId=s:Lab-0001\n"
    "vmName=s:Java HotSpot(TM)\napp.name=s:Station\n};;\n";

std::vector<std::string_view> split_words(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        const auto start = i;
        while (i < line.size() && line[i] != ' ') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

bool is_int(std::string_view s) {
    int v;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
}

struct FoxFrame {
    char kind = 0;
    std::string command;
};

// nullopt with `err` set when malformed; nullopt with empty err when incomplete.
std::optional<FoxFrame> parse_fox(std::string_view t, V& err) {
    if (!t.starts_with(std::string_view("fox ").substr(0, std::min<std::size_t>(4, t.size())))) {
        err = V::bad(R::bad_magic, "does not start with 'fox '");
        return std::nullopt;
    }
    const auto end = t.find(";;\n");
    if (end == std::string_view::npos) {
        err = V::bad(R::unparsable, "unterminated frame", true);
        return std::nullopt;
    }
    if (end + 3 != t.size()) {
        err = V::bad(R::bad_length_field, "trailing bytes after frame");
        return std::nullopt;
    }
    const auto nl = t.find('\n');
    const auto words = split_words(t.substr(0, nl));
    if (words.size() < 6 || words[0] != "fox" || words[1].size() != 1 || !is_int(words[2]) || !is_int(words[3])) {
        err = V::bad(R::unparsable, "malformed frame header");
        return std::nullopt;
    }
    const auto body = t.substr(nl + 1, end - nl - 1);
    if (!body.starts_with("{\n") || !body.ends_with("}")) {
        err = V::bad(R::unparsable, "malformed frame body");
        return std::nullopt;
    }
    FoxFrame f;
    f.kind = words[1][0];
    f.command = std::string(words[4]) + " " + std::string(words[5]);
    return f;
}

V validate_fox(ByteView b) {
    V err;
    auto f = parse_fox(as_text(b), err);
    if (!f) return err;
    if (f->kind == 'e') return V::ok(1, "fox error");
    if (f->kind != 'a' && f->kind != 'r') return V::bad(R::unparsable, "unknown frame kind");
    if (f->command == "fox hello") return V::ok(0, "fox hello");
    return V::bad(R::error_response, "unexpected command " + f->command);
}

std::optional<DecodedRequest> decode_fox(ByteView b) {
    V err;
    auto f = parse_fox(as_text(b), err);
    if (!f) return std::nullopt;
    return DecodedRequest{f->command, {f->command == "fox hello" ? 1u : 2u}};
}

// ---------------------------------------------------------------- HTTP

V validate_http(ByteView b) {
    const auto t = as_text(b);
    if (!is_prefix_of(b, "HTTP/1.")) return V::bad(R::bad_magic, "not an HTTP/1.x status line");
    auto resp = http::parse_response(b);
    if (!resp) {
        if (t.find("\r\n\r\n") != std::string_view::npos) return V::bad(R::unparsable, "malformed status line");
        return V::bad(R::unparsable, "header block incomplete", true);
    }
    if (auto it = resp->headers.find("content-length"); it != resp->headers.end()) {
        std::size_t cl = 0;
        auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), cl);
        if (ec != std::errc{}) return V::bad(R::bad_length_field, "invalid Content-Length");
        if (resp->body.size() < cl) return V::bad(R::bad_length_field, "body shorter than Content-Length", true);
        if (resp->body.size() > cl) return V::bad(R::bad_length_field, "body longer than Content-Length");
    }
    return V::ok(resp->status, "HTTP " + std::to_string(resp->status));
}

std::optional<DecodedRequest> decode_http(ByteView b) {
    const auto t = as_text(b);
    const auto end = t.find("\r\n\r\n");
    if (end == std::string_view::npos || end + 4 != t.size()) return std::nullopt;
    const auto line = t.substr(0, t.find("\r\n"));
    const auto words = split_words(line);
    if (words.size() != 3 || !words[2].starts_with("HTTP/1.")) return std::nullopt;
    std::uint32_t op = words[0] == "GET" ? 1 : words[0] == "HEAD" ? 2 : 100;
    return DecodedRequest{std::string(words[0]) + " " + std::string(words[1]), {op}};
}

}  // namespace

// ================================================================ public

std::string_view to_string(VerdictReason r) {
    switch (r) {
        case R::ok: return "ok";
        case R::unparsable: return "unparsable";
        case R::bad_length_field: return "bad_length_field";
        case R::bad_magic: return "bad_magic";
        case R::error_response: return "error_response";
        case R::empty: return "empty";
    }
    return "unparsable";
}

VerdictReason parse_verdict_reason(std::string_view s) {
    for (auto r : {R::ok, R::unparsable, R::bad_length_field, R::bad_magic, R::error_response, R::empty})
        if (to_string(r) == s) return r;
    throw AuditError("invalid verdict reason: " + std::string(s));
}

ProbeMessage build_probe(Protocol p) { return build_probe_sequence(p).front(); }

std::vector<ProbeMessage> build_probe_sequence(Protocol p) {
    auto one = [p](Bytes b) { return std::vector<ProbeMessage>{{p, std::move(b), true}}; };
    switch (p) {
        case Protocol::MQTT: return one(mqtt::encode_connect({}));
        case Protocol::AMQP: return one(Bytes(amqp::kHeader091.begin(), amqp::kHeader091.end()));
        case Protocol::CoAP: {
            ByteWriter w;
            w.u8(0x40).u8(0x01).u16(kCoapMid);
            w.u8(0xBB).str(".well-known");  // Uri-Path (11), 11 bytes
            w.u8(0x04).str("core");         // Uri-Path again (delta 0)
            return one(std::move(w).take());
        }
        case Protocol::OPCUA: {
            ByteWriter w;
            w.str("HELF").u32le(0);
            w.u32le(0).u32le(65535).u32le(65535).u32le(0).u32le(0);
            w.u32le(static_cast<std::uint32_t>(kOpcUaEndpoint.size())).str(kOpcUaEndpoint);
            auto b = std::move(w).take();
            const auto n = static_cast<std::uint32_t>(b.size());
            b[4] = static_cast<std::uint8_t>(n);
            b[5] = static_cast<std::uint8_t>(n >> 8);
            b[6] = static_cast<std::uint8_t>(n >> 16);
            b[7] = static_cast<std::uint8_t>(n >> 24);
            return one(std::move(b));
        }
        case Protocol::IEC104: return one({0x68, 0x04, 0x07, 0x00, 0x00, 0x00});
        case Protocol::Modbus: return one({0x00, 0x01, 0x00, 0x00, 0x00, 0x05, 0x00, 0x2B, 0x0E, 0x01, 0x00});
        case Protocol::EtherNetIP: {
            auto reg = encap_header(kRegisterSession, 4);
            ByteWriter data;
            data.u16le(1).u16le(0);
            reg.insert(reg.end(), data.data().begin(), data.data().end());
            return {{p, encap_header(kListIdentity, 0), true}, {p, std::move(reg), true}};
        }
        case Protocol::DNP3: return one(dnp3_frame(0xC9, 1, 0));
        case Protocol::S7: return one(Bytes(std::begin(kS7ConnectRequest), std::end(kS7ConnectRequest)));
        case Protocol::TridiumFox: return one(Bytes(kFoxHello.begin(), kFoxHello.end()));
        case Protocol::FoxPlatform: {
            auto req = http::get_request("localhost");
            return one(Bytes(req.begin(), req.end()));
        }
    }
    throw UnknownProtocol(to_string(p));
}

std::optional<ProbeMessage> build_fallback_probe(Protocol p) {
    if (p != Protocol::AMQP) return std::nullopt;
    Bytes b(amqp::kHeader10.begin(), amqp::kHeader10.end());
    auto open = amqp::open_frame_10("iiot-audit");
    b.insert(b.end(), open.begin(), open.end());
    return ProbeMessage{p, std::move(b), true};
}

ValidationVerdict validate_response(Protocol p, ByteView reply) {
    if (reply.empty()) return V::bad(R::empty, "no bytes");
    switch (p) {
        case Protocol::MQTT: return validate_mqtt(reply);
        case Protocol::AMQP: return validate_amqp(reply);
        case Protocol::CoAP: return validate_coap(reply);
        case Protocol::OPCUA: return validate_opcua(reply);
        case Protocol::IEC104: return validate_iec104(reply);
        case Protocol::Modbus: return validate_modbus(reply);
        case Protocol::EtherNetIP: return validate_enip(reply);
        case Protocol::DNP3: return validate_dnp3(reply);
        case Protocol::S7: return validate_s7(reply);
        case Protocol::TridiumFox: return validate_fox(reply);
        case Protocol::FoxPlatform: return validate_http(reply);
    }
    return V::bad(R::unparsable, "unknown protocol");
}

bool frame_complete(Protocol p, ByteView buf) {
    if (buf.empty()) return false;
    const auto v = validate_response(p, buf);
    if (v.truncated) return false;
    if (p == Protocol::FoxPlatform && v.valid) {
        // Without Content-Length the body ends when the server closes.
        auto resp = http::parse_response(buf);
        if (resp && !resp->headers.contains("content-length")) return false;
    }
    return true;
}

std::optional<DecodedRequest> decode_request(Protocol p, ByteView request) {
    if (request.empty()) return std::nullopt;
    switch (p) {
        case Protocol::MQTT: return decode_mqtt(request);
        case Protocol::AMQP: return decode_amqp(request);
        case Protocol::CoAP: return decode_coap(request);
        case Protocol::OPCUA: return decode_opcua(request);
        case Protocol::IEC104: return decode_iec104(request);
        case Protocol::Modbus: return decode_modbus(request);
        case Protocol::EtherNetIP: return decode_enip(request);
        case Protocol::DNP3: return decode_dnp3(request);
        case Protocol::S7: return decode_s7(request);
        case Protocol::TridiumFox: return decode_fox(request);
        case Protocol::FoxPlatform: return decode_http(request);
    }
    return std::nullopt;
}

const std::vector<std::uint32_t>& read_only_operations(Protocol p) {
    static const std::map<Protocol, std::vector<std::uint32_t>> allow = {
        // CONNECT, SUBSCRIBE, UNSUBSCRIBE, PINGREQ, DISCONNECT. Never PUBLISH.
        {Protocol::MQTT, {mqtt::kConnect, mqtt::kSubscribe, 10, mqtt::kPingreq, mqtt::kDisconnect}},
        // Connection class only: Start-Ok, Secure-Ok, Tune-Ok, Open, Close, Close-Ok;
        // AMQP 1.0 open (0x10) and close (0x18) performatives.
        {Protocol::AMQP, {10u << 16 | 11, 10u << 16 | 21, 10u << 16 | 31, 10u << 16 | 40, 10u << 16 | 50,
                          10u << 16 | 51, 0x10, 0x18}},
        {Protocol::CoAP, {1}},  // GET
        {Protocol::OPCUA, {0x48454C}},
        {Protocol::IEC104, {0x07, 0x43}},  // STARTDT act, TESTFR act
        // Reads and identification: coils, inputs, registers, exception status,
        // report server id, read device identification.
        {Protocol::Modbus, {0x01, 0x02, 0x03, 0x04, 0x07, 0x11, 0x2B0E}},
        {Protocol::EtherNetIP, {0x0004, 0x0063, 0x0064, 0x0065, 0x0066}},
        {Protocol::DNP3, {9}},   // request link status
        {Protocol::S7, {0xE0}},  // COTP connection request
        {Protocol::TridiumFox, {1}},
        {Protocol::FoxPlatform, {1, 2}},  // GET, HEAD
    };
    return allow.at(p);
}

bool is_read_only(Protocol p, ByteView request) {
    auto d = decode_request(p, request);
    if (!d) return false;
    const auto& allow = read_only_operations(p);
    return std::ranges::all_of(d->operations,
                               [&](auto op) { return std::ranges::find(allow, op) != allow.end(); });
}

Bytes compliant_response(Protocol p, ByteView request) {
    switch (p) {
        case Protocol::MQTT: return mqtt::encode_connack(0);
        case Protocol::AMQP: return amqp::connection_start();
        case Protocol::CoAP: {
            ByteWriter w;
            const std::uint16_t mid = request.size() >= 4 ? static_cast<std::uint16_t>(request[2] << 8 | request[3])
                                                          : kCoapMid;
            w.u8(0x60).u8(0x45).u16(mid);  // ACK 2.05 Content
            w.u8(0xC1).u8(40);             // Content-Format (12): application/link-format
            w.u8(0xFF).str("</sensors/temp>;rt=\"temperature\";if=\"sensor\"");
            return std::move(w).take();
        }
        case Protocol::OPCUA: {
            ByteWriter w;
            w.str("ACKF").u32le(28).u32le(0).u32le(65535).u32le(65535).u32le(0).u32le(0);
            return std::move(w).take();
        }
        case Protocol::IEC104: return {0x68, 0x04, 0x0B, 0x00, 0x00, 0x00};
        case Protocol::Modbus: {
            ByteWriter pdu;
            pdu.u8(0x2B).u8(0x0E).u8(0x01).u8(0x01).u8(0x00).u8(0x00).u8(3);
            auto obj = [&](std::uint8_t id, std::string_view v) {
                pdu.u8(id).u8(static_cast<std::uint8_t>(v.size())).str(v);
            };
            obj(0, "IIoT Lab");
            obj(1, "LAB-PLC");
            obj(2, "V1.0");
            ByteWriter w;
            w.u16(kModbusTid).u16(0).u16(static_cast<std::uint16_t>(pdu.size() + 1)).u8(0).bytes(pdu.data());
            return std::move(w).take();
        }
        case Protocol::EtherNetIP: {
            const auto cmd = request.size() >= 2 ? static_cast<std::uint16_t>(request[0] | request[1] << 8) : 0;
            if (cmd == kRegisterSession) {
                auto b = encap_header(kRegisterSession, 4, 0x00010001);
                ByteWriter d;
                d.u16le(1).u16le(0);
                b.insert(b.end(), d.data().begin(), d.data().end());
                return b;
            }
            constexpr std::string_view name = "Lab EtherNet/IP Adapter";
            ByteWriter item;
            item.u16le(1);                                   // encapsulation version
            item.u16(2).u16(44818).u32(0x7F000001).u32(0).u32(0);  // sockaddr, big-endian
            item.u16le(1).u16le(0x0C).u16le(0x0001).u8(1).u8(0).u16le(0).u32le(0x00C0FFEE);
            item.u8(static_cast<std::uint8_t>(name.size())).str(name).u8(3);
            ByteWriter data;
            data.u16le(1).u16le(0x000C).u16le(static_cast<std::uint16_t>(item.size())).bytes(item.data());
            auto b = encap_header(kListIdentity, static_cast<std::uint16_t>(data.size()));
            b.insert(b.end(), data.data().begin(), data.data().end());
            return b;
        }
        case Protocol::DNP3: {
            std::uint16_t dest = 1, src = 0;
            if (request.size() >= 8) {
                dest = static_cast<std::uint16_t>(request[4] | request[5] << 8);
                src = static_cast<std::uint16_t>(request[6] | request[7] << 8);
            }
            return dnp3_frame(0x0B, src, dest);  // secondary LINK_STATUS
        }
        case Protocol::S7: return Bytes(std::begin(kS7ConnectConfirm), std::end(kS7ConnectConfirm));
        case Protocol::TridiumFox: return Bytes(kFoxHelloReply.begin(), kFoxHelloReply.end());
        case Protocol::FoxPlatform: {
            auto r = http::response(200, "OK", "<html><body><h1>Station dashboard</h1></body></html>");
            return Bytes(r.begin(), r.end());
        }
    }
    return {};
}

// ================================================================ MQTT

namespace mqtt {

Bytes encode_remaining_length(std::size_t n) {
    Bytes out;
    do {
        std::uint8_t b = n % 128;
        n /= 128;
        if (n) b |= 0x80;
        out.push_back(b);
    } while (n);
    return out;
}

namespace {
Bytes packet(std::uint8_t first, const Bytes& body) {
    ByteWriter w;
    w.u8(first).bytes(encode_remaining_length(body.size())).bytes(body);
    return std::move(w).take();
}
void put_str(ByteWriter& w, std::string_view s) { w.u16(static_cast<std::uint16_t>(s.size())).str(s); }
}  // namespace

Bytes encode_connect(const ConnectOptions& o) {
    ByteWriter v;
    put_str(v, "MQTT");
    v.u8(4);
    std::uint8_t flags = 0x02;  // clean session
    if (o.username) flags |= 0x80;
    if (o.password) flags |= 0x40;
    v.u8(flags).u16(o.keepalive);
    put_str(v, o.client_id);
    if (o.username) put_str(v, *o.username);
    if (o.password) put_str(v, *o.password);
    return packet(kConnect << 4, v.data());
}

Bytes encode_connack(std::uint8_t rc, bool session_present) {
    return {kConnack << 4, 0x02, static_cast<std::uint8_t>(session_present ? 1 : 0), rc};
}

Bytes encode_subscribe(std::uint16_t id, std::string_view filter, std::uint8_t qos) {
    ByteWriter v;
    v.u16(id);
    put_str(v, filter);
    v.u8(qos);
    return packet(kSubscribe << 4 | 0x02, v.data());
}

Bytes encode_suback(std::uint16_t id, std::uint8_t granted) {
    ByteWriter v;
    v.u16(id).u8(granted);
    return packet(kSuback << 4, v.data());
}

Bytes encode_publish(std::string_view topic, ByteView payload) {
    ByteWriter v;
    put_str(v, topic);
    v.bytes(payload);
    return packet(kPublish << 4, v.data());
}

Bytes encode_disconnect() { return {kDisconnect << 4, 0x00}; }

std::optional<Packet> next_packet(ByteView buf) {
    if (buf.empty()) return std::nullopt;
    auto rl = read_varint(buf, 1);
    if (!rl) return std::nullopt;
    const std::size_t total = 1 + rl->bytes + rl->value;
    if (total > buf.size()) return std::nullopt;
    Packet p;
    p.type = buf[0] >> 4;
    p.flags = buf[0] & 0x0F;
    auto body = buf.subspan(1 + rl->bytes, rl->value);
    p.body.assign(body.begin(), body.end());
    p.wire_size = total;
    return p;
}

std::optional<Publish> parse_publish(const Packet& p) {
    if (p.type != kPublish) return std::nullopt;
    try {
        ByteReader r(p.body);
        auto topic = r.take(r.u16());
        if ((p.flags >> 1 & 0x03) != 0) r.u16();  // packet id for QoS > 0
        Publish out;
        out.topic.assign(topic.begin(), topic.end());
        auto rest = r.rest();
        out.payload.assign(rest.begin(), rest.end());
        return out;
    } catch (const TruncatedInput&) {
        return std::nullopt;
    }
}

}  // namespace mqtt

// ================================================================ AMQP

namespace amqp {

Bytes encode_shortstr(std::string_view s) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(s.size())).str(s);
    return std::move(w).take();
}

Bytes encode_longstr(std::string_view s) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(s.size())).str(s);
    return std::move(w).take();
}

Bytes encode_method(const Method& m) {
    ByteWriter w;
    w.u8(1).u16(m.channel).u32(static_cast<std::uint32_t>(4 + m.args.size()));
    w.u16(m.class_id).u16(m.method_id).bytes(m.args).u8(kFrameEnd);
    return std::move(w).take();
}

std::optional<std::pair<Method, std::size_t>> next_method(ByteView buf) {
    if (buf.size() < 7) return std::nullopt;
    ByteReader r(buf);
    const auto type = r.u8();
    const auto channel = r.u16();
    const auto size = r.u32();
    if (size > (1u << 20)) throw AuditError("AMQP frame too large");
    if (buf.size() < 8 + std::size_t{size}) return std::nullopt;
    if (buf[7 + size] != kFrameEnd) throw AuditError("AMQP frame-end missing");
    if (type != 1) throw AuditError("AMQP frame is not a method frame");
    if (size < 4) throw AuditError("AMQP method frame too short");
    Method m;
    m.channel = channel;
    m.class_id = r.u16();
    m.method_id = r.u16();
    auto args = r.take(size - 4);
    m.args.assign(args.begin(), args.end());
    return std::pair{std::move(m), std::size_t{8} + size};
}

Bytes connection_start() {
    ByteWriter props;
    auto entry = [&](std::string_view key, std::string_view value) {
        props.bytes(encode_shortstr(key)).u8('S').bytes(encode_longstr(value));
    };
    entry("product", "LabMQ");
    entry("version", "3.8.9");
    entry("platform", "Erlang/OTP");
    ByteWriter args;
    args.u8(0).u8(9);
    args.u32(static_cast<std::uint32_t>(props.size())).bytes(props.data());
    args.bytes(encode_longstr("PLAIN AMQPLAIN"));
    args.bytes(encode_longstr("en_US"));
    return encode_method({0, 10, 10, args.data()});
}

Bytes connection_start_ok(std::string_view user, std::string_view password) {
    std::string response;
    response.push_back('\0');
    response += user;
    response.push_back('\0');
    response += password;
    ByteWriter args;
    args.u32(0);  // empty client-properties
    args.bytes(encode_shortstr("PLAIN"));
    args.bytes(encode_longstr(response));
    args.bytes(encode_shortstr("en_US"));
    return encode_method({0, 10, 11, args.data()});
}

Bytes connection_tune() {
    ByteWriter args;
    args.u16(2047).u32(131072).u16(60);
    return encode_method({0, 10, 30, args.data()});
}

Bytes connection_close(std::uint16_t code, std::string_view text, std::uint16_t class_id, std::uint16_t method_id) {
    ByteWriter args;
    args.u16(code).bytes(encode_shortstr(text)).u16(class_id).u16(method_id);
    return encode_method({0, 10, 50, args.data()});
}

Bytes connection_close_ok() { return encode_method({0, 10, 51, {}}); }

std::uint16_t close_code(const Method& m) {
    if (m.class_id != 10 || m.method_id != 50 || m.args.size() < 2) throw AuditError("not a Connection.Close");
    return static_cast<std::uint16_t>(m.args[0] << 8 | m.args[1]);
}

Bytes open_frame_10(std::string_view container_id) {
    ByteWriter fields;
    fields.u8(0xA1).u8(static_cast<std::uint8_t>(container_id.size())).str(container_id);
    ByteWriter body;
    body.u8(0x00).u8(0x53).u8(0x10);  // described type: open
    body.u8(0xC0).u8(static_cast<std::uint8_t>(fields.size() + 1)).u8(1).bytes(fields.data());
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(8 + body.size())).u8(2).u8(0).u16(0).bytes(body.data());
    return std::move(w).take();
}

}  // namespace amqp

// ================================================================ HTTP

namespace http {

std::string get_request(std::string_view host, std::string_view path) {
    std::string r = "GET ";
    r += path;
    r += " HTTP/1.1\r\nHost: ";
    r += host;
    r += "\r\nUser-Agent: iiot-audit\r\nAccept: */*\r\nConnection: close\r\n\r\n";
    return r;
}

std::optional<Response> parse_response(ByteView buf) {
    const auto t = as_text(buf);
    const auto end = t.find("\r\n\r\n");
    if (end == std::string_view::npos) return std::nullopt;
    const auto line_end = t.find("\r\n");
    const auto words = split_words(t.substr(0, line_end));
    if (words.size() < 2 || !words[0].starts_with("HTTP/1.") || words[1].size() != 3 || !is_int(words[1]))
        return std::nullopt;
    Response r;
    std::from_chars(words[1].data(), words[1].data() + 3, r.status);
    if (r.status < 100 || r.status > 599) return std::nullopt;
    std::size_t pos = line_end + 2;
    while (pos < end) {
        auto next = t.find("\r\n", pos);
        auto line = t.substr(pos, next - pos);
        pos = next + 2;
        auto colon = line.find(':');
        if (colon == std::string_view::npos) return std::nullopt;
        std::string name;
        for (char c : line.substr(0, colon)) name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        auto value = line.substr(colon + 1);
        while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
        r.headers[name] = std::string(value);
    }
    r.body = std::string(t.substr(end + 4));
    return r;
}

std::string response(int status, std::string_view reason, std::string_view body, std::string_view content_type) {
    std::string r = "HTTP/1.1 " + std::to_string(status) + " " + std::string(reason) + "\r\n";
    r += "Content-Type: " + std::string(content_type) + "\r\n";
    r += "Content-Length: " + std::to_string(body.size()) + "\r\n";
    r += "Connection: close\r\n\r\n";
    r += body;
    return r;
}

}  // namespace http

namespace dnp3 {

std::uint16_t crc(ByteView data) {
    std::uint16_t c = 0;
    for (auto b : data) {
        c ^= b;
        for (int i = 0; i < 8; ++i) c = (c & 1) ? static_cast<std::uint16_t>((c >> 1) ^ 0xA6BC) : c >> 1;
    }
    return static_cast<std::uint16_t>(~c);
}

}  // namespace dnp3

}  // namespace iiot
