#include <gtest/gtest.h>

#include <random>

#include "iiot/codecs.hpp"
#include "oracles.hpp"

using namespace iiot;

namespace {

Bytes golden(Protocol p, std::string_view direction) {
    const auto path = oracle::fixtures() / "golden" / (std::string(to_string(p)) + "." + std::string(direction) + ".hex");
    const auto text = oracle::slurp(path);
    if (text.empty()) ADD_FAILURE() << "missing fixture " << path;
    return from_hex(text);
}

ValidationVerdict check(Protocol p, std::string_view hex) { return validate_response(p, from_hex(hex)); }

class PerProtocol : public ::testing::TestWithParam<Protocol> {};

std::string param_name(const ::testing::TestParamInfo<Protocol>& info) { return std::string(to_string(info.param)); }

}  // namespace

TEST_P(PerProtocol, ProbeMatchesGolden) {
    EXPECT_EQ(to_hex(build_probe(GetParam()).payload), to_hex(golden(GetParam(), "request")));
}

TEST_P(PerProtocol, GoldenResponseValidates) {
    const auto v = validate_response(GetParam(), golden(GetParam(), "response"));
    EXPECT_TRUE(v.valid) << to_string(v.reason) << " " << v.detail;
    EXPECT_EQ(v.reason, VerdictReason::ok);
}

TEST_P(PerProtocol, CompliantResponseMatchesGolden) {
    const auto req = golden(GetParam(), "request");
    EXPECT_EQ(to_hex(compliant_response(GetParam(), req)), to_hex(golden(GetParam(), "response")));
}

TEST_P(PerProtocol, ProbeReparsesUnderOwnDecoder) {
    for (const auto& m : build_probe_sequence(GetParam())) {
        const auto d = decode_request(GetParam(), m.payload);
        ASSERT_TRUE(d) << to_hex(m.payload);
        EXPECT_FALSE(d->kind.empty());
        // A bare AMQP protocol header carries no method yet.
        if (GetParam() != Protocol::AMQP) EXPECT_FALSE(d->operations.empty());
    }
    if (auto fb = build_fallback_probe(GetParam())) EXPECT_TRUE(decode_request(GetParam(), fb->payload));
}

TEST_P(PerProtocol, ProbesUseOnlyReadOnlyOperations) {
    const auto& allow = read_only_operations(GetParam());
    for (const auto& m : build_probe_sequence(GetParam())) {
        EXPECT_TRUE(is_read_only(GetParam(), m.payload));
        const auto d = decode_request(GetParam(), m.payload);
        ASSERT_TRUE(d);
        for (auto op : d->operations)
            EXPECT_NE(std::ranges::find(allow, op), allow.end()) << op;
    }
}

TEST_P(PerProtocol, EmptyInput) {
    const auto v = validate_response(GetParam(), {});
    EXPECT_FALSE(v.valid);
    EXPECT_EQ(v.reason, VerdictReason::empty);
}

TEST_P(PerProtocol, EveryPrefixIsRejectedOrTruncated) {
    const auto full = golden(GetParam(), "response");
    for (std::size_t n = 1; n < full.size(); ++n) {
        const oracle::GuardedBuffer buf(Bytes(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n)));
        const auto v = validate_response(GetParam(), ByteView(buf.data(), buf.size()));
        // Text protocols may accept a prefix that ends on a line boundary. CoAP has no
        // length field: the datagram is the frame, so a shorter datagram is a shorter message.
        if (GetParam() == Protocol::TridiumFox || GetParam() == Protocol::FoxPlatform ||
            GetParam() == Protocol::CoAP)
            continue;
        EXPECT_FALSE(v.valid) << n;
    }
}

TEST_P(PerProtocol, RandomBytesAreRejected) {
    std::mt19937 rng(static_cast<unsigned>(GetParam()) * 7919u + 1);
    int invalid = 0;
    constexpr int kTrials = 10'000;
    for (int i = 0; i < kTrials; ++i) {
        Bytes junk(1 + rng() % 128);
        for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
        const oracle::GuardedBuffer buf(junk);
        const auto v = fuzz_reject(GetParam(), ByteView(buf.data(), buf.size()));
        invalid += !v.valid;
        (void)frame_complete(GetParam(), ByteView(buf.data(), buf.size()));
    }
    EXPECT_GE(invalid, kTrials * 99 / 100);
}

TEST_P(PerProtocol, MutatedGoldenNeverReadsPastEnd) {
    std::mt19937 rng(static_cast<unsigned>(GetParam()) + 99);
    const auto base = golden(GetParam(), "response");
    for (int i = 0; i < 3000; ++i) {
        Bytes m = base;
        for (int k = 0; k < 1 + static_cast<int>(rng() % 3); ++k) m[rng() % m.size()] = static_cast<std::uint8_t>(rng());
        m.resize(1 + rng() % m.size());
        const oracle::GuardedBuffer buf(m);
        EXPECT_NO_THROW(validate_response(GetParam(), ByteView(buf.data(), buf.size())));
    }
}

INSTANTIATE_TEST_SUITE_P(AllProtocols, PerProtocol, ::testing::ValuesIn(kAllProtocols), param_name);

// ------------------------------------------------------------ hand-made verdicts

TEST(Verdicts, Mqtt) {
    EXPECT_TRUE(check(Protocol::MQTT, "20 02 00 00").valid);
    const auto refused = check(Protocol::MQTT, "20 02 00 05");
    EXPECT_TRUE(refused.valid);
    EXPECT_EQ(refused.code, 5);
    EXPECT_EQ(check(Protocol::MQTT, "20 05 00 00").reason, VerdictReason::bad_length_field);
    EXPECT_EQ(check(Protocol::MQTT, "30 02 00 00").reason, VerdictReason::error_response);
}

TEST(Verdicts, Iec104) {
    EXPECT_TRUE(check(Protocol::IEC104, "68 04 0B 00 00 00").valid);
    EXPECT_EQ(check(Protocol::IEC104, "68 FF 0B 00").reason, VerdictReason::bad_length_field);
    EXPECT_EQ(check(Protocol::IEC104, "69 04 0B 00 00 00").reason, VerdictReason::bad_magic);
}

TEST(Verdicts, ModbusExceptionIsProtocolPresence) {
    // fc 0x2B with the exception bit, code 01 (illegal function).
    const auto v = check(Protocol::Modbus, "00 01 00 00 00 03 00 AB 01");
    EXPECT_TRUE(v.valid);
    EXPECT_EQ(v.code, 1);
    EXPECT_EQ(check(Protocol::Modbus, "00 01 00 07 00 03 00 AB 01").reason, VerdictReason::bad_magic);
    EXPECT_EQ(check(Protocol::Modbus, "00 01 00 00 00 09 00 AB 01").reason, VerdictReason::bad_length_field);
}

TEST(Verdicts, Dnp3CrcIsChecked) {
    auto good = from_hex("05 64 05 0b 00 00 01 00 ba f0");
    EXPECT_TRUE(validate_response(Protocol::DNP3, good).valid);
    good[9] ^= 1;
    EXPECT_FALSE(validate_response(Protocol::DNP3, good).valid);
}

TEST(Verdicts, Dnp3CrcMatchesBitwiseOracle) {
    std::mt19937 rng(1);
    for (int i = 0; i < 500; ++i) {
        Bytes d(1 + rng() % 16);
        for (auto& b : d) b = static_cast<std::uint8_t>(rng());
        ASSERT_EQ(dnp3::crc(d), oracle::dnp3_crc(d));
    }
    // Link header of the probe: "de 8e" on the wire, low byte first.
    EXPECT_EQ(oracle::dnp3_crc({0x05, 0x64, 0x05, 0xC9, 0x01, 0x00, 0x00, 0x00}), 0x8EDE);
}

TEST(Verdicts, AmqpCloseIsValid) {
    const auto close = amqp::connection_close(403, "ACCESS_REFUSED");
    const auto v = validate_response(Protocol::AMQP, close);
    EXPECT_TRUE(v.valid);
    EXPECT_EQ(v.code, 403);
    // Protocol header echo: the broker wants another version.
    EXPECT_TRUE(validate_response(Protocol::AMQP, as_bytes(amqp::kHeader10)).valid);
    EXPECT_EQ(validate_response(Protocol::AMQP, amqp::connection_tune()).reason, VerdictReason::error_response);
}

TEST(Verdicts, HttpStatusRecorded) {
    const auto r = http::response(401, "Unauthorized", "");
    const auto v = validate_response(Protocol::FoxPlatform, as_bytes(r));
    EXPECT_TRUE(v.valid);
    EXPECT_EQ(v.code, 401);
    EXPECT_FALSE(validate_response(Protocol::FoxPlatform, as_bytes("SSH-2.0-OpenSSH\r\n")).valid);
}

// ------------------------------------------------------------ read-only guarantee

TEST(ReadOnly, WritesAreRecognised) {
    EXPECT_FALSE(is_read_only(Protocol::MQTT, mqtt::encode_publish("a/b", as_bytes("x"))));
    EXPECT_TRUE(is_read_only(Protocol::MQTT, mqtt::encode_subscribe(1, "#")));
    // Modbus write single register (fc 06).
    EXPECT_FALSE(is_read_only(Protocol::Modbus, from_hex("00 01 00 00 00 06 00 06 00 01 00 03")));
    EXPECT_TRUE(is_read_only(Protocol::Modbus, from_hex("00 01 00 00 00 06 00 03 00 00 00 01")));
    // IEC 104 single command (I-frame, type 45).
    EXPECT_FALSE(is_read_only(Protocol::IEC104, from_hex("68 0E 00 00 00 00 2D 01 06 00 01 00 00 00 00 01")));
    // CoAP PUT.
    EXPECT_FALSE(is_read_only(Protocol::CoAP, from_hex("40 03 00 02")));
    // HTTP POST.
    EXPECT_FALSE(is_read_only(Protocol::FoxPlatform, as_bytes("POST / HTTP/1.1\r\nHost: x\r\n\r\n")));
    // AMQP Basic.Publish (class 60, method 40).
    EXPECT_FALSE(is_read_only(Protocol::AMQP, amqp::encode_method({1, 60, 40, {}})));
}

TEST(ReadOnly, AccessCheckMessagesStayInAllowlist) {
    EXPECT_TRUE(is_read_only(Protocol::AMQP, amqp::connection_start_ok("guest", "guest")));
    EXPECT_TRUE(is_read_only(Protocol::AMQP, amqp::connection_close_ok()));
    EXPECT_TRUE(is_read_only(Protocol::MQTT, mqtt::encode_disconnect()));
    EXPECT_TRUE(is_read_only(Protocol::FoxPlatform, as_bytes(http::get_request("example"))));
}

// ------------------------------------------------------------ helpers

TEST(Mqtt, RemainingLengthEncoding) {
    EXPECT_EQ(to_hex(mqtt::encode_remaining_length(0)), "00");
    EXPECT_EQ(to_hex(mqtt::encode_remaining_length(127)), "7f");
    EXPECT_EQ(to_hex(mqtt::encode_remaining_length(128)), "8001");
    EXPECT_EQ(to_hex(mqtt::encode_remaining_length(16383)), "ff7f");
    EXPECT_EQ(to_hex(mqtt::encode_remaining_length(2097152)), "80808001");
}

TEST(Mqtt, PacketSplitting) {
    Bytes stream = mqtt::encode_connack(0);
    const auto pub = mqtt::encode_publish("lab/t", as_bytes("hello"));
    stream.insert(stream.end(), pub.begin(), pub.end());
    const auto a = mqtt::next_packet(stream);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->type, mqtt::kConnack);
    const auto b = mqtt::next_packet(ByteView(stream).subspan(a->wire_size));
    ASSERT_TRUE(b);
    const auto p = mqtt::parse_publish(*b);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->topic, "lab/t");
    EXPECT_EQ(std::string(p->payload.begin(), p->payload.end()), "hello");
    EXPECT_FALSE(mqtt::next_packet(ByteView(pub).first(3)));
    EXPECT_THROW(mqtt::next_packet(from_hex("30 ff ff ff ff 01")), AuditError);
}

TEST(Amqp, MethodRoundTrip) {
    const auto frame = amqp::connection_close(320, "bye", 10, 40);
    const auto m = amqp::next_method(frame);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->second, frame.size());
    EXPECT_EQ(m->first.class_id, 10);
    EXPECT_EQ(m->first.method_id, 50);
    EXPECT_EQ(amqp::close_code(m->first), 320);
}

TEST(Http, ParseResponse) {
    const auto text = http::response(200, "OK", "<input type=\"password\">");
    const auto r = http::parse_response(as_bytes(text));
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(r->headers.at("content-type"), "text/html");
    EXPECT_FALSE(http::parse_response(as_bytes("HTTP/1.1 200 OK\r\n")));
}

TEST(Bytes, HexWithComments) {
    EXPECT_EQ(from_hex("# header\n01 02 # trailing\n0a"), (Bytes{1, 2, 10}));
    EXPECT_EQ(to_hex(Bytes{0xde, 0xad}), "dead");
    EXPECT_THROW(from_hex("0"), AuditError);
    EXPECT_EQ(base64_decode(base64_encode(Bytes{1, 2, 3, 4, 5})), (Bytes{1, 2, 3, 4, 5}));
    EXPECT_EQ(sha256_hex(as_bytes("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Bytes, ReaderIsBoundsChecked) {
    const Bytes b{1, 2, 3};
    ByteReader r(b);
    EXPECT_EQ(r.u16(), 0x0102);
    EXPECT_THROW(r.u16(), TruncatedInput);
    EXPECT_EQ(r.u8(), 3);
    EXPECT_THROW(r.take(1), TruncatedInput);
}
