#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iiot {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Base class for every error raised by the toolkit.
class AuditError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by ByteReader when a read would cross the end of its buffer.
class TruncatedInput : public AuditError {
public:
    TruncatedInput() : AuditError("truncated input") {}
};

/// Bounds-checked big-endian cursor over a byte buffer. Every accessor
/// checks the remaining length first, so a malformed length field can
/// never cause a read past the end of the underlying span.
class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }
    bool empty() const { return remaining() == 0; }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u24() {
        need(3);
        std::uint32_t v = std::uint32_t{data_[pos_]} << 16 | std::uint32_t{data_[pos_ + 1]} << 8 |
                          data_[pos_ + 2];
        pos_ += 3;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = std::uint32_t{data_[pos_]} << 24 | std::uint32_t{data_[pos_ + 1]} << 16 |
                          std::uint32_t{data_[pos_ + 2]} << 8 | data_[pos_ + 3];
        pos_ += 4;
        return v;
    }
    std::uint16_t u16le() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | data_[pos_ + 1] << 8);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32le() {
        need(4);
        std::uint32_t v = data_[pos_] | std::uint32_t{data_[pos_ + 1]} << 8 |
                          std::uint32_t{data_[pos_ + 2]} << 16 | std::uint32_t{data_[pos_ + 3]} << 24;
        pos_ += 4;
        return v;
    }
    ByteView take(std::size_t n) {
        need(n);
        auto v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }
    void skip(std::size_t n) { take(n); }
    ByteView rest() const { return data_.subspan(pos_); }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw TruncatedInput{};
    }

    ByteView data_;
    std::size_t pos_ = 0;
};

/// Append-only big-endian builder.
class ByteWriter {
public:
    ByteWriter& u8(std::uint8_t v) {
        buf_.push_back(v);
        return *this;
    }
    ByteWriter& u16(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v));
        return *this;
    }
    ByteWriter& u24(std::uint32_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v >> 16));
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v));
        return *this;
    }
    ByteWriter& u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v >> 16));
        return u16(static_cast<std::uint16_t>(v));
    }
    ByteWriter& u16le(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v));
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        return *this;
    }
    ByteWriter& u32le(std::uint32_t v) {
        u16le(static_cast<std::uint16_t>(v));
        return u16le(static_cast<std::uint16_t>(v >> 16));
    }
    ByteWriter& bytes(ByteView v) {
        buf_.insert(buf_.end(), v.begin(), v.end());
        return *this;
    }
    ByteWriter& str(std::string_view s) {
        buf_.insert(buf_.end(), s.begin(), s.end());
        return *this;
    }
    /// Overwrites a previously written big-endian u16 at `offset`.
    void patch_u16(std::size_t offset, std::uint16_t v) {
        buf_.at(offset) = static_cast<std::uint8_t>(v >> 8);
        buf_.at(offset + 1) = static_cast<std::uint8_t>(v);
    }
    void patch_u24(std::size_t offset, std::uint32_t v) {
        buf_.at(offset) = static_cast<std::uint8_t>(v >> 16);
        buf_.at(offset + 1) = static_cast<std::uint8_t>(v >> 8);
        buf_.at(offset + 2) = static_cast<std::uint8_t>(v);
    }
    std::size_t size() const { return buf_.size(); }
    const Bytes& data() const& { return buf_; }
    Bytes take() && { return std::move(buf_); }

private:
    Bytes buf_;
};

std::string to_hex(ByteView data);
/// Parses hex text; whitespace and `#` comments to end-of-line are ignored.
Bytes from_hex(std::string_view text);
std::string base64_encode(ByteView data);
Bytes base64_decode(std::string_view text);
/// SHA-256 digest rendered as lowercase hex.
std::string sha256_hex(ByteView data);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace iiot
