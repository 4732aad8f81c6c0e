#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iiot/bytes.hpp"

namespace iiot {

/// IPv4 address in host byte order.
class Ipv4 {
public:
    constexpr Ipv4() = default;
    constexpr explicit Ipv4(std::uint32_t value) : value_(value) {}

    /// Throws AuditError on anything that is not a dotted quad.
    static Ipv4 parse(std::string_view text);
    static std::optional<Ipv4> try_parse(std::string_view text);

    constexpr std::uint32_t value() const { return value_; }
    std::string to_string() const;

    friend constexpr auto operator<=>(Ipv4, Ipv4) = default;

private:
    std::uint32_t value_ = 0;
};

class Cidr {
public:
    Cidr() = default;
    Cidr(Ipv4 network, int prefix_len);

    /// Accepts "a.b.c.d/len" or a bare address (treated as /32). Host bits
    /// are masked off. Throws AuditError when malformed.
    static Cidr parse(std::string_view text);

    Ipv4 network() const { return network_; }
    int prefix_len() const { return prefix_; }
    std::uint32_t mask() const { return prefix_ == 0 ? 0u : ~0u << (32 - prefix_); }
    bool contains(Ipv4 addr) const { return (addr.value() & mask()) == network_.value(); }
    std::uint64_t size() const { return std::uint64_t{1} << (32 - prefix_); }
    std::string to_string() const;

    friend auto operator<=>(const Cidr&, const Cidr&) = default;

private:
    Ipv4 network_;
    int prefix_ = 32;
};

class CidrSet {
public:
    CidrSet() = default;
    explicit CidrSet(std::vector<Cidr> ranges) : ranges_(std::move(ranges)) {}

    /// One CIDR per line; blank lines and `#` comments ignored.
    static CidrSet load(const std::filesystem::path& path);

    void add(Cidr c) { ranges_.push_back(c); }
    void merge(const CidrSet& other);
    bool contains(Ipv4 addr) const;
    bool empty() const { return ranges_.empty(); }
    const std::vector<Cidr>& ranges() const { return ranges_; }

private:
    std::vector<Cidr> ranges_;
};

enum class AsType : std::uint8_t { enterprise, isp, unknown };
std::string_view to_string(AsType t);

/// Maps PeeringDB network categories onto the two classes used in the
/// trust-anchor breakdown: content providers count as enterprise,
/// (educational) network services as ISP, anything else unknown.
AsType as_type_from_category(std::string_view category);

/// IPv4 -> ASN lookup with longest-prefix-match semantics. Overlapping
/// announcements are resolved in favour of the most specific prefix, so
/// the effective ranges never overlap. Lookup is total: unmapped
/// addresses report ASN 0.
class AsMap {
public:
    static constexpr std::uint32_t kUnknownAsn = 0;

    /// `cidr<TAB>asn` lines, plus optional `asn<TAB>type` lines.
    static AsMap load(const std::filesystem::path& prefixes,
                      const std::optional<std::filesystem::path>& types = std::nullopt);

    void add(Cidr prefix, std::uint32_t asn);
    void set_type(std::uint32_t asn, AsType type) { types_[asn] = type; }

    std::uint32_t lookup(Ipv4 addr) const;
    AsType type_of(std::uint32_t asn) const;
    std::size_t prefix_count() const;

private:
    std::array<std::unordered_map<std::uint32_t, std::uint32_t>, 33> by_len_{};
    std::unordered_map<std::uint32_t, AsType> types_;
};

}  // namespace iiot
