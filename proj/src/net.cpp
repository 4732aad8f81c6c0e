#include "iiot/net.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace iiot {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string_view strip_comment(std::string_view s) {
    if (auto pos = s.find('#'); pos != std::string_view::npos) s = s.substr(0, pos);
    return trim(s);
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn fn) {
    std::ifstream in(path);
    if (!in) throw AuditError("cannot open " + path.string());
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto s = strip_comment(line);
        if (!s.empty()) fn(s, no);
    }
}

std::pair<std::string_view, std::string_view> split_tab(std::string_view s) {
    auto pos = s.find_first_of("\t ");
    if (pos == std::string_view::npos) return {s, {}};
    return {trim(s.substr(0, pos)), trim(s.substr(pos + 1))};
}

}  // namespace

std::optional<Ipv4> Ipv4::try_parse(std::string_view text) {
    std::uint32_t value = 0;
    int parts = 0;
    while (parts < 4) {
        unsigned octet = 0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), octet);
        if (ec != std::errc{} || octet > 255 || p == text.data()) return std::nullopt;
        // Reject leading zeros and signs; from_chars already rejects signs.
        if (p - text.data() > 1 && text.front() == '0') return std::nullopt;
        value = value << 8 | octet;
        text.remove_prefix(static_cast<std::size_t>(p - text.data()));
        ++parts;
        if (parts < 4) {
            if (text.empty() || text.front() != '.') return std::nullopt;
            text.remove_prefix(1);
        }
    }
    if (!text.empty()) return std::nullopt;
    return Ipv4{value};
}

Ipv4 Ipv4::parse(std::string_view text) {
    if (auto a = try_parse(text)) return *a;
    throw AuditError("invalid IPv4 address: " + std::string(text));
}

std::string Ipv4::to_string() const {
    return std::to_string(value_ >> 24) + '.' + std::to_string(value_ >> 16 & 0xFF) + '.' +
           std::to_string(value_ >> 8 & 0xFF) + '.' + std::to_string(value_ & 0xFF);
}

Cidr::Cidr(Ipv4 network, int prefix_len) : prefix_(prefix_len) {
    if (prefix_len < 0 || prefix_len > 32) throw AuditError("invalid prefix length");
    network_ = Ipv4{network.value() & mask()};
}

Cidr Cidr::parse(std::string_view text) {
    text = trim(text);
    auto slash = text.find('/');
    if (slash == std::string_view::npos) return Cidr{Ipv4::parse(text), 32};
    int len = -1;
    auto lenpart = text.substr(slash + 1);
    auto [p, ec] = std::from_chars(lenpart.data(), lenpart.data() + lenpart.size(), len);
    if (ec != std::errc{} || p != lenpart.data() + lenpart.size() || len < 0 || len > 32)
        throw AuditError("invalid CIDR: " + std::string(text));
    return Cidr{Ipv4::parse(text.substr(0, slash)), len};
}

std::string Cidr::to_string() const { return network_.to_string() + '/' + std::to_string(prefix_); }

CidrSet CidrSet::load(const std::filesystem::path& path) {
    CidrSet set;
    for_each_line(path, [&](std::string_view s, std::size_t no) {
        try {
            set.add(Cidr::parse(s));
        } catch (const AuditError& e) {
            throw AuditError(path.string() + ":" + std::to_string(no) + ": " + e.what());
        }
    });
    return set;
}

void CidrSet::merge(const CidrSet& other) {
    ranges_.insert(ranges_.end(), other.ranges_.begin(), other.ranges_.end());
}

bool CidrSet::contains(Ipv4 addr) const {
    return std::ranges::any_of(ranges_, [&](const Cidr& c) { return c.contains(addr); });
}

std::string_view to_string(AsType t) {
    switch (t) {
        case AsType::enterprise: return "enterprise";
        case AsType::isp: return "isp";
        case AsType::unknown: return "unknown";
    }
    return "unknown";
}

AsType as_type_from_category(std::string_view category) {
    std::string c;
    for (char ch : trim(category)) c.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (c == "content" || c == "enterprise") return AsType::enterprise;
    if (c == "network services" || c == "nsp" || c == "educational" || c == "educational/research" ||
        c == "isp" || c == "cable/dsl/isp")
        return AsType::isp;
    return AsType::unknown;
}

AsMap AsMap::load(const std::filesystem::path& prefixes, const std::optional<std::filesystem::path>& types) {
    AsMap m;
    for_each_line(prefixes, [&](std::string_view s, std::size_t no) {
        auto [cidr, asn] = split_tab(s);
        std::uint32_t v = 0;
        auto a = asn;
        if (a.starts_with("AS") || a.starts_with("as")) a.remove_prefix(2);
        auto [p, ec] = std::from_chars(a.data(), a.data() + a.size(), v);
        if (ec != std::errc{} || p != a.data() + a.size())
            throw AuditError(prefixes.string() + ":" + std::to_string(no) + ": bad ASN");
        m.add(Cidr::parse(cidr), v);
    });
    if (types) {
        for_each_line(*types, [&](std::string_view s, std::size_t no) {
            auto [asn, cat] = split_tab(s);
            std::uint32_t v = 0;
            if (asn.starts_with("AS") || asn.starts_with("as")) asn.remove_prefix(2);
            auto [p, ec] = std::from_chars(asn.data(), asn.data() + asn.size(), v);
            if (ec != std::errc{})
                throw AuditError(types->string() + ":" + std::to_string(no) + ": bad ASN");
            m.set_type(v, as_type_from_category(cat));
        });
    }
    return m;
}

void AsMap::add(Cidr prefix, std::uint32_t asn) {
    by_len_[static_cast<std::size_t>(prefix.prefix_len())][prefix.network().value()] = asn;
}

std::uint32_t AsMap::lookup(Ipv4 addr) const {
    for (int len = 32; len >= 0; --len) {
        const auto& table = by_len_[static_cast<std::size_t>(len)];
        if (table.empty()) continue;
        const std::uint32_t mask = len == 0 ? 0u : ~0u << (32 - len);
        if (auto it = table.find(addr.value() & mask); it != table.end()) return it->second;
    }
    return kUnknownAsn;
}

AsType AsMap::type_of(std::uint32_t asn) const {
    auto it = types_.find(asn);
    return it == types_.end() ? AsType::unknown : it->second;
}

std::size_t AsMap::prefix_count() const {
    std::size_t n = 0;
    for (const auto& t : by_len_) n += t.size();
    return n;
}

}  // namespace iiot
