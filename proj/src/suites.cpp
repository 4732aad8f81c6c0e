#include "iiot/suites.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "iiot/bytes.hpp"

namespace iiot {
namespace {

// Battery tables, in offer order. Names are kept verbatim. Two of them
// have no registry entry (ECDH_RSA_WITH_AES_256_CBC_SHA256 and
// RSA_WITH_RC4_40_MD5); they are offered as the registered suites the
// surrounding entries imply, DH_RSA_WITH_AES_256_CBC_SHA256 (0x0069) and
// RSA_WITH_RC4_128_MD5 (0x0004).
constexpr CipherSuite kRec[] = {
    {0xC02C, "ECDHE_ECDSA_WITH_AES_256_GCM_SHA384"},
    {0xC030, "ECDHE_RSA_WITH_AES_256_GCM_SHA384"},
    {0x009F, "DHE_RSA_WITH_AES_256_GCM_SHA384"},
    {0x00A3, "DHE_DSS_WITH_AES_256_GCM_SHA384"},
    {0xC0AD, "ECDHE_ECDSA_WITH_AES_256_CCM"},
    {0xC09F, "DHE_RSA_WITH_AES_256_CCM"},
    {0xC02B, "ECDHE_ECDSA_WITH_AES_128_GCM_SHA256"},
    {0xC02F, "ECDHE_RSA_WITH_AES_128_GCM_SHA256"},
    {0x009E, "DHE_RSA_WITH_AES_128_GCM_SHA256"},
    {0x00A2, "DHE_DSS_WITH_AES_128_GCM_SHA256"},
    {0xC0AC, "ECDHE_ECDSA_WITH_AES_128_CCM"},
    {0xC09E, "DHE_RSA_WITH_AES_128_CCM"},
    {0xC024, "ECDHE_ECDSA_WITH_AES_256_CBC_SHA384"},
    {0xC028, "ECDHE_RSA_WITH_AES_256_CBC_SHA384"},
    {0x006B, "DHE_RSA_WITH_AES_256_CBC_SHA256"},
    {0x006A, "DHE_DSS_WITH_AES_256_CBC_SHA256"},
    {0x0067, "DHE_RSA_WITH_AES_128_CBC_SHA256"},
    {0x0040, "DHE_DSS_WITH_AES_128_CBC_SHA256"},
    {0xC027, "ECDHE_RSA_WITH_AES_128_CBC_SHA256"},
    {0xC023, "ECDHE_ECDSA_WITH_AES_128_CBC_SHA256"},
    {0xC009, "ECDHE_ECDSA_WITH_AES_128_CBC_SHA"},
    {0xC0AF, "ECDHE_ECDSA_WITH_AES_256_CCM_8"},
    {0xC0A3, "DHE_RSA_WITH_AES_256_CCM_8"},
    {0xC0AE, "ECDHE_ECDSA_WITH_AES_128_CCM_8"},
    {0xC0A2, "DHE_RSA_WITH_AES_128_CCM_8"},
    {0xC00A, "ECDHE_ECDSA_WITH_AES_256_CBC_SHA"},
};

constexpr CipherSuite kNoPfs[] = {
    {0xC02E, "ECDH_ECDSA_WITH_AES_256_GCM_SHA384"},
    {0xC032, "ECDH_RSA_WITH_AES_256_GCM_SHA384"},
    {0x00A1, "DH_RSA_WITH_AES_256_GCM_SHA384"},
    {0x00A5, "DH_DSS_WITH_AES_256_GCM_SHA384"},
    {0xC02D, "ECDH_ECDSA_WITH_AES_128_GCM_SHA256"},
    {0xC031, "ECDH_RSA_WITH_AES_128_GCM_SHA256"},
    {0x00A0, "DH_RSA_WITH_AES_128_GCM_SHA256"},
    {0x00A4, "DH_DSS_WITH_AES_128_GCM_SHA256"},
    {0xC026, "ECDH_ECDSA_WITH_AES_256_CBC_SHA384"},
    {0xC02A, "ECDH_RSA_WITH_AES_256_CBC_SHA384"},
    {0x0069, "ECDH_RSA_WITH_AES_256_CBC_SHA256"},
    {0x0068, "DH_DSS_WITH_AES_256_CBC_SHA256"},
    {0xC025, "ECDH_ECDSA_WITH_AES_128_CBC_SHA256"},
    {0xC029, "ECDH_RSA_WITH_AES_128_CBC_SHA256"},
    {0x003F, "DH_RSA_WITH_AES_128_CBC_SHA256"},
    {0x003E, "DH_DSS_WITH_AES_128_CBC_SHA256"},
};

constexpr CipherSuite kComp[] = {
    {0xC02F, "ECDHE_RSA_WITH_AES_128_GCM_SHA256"},
    {0xC02B, "ECDHE_ECDSA_WITH_AES_128_GCM_SHA256"},
    {0xC011, "ECDHE_RSA_WITH_RC4_128_SHA"},
    {0xC007, "ECDHE_ECDSA_WITH_RC4_128_SHA"},
    {0xC013, "ECDHE_RSA_WITH_AES_128_CBC_SHA"},
    {0xC009, "ECDHE_ECDSA_WITH_AES_128_CBC_SHA"},
    {0xC014, "ECDHE_RSA_WITH_AES_256_CBC_SHA"},
    {0xC00A, "ECDHE_ECDSA_WITH_AES_256_CBC_SHA"},
    {0x0005, "RSA_WITH_RC4_128_SHA"},
    {0x002F, "RSA_WITH_AES_128_CBC_SHA"},
    {0x0035, "RSA_WITH_AES_256_CBC_SHA"},
    {0xC012, "ECDHE_RSA_WITH_3DES_EDE_CBC_SHA"},
    {0x000A, "RSA_WITH_3DES_EDE_CBC_SHA"},
};

constexpr CipherSuite kIns[] = {
    {0x0000, "NULL_WITH_NULL_NULL"},
    {0x0001, "RSA_WITH_NULL_MD5"},
    {0x0002, "RSA_WITH_NULL_SHA"},
    {0x003B, "RSA_WITH_NULL_SHA256"},
    {0xC001, "ECDH_ECDSA_WITH_NULL_SHA"},
    {0xC006, "ECDHE_ECDSA_WITH_NULL_SHA"},
    {0xC00B, "ECDH_RSA_WITH_NULL_SHA"},
    {0xC010, "ECDHE_RSA_WITH_NULL_SHA"},
    {0xC015, "ECDH_ANON_WITH_NULL_SHA"},
    {0x0006, "RSA_EXPORT_WITH_RC2_CBC_40_MD5"},
    {0x0061, "RSA_EXPORT1024_WITH_RC2_CBC_56_MD5"},
    {0x0008, "RSA_EXPORT_WITH_DES40_CBC_SHA"},
    {0x000E, "DH_RSA_EXPORT_WITH_DES40_CBC_SHA"},
    {0x000B, "DH_DSS_EXPORT_WITH_DES40_CBC_SHA"},
    {0x0011, "DHE_DSS_EXPORT_WITH_DES40_CBC_SHA"},
    {0x0014, "DHE_RSA_EXPORT_WITH_DES40_CBC_SHA"},
    {0x0019, "DH_ANON_EXPORT_WITH_DES40_CBC_SHA"},
    {0x0063, "DHE_DSS_EXPORT1024_WITH_DES_CBC_SHA"},
    {0x0062, "RSA_EXPORT1024_WITH_DES_CBC_SHA"},
    {0x0017, "DH_ANON_EXPORT_WITH_RC4_40_MD5"},
    {0x0060, "RSA_EXPORT1024_WITH_RC4_56_MD5"},
    {0x0064, "RSA_EXPORT1024_WITH_RC4_56_SHA"},
    {0x0065, "DHE_DSS_EXPORT1024_WITH_RC4_56_SHA"},
    {0x0003, "RSA_EXPORT_WITH_RC4_40_MD5"},
    {0x0004, "RSA_WITH_RC4_40_MD5"},
    {0x0005, "RSA_WITH_RC4_128_SHA"},
    {0x0018, "DH_ANON_WITH_RC4_128_MD5"},
    {0x0066, "DHE_DSS_WITH_RC4_128_SHA"},
    {0xC002, "ECDH_ECDSA_WITH_RC4_128_SHA"},
    {0xC007, "ECDHE_ECDSA_WITH_RC4_128_SHA"},
    {0xC00C, "ECDH_RSA_WITH_RC4_128_SHA"},
    {0xC011, "ECDHE_RSA_WITH_RC4_128_SHA"},
    {0xC016, "ECDH_ANON_WITH_RC4_128_SHA"},
    {0x0009, "RSA_WITH_DES_CBC_SHA"},
    {0x000C, "DH_DSS_WITH_DES_CBC_SHA"},
    {0x000F, "DH_RSA_WITH_DES_CBC_SHA"},
    {0x0012, "DHE_DSS_WITH_DES_CBC_SHA"},
    {0x0015, "DHE_RSA_WITH_DES_CBC_SHA"},
    {0x001A, "DH_ANON_WITH_DES_CBC_SHA"},
    {0x001B, "DH_ANON_WITH_3DES_EDE_CBC_SHA"},
    {0xC017, "ECDH_ANON_WITH_3DES_EDE_CBC_SHA"},
    {0x006C, "DH_ANON_WITH_AES_128_CBC_SHA256"},
    {0x006D, "DH_ANON_WITH_AES_256_CBC_SHA256"},
    {0x00A6, "DH_ANON_WITH_AES_128_GCM_SHA256"},
    {0x00A7, "DH_ANON_WITH_AES_256_GCM_SHA384"},
    {0xC018, "ECDH_ANON_WITH_AES_128_CBC_SHA"},
    {0xC019, "ECDH_ANON_WITH_AES_256_CBC_SHA"},
};
const SuiteSet kSets[] = {
    {SuiteSetName::REC, kRec},
    {SuiteSetName::noPFS, kNoPfs},
    {SuiteSetName::COMP, kComp},
    {SuiteSetName::INS, kIns},
};

bool contains(std::string_view hay, std::string_view needle) {
    return hay.find(needle) != std::string_view::npos;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string_view to_string(SuiteSetName s) {
    switch (s) {
        case SuiteSetName::REC: return "REC";
        case SuiteSetName::noPFS: return "noPFS";
        case SuiteSetName::COMP: return "COMP";
        case SuiteSetName::INS: return "INS";
    }
    return "?";
}

SuiteSetName parse_suite_set(std::string_view name) {
    for (auto s : kBatteryOrder)
        if (to_string(s) == name) return s;
    throw AuditError("unknown suite set: " + std::string(name));
}

std::vector<std::uint16_t> SuiteSet::codes() const {
    std::vector<std::uint16_t> out;
    out.reserve(suites.size());
    for (const auto& s : suites) out.push_back(s.code);
    return out;
}

bool SuiteSet::contains(std::uint16_t code) const {
    return std::any_of(suites.begin(), suites.end(),
                       [code](const CipherSuite& s) { return s.code == code; });
}

const SuiteSet& suite_set(SuiteSetName name) { return kSets[static_cast<int>(name)]; }

std::string suite_name(std::uint16_t code) {
    for (const auto& set : kSets)
        for (const auto& s : set.suites)
            if (s.code == code) return std::string(s.name);
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%04X", code);
    return buf;
}

std::optional<std::uint16_t> suite_code(std::string_view name) {
    for (const auto& set : kSets)
        for (const auto& s : set.suites)
            if (s.name == name) return s.code;
    return std::nullopt;
}

SuiteWeakness classify_suite(std::string_view name) {
    SuiteWeakness w;
    const auto with = name.find("_WITH_");
    const auto bulk = with == std::string_view::npos ? name : name.substr(with + 6);
    w.weak_cipher = contains(bulk, "RC4") || contains(bulk, "3DES") || contains(bulk, "DES") ||
                    contains(bulk, "RC2") || bulk.starts_with("NULL") || contains(name, "EXPORT");
    const bool aead = contains(bulk, "GCM") || contains(bulk, "CCM") || contains(bulk, "POLY1305");
    w.weak_mac = !aead && (ends_with(bulk, "_SHA") || ends_with(bulk, "_MD5"));
    return w;
}

SuiteWeakness classify_suite(std::uint16_t code) {
    auto name = suite_name(code);
    if (name.starts_with("0x")) return {};
    return classify_suite(std::string_view{name});
}

}  // namespace iiot
