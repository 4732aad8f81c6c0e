#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iiot {

/// The four cipher-suite batteries, in the order they are offered.
enum class SuiteSetName : std::uint8_t { REC, noPFS, COMP, INS };

inline constexpr std::array<SuiteSetName, 4> kBatteryOrder = {
    SuiteSetName::REC, SuiteSetName::noPFS, SuiteSetName::COMP, SuiteSetName::INS};

std::string_view to_string(SuiteSetName s);
SuiteSetName parse_suite_set(std::string_view name);

struct CipherSuite {
    std::uint16_t code = 0;
    /// Registry name without the TLS_ prefix, exactly as listed in the
    /// shipped battery tables.
    std::string_view name;
};

struct SuiteSet {
    SuiteSetName name{};
    std::span<const CipherSuite> suites;

    std::vector<std::uint16_t> codes() const;
    bool contains(std::uint16_t code) const;
};

const SuiteSet& suite_set(SuiteSetName name);

/// Name for a code point; falls back to "0xHHHH" for suites outside the
/// four batteries.
std::string suite_name(std::uint16_t code);
std::optional<std::uint16_t> suite_code(std::string_view name);

/// Weakness of the bulk cipher / MAC of a negotiated suite, as used for
/// the compatibility battery breakdown.
struct SuiteWeakness {
    bool weak_cipher = false;  ///< RC4 or 3DES
    bool weak_mac = false;     ///< HMAC-SHA1 (AEAD suites never qualify)
    bool any() const { return weak_cipher || weak_mac; }
};

SuiteWeakness classify_suite(std::string_view name);
SuiteWeakness classify_suite(std::uint16_t code);

}  // namespace iiot
