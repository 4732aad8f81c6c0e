#pragma once

// Frozen case tables shared by the unit tests and the acceptance run.

#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "iiot/assessor.hpp"
#include "iiot/clustering.hpp"
#include "oracles.hpp"

namespace cases {

using namespace iiot;
using namespace std::chrono;

inline TimePoint at(int y, unsigned m, unsigned d, int secs = 0) {
    return TimePoint{sys_days{year{y} / month{m} / day{d}}} + seconds{secs};
}

inline std::set<Check> checks_of(const std::vector<Finding>& fs) {
    std::set<Check> out;
    for (const auto& f : fs) out.insert(f.check);
    return out;
}


struct CertCase {
    const char* label;
    TimePoint not_before;
    seconds lifetime;
    KeyType key;
    int bits;
    SigHash hash;
    /// Offset of "now" from not_after; negative means inside the window.
    seconds now_after_expiry;
    std::set<Check> want;
};

inline constexpr auto kInside = -seconds{days{1}};

// Cap lengths counted by hand on a calendar:
//   2016-06-01 + 39 months = 2019-09-01 -> 1187 days
//   2016-11-30 + 39 months = 2020-02-29 (clamped) -> 1186 days
//   2018-01-31 + 39 months = 2021-04-30 (clamped) -> 1185 days
inline const std::vector<CertCase>& cert_cases() {
    static const std::vector<CertCase> cases = {
        {"pre-2016 ten years", at(2016, 5, 31), days{3650}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"39 mo exact", at(2016, 6, 1), days{1187}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"39 mo + 1 s", at(2016, 6, 1), days{1187} + seconds{1}, KeyType::RSA, 2048, SigHash::SHA256, kInside,
         {Check::over_long_lifetime}},
        {"39 mo clamp exact", at(2016, 11, 30), days{1186}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"39 mo clamp + 1 d", at(2016, 11, 30), days{1187}, KeyType::RSA, 2048, SigHash::SHA256, kInside,
         {Check::over_long_lifetime}},
        {"last 39 mo second", at(2018, 1, 31, 86399), days{1000}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"825 d exact", at(2018, 2, 1), days{825}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"826 d", at(2018, 2, 1), days{826}, KeyType::RSA, 2048, SigHash::SHA256, kInside,
         {Check::over_long_lifetime}},
        {"825 d before 2020-09", at(2020, 8, 31), days{825}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"398 d exact", at(2020, 9, 1), days{398}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"399 d", at(2020, 9, 1), days{399}, KeyType::RSA, 2048, SigHash::SHA256, kInside,
         {Check::over_long_lifetime}},
        {"five years in 2021", at(2021, 1, 1), days{1826}, KeyType::RSA, 2048, SigHash::SHA256, kInside,
         {Check::over_long_lifetime}},
        {"one year in 2021", at(2021, 1, 1), days{365}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"expired yesterday", at(2021, 1, 1), days{365}, KeyType::RSA, 2048, SigHash::SHA256, seconds{days{1}},
         {Check::expired_cert}},
        {"expires now", at(2021, 1, 1), days{365}, KeyType::RSA, 2048, SigHash::SHA256, seconds{0}, {}},
        {"expired 1 s ago", at(2021, 1, 1), days{365}, KeyType::RSA, 2048, SigHash::SHA256, seconds{1},
         {Check::expired_cert}},
        {"RSA 1999", at(2021, 1, 1), days{365}, KeyType::RSA, 1999, SigHash::SHA256, kInside, {Check::short_key}},
        {"RSA 2000", at(2021, 1, 1), days{365}, KeyType::RSA, 2000, SigHash::SHA256, kInside, {}},
        {"RSA 2048", at(2021, 1, 1), days{365}, KeyType::RSA, 2048, SigHash::SHA256, kInside, {}},
        {"ECDSA 256", at(2021, 1, 1), days{365}, KeyType::ECDSA, 256, SigHash::SHA256, kInside, {}},
        {"MD5", at(2021, 1, 1), days{365}, KeyType::RSA, 2048, SigHash::MD5, kInside, {Check::weak_sig_hash}},
        {"SHA1", at(2021, 1, 1), days{365}, KeyType::RSA, 2048, SigHash::SHA1, kInside, {Check::weak_sig_hash}},
        {"SHA256", at(2021, 1, 1), days{365}, KeyType::RSA, 4096, SigHash::SHA256, kInside, {}},
        {"RSA 1024 MD5 expired", at(2019, 1, 1), days{365}, KeyType::RSA, 1024, SigHash::MD5, seconds{days{30}},
         {Check::short_key, Check::weak_sig_hash, Check::expired_cert}},
        {"ECDSA SHA512", at(2021, 1, 1), days{365}, KeyType::ECDSA, 521, SigHash::SHA512, kInside, {}},
    };
    return cases;
}

inline std::set<Check> grade_cert(const CertCase& c) {
    CertificateRecord r;
    r.not_before = c.not_before;
    r.not_after = c.not_before + c.lifetime;
    r.key_type = c.key;
    r.key_bits = c.bits;
    r.sig_hash = c.hash;
    const auto now = r.not_after + c.now_after_expiry;
    auto fs = check_lifetime(r, now, "u");
    const auto prim = check_primitives(r, "u");
    fs.insert(fs.end(), prim.begin(), prim.end());
    return checks_of(fs);
}

// ------------------------------------------------------------ clustering corpus

struct Corpus {
    std::vector<Document> docs;
    std::vector<int> template_of;  ///< -1 for random subjects
};

inline std::string random_word(std::mt19937& rng, std::size_t len) {
    static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
}

/// Four subject templates with 30 instances each, then 20 random subjects.
inline Corpus synthetic_corpus(unsigned seed = 42) {
    std::mt19937 rng(seed);
    Corpus c;
    char buf[160];
    for (int t = 0; t < 4; ++t) {
        for (int i = 0; i < 30; ++i) {
            const unsigned v = rng() % 100000;
            switch (t) {
                case 0: std::snprintf(buf, sizeof buf, "CN=device-%05u.plant.example,O=Acme Controls,OU=Field", v); break;
                case 1: std::snprintf(buf, sizeof buf, "CN=Gateway GW%05u,O=Northwind Automation,C=DE", v); break;
                case 2: std::snprintf(buf, sizeof buf, "CN=mqtt-broker-%u.local,O=Harbor Messaging,L=Springfield", v); break;
                default: std::snprintf(buf, sizeof buf, "CN=%05X,OU=Station Appliance,O=Tridiumlike Systems", v); break;
            }
            c.docs.push_back({"t" + std::to_string(t) + "-" + std::to_string(i), buf});
            c.template_of.push_back(t);
        }
    }
    for (int i = 0; i < 20; ++i) {
        c.docs.push_back({"r" + std::to_string(i),
                          "CN=" + random_word(rng, 8 + rng() % 12) + ",O=" + random_word(rng, 5 + rng() % 10)});
        c.template_of.push_back(-1);
    }
    return c;
}

inline std::vector<int> reference_labels(const std::vector<Document>& docs, double threshold = 0.5, double eps = 0.8,
                                  std::size_t min_pts = 3) {
    std::vector<std::string> subjects;
    for (const auto& d : docs) subjects.push_back(d.subject);
    const auto m = oracle::dense_tfidf(subjects);
    std::vector<std::vector<double>> sim(m.size(), std::vector<double>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) sim[i][j] = oracle::dense_cosine(m[i], m[j]);
    return oracle::brute_dbscan(sim, threshold, eps, min_pts);
}

}  // namespace cases
