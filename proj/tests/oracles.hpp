#pragma once

// Reference implementations used as test oracles. Each one is written
// from the textbook definition, deliberately without sharing code or data
// structures with the library it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <sys/mman.h>
#include <unistd.h>

namespace oracle {

inline std::filesystem::path fixtures() { return IIOT_FIXTURES_DIR; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Suite names per set from the hand-transcribed fixture (set<TAB>name).
inline std::map<std::string, std::vector<std::string>> cipher_sets() {
    std::map<std::string, std::vector<std::string>> out;
    std::istringstream in(slurp(fixtures() / "cipher_sets.tsv"));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        out[line.substr(0, tab)].push_back(line.substr(tab + 1));
    }
    return out;
}

/// Copy of a buffer that ends exactly at an inaccessible page, so any read
/// past its end faults instead of silently returning heap bytes.
class GuardedBuffer {
public:
    explicit GuardedBuffer(const std::vector<std::uint8_t>& data) : size_(data.size()) {
        const std::size_t page = static_cast<std::size_t>(sysconf(_SC_PAGESIZE));
        pages_ = (size_ + page - 1) / page + 1;
        base_ = static_cast<std::uint8_t*>(
            mmap(nullptr, pages_ * page, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0));
        mprotect(base_ + (pages_ - 1) * page, page, PROT_NONE);
        data_ = base_ + (pages_ - 1) * page - size_;
        std::copy(data.begin(), data.end(), data_);
        page_ = page;
    }
    GuardedBuffer(const GuardedBuffer&) = delete;
    GuardedBuffer& operator=(const GuardedBuffer&) = delete;
    ~GuardedBuffer() { munmap(base_, pages_ * page_); }

    const std::uint8_t* data() const { return data_; }
    std::size_t size() const { return size_; }

private:
    std::size_t size_, pages_ = 0, page_ = 0;
    std::uint8_t* base_ = nullptr;
    std::uint8_t* data_ = nullptr;
};

// ------------------------------------------------------------ reuse rule

/// Hosts behind one or two addresses in a single AS are not reused; more
/// than two addresses in one AS is intra-AS reuse; more than one AS is
/// inter-AS reuse (the two-address, two-AS case included, since every
/// usage set must land in exactly one class).
enum class ReuseClass { not_reused, intra_as, inter_as };

inline ReuseClass reuse_rule(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& ip_as) {
    std::set<std::uint32_t> ips, ases;
    for (auto [ip, as] : ip_as) {
        ips.insert(ip);
        ases.insert(as);
    }
    if (ases.size() == 1) return ips.size() <= 2 ? ReuseClass::not_reused : ReuseClass::intra_as;
    return ips.size() == 1 ? ReuseClass::not_reused : ReuseClass::inter_as;
}

// ------------------------------------------------------------ Mann-Whitney

/// U of `a` by direct pair counting: wins count 1, ties 1/2.
inline double u_by_pairs(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0;
    for (double x : a)
        for (double y : b) u += x > y ? 1.0 : x == y ? 0.5 : 0.0;
    return u;
}

/// Two-sided exact p over all relabelings of the pooled values, U
/// recomputed by pair counting for every subset (bitmask enumeration).
inline double exact_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t n = pooled.size(), k = a.size();
    const double mid = static_cast<double>(a.size() * b.size()) / 2.0;
    const double obs = std::abs(u_by_pairs(a, b) - mid);
    std::size_t hits = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
        std::vector<double> x, y;
        for (std::size_t i = 0; i < n; ++i) (mask >> i & 1 ? x : y).push_back(pooled[i]);
        ++total;
        if (std::abs(u_by_pairs(x, y) - mid) >= obs - 1e-9) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

// ------------------------------------------------------------ TF-IDF + DBSCAN

/// Dense TF-IDF over character 1..3-grams: raw counts, idf = ln(N/df) + 1,
/// rows L2-normalized. Columns are n-grams in lexicographic order.
inline std::vector<std::vector<double>> dense_tfidf(const std::vector<std::string>& docs) {
    std::vector<std::map<std::string, double>> tf(docs.size());
    std::map<std::string, double> df;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (std::size_t n = 1; n <= 3; ++n)
            for (std::size_t i = 0; i + n <= docs[d].size(); ++i) tf[d][docs[d].substr(i, n)] += 1;
        for (const auto& [g, _] : tf[d]) df[g] += 1;
    }
    std::map<std::string, std::size_t> col;
    for (const auto& [g, _] : df) col.emplace(g, col.size());
    std::vector<std::vector<double>> m(docs.size(), std::vector<double>(col.size(), 0.0));
    const double N = static_cast<double>(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        double norm = 0;
        for (const auto& [g, c] : tf[d]) {
            const double w = c * (std::log(N / df[g]) + 1.0);
            m[d][col[g]] = w;
            norm += w * w;
        }
        for (auto& w : m[d]) w /= std::sqrt(norm);
    }
    return m;
}

inline double dense_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

/// Textbook DBSCAN (Ester et al.) over a full similarity matrix. A pair
/// are neighbours when their similarity clears the graph threshold and
/// their cosine distance is within eps. Visits points in index order.
/// Returns one label per point, -1 for noise.
inline std::vector<int> brute_dbscan(const std::vector<std::vector<double>>& sim, double threshold, double eps,
                                     std::size_t min_pts) {
    const std::size_t n = sim.size();
    auto region = [&](std::size_t p) {
        std::vector<std::size_t> out;
        for (std::size_t q = 0; q < n; ++q)
            if (q == p || (sim[p][q] >= threshold && 1.0 - sim[p][q] <= eps + 1e-12)) out.push_back(q);
        return out;
    };
    constexpr int undefined = -2, noise = -1;
    std::vector<int> label(n, undefined);
    int c = -1;
    for (std::size_t p = 0; p < n; ++p) {
        if (label[p] != undefined) continue;
        const auto nb = region(p);
        if (nb.size() < min_pts) {
            label[p] = noise;
            continue;
        }
        label[p] = ++c;
        std::vector<std::size_t> seeds;
        for (auto q : nb)
            if (q != p) seeds.push_back(q);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const auto q = seeds[i];
            if (label[q] == noise) label[q] = c;
            if (label[q] != undefined) continue;
            label[q] = c;
            const auto qn = region(q);
            if (qn.size() >= min_pts)
                for (auto r : qn)
                    if (std::find(seeds.begin(), seeds.end(), r) == seeds.end()) seeds.push_back(r);
        }
    }
    return label;
}

/// Shannon entropy in bits by the definition -sum p log2 p.
inline double entropy_bits(const std::vector<std::string>& values) {
    std::map<std::string, int> freq;
    for (const auto& v : values) ++freq[v];
    double h = 0;
    for (const auto& [_, c] : freq) {
        const double p = static_cast<double>(c) / static_cast<double>(values.size());
        h -= p * std::log(p) / std::log(2.0);
    }
    return h;
}

// ------------------------------------------------------------ DNP3 CRC

/// CRC-16/DNP computed bit by bit: reflected polynomial 0xA6BC, zero
/// init, complemented, transmitted low byte first.
inline std::uint16_t dnp3_crc(const std::vector<std::uint8_t>& data) {
    std::uint16_t crc = 0;
    for (auto byte : data) {
        crc ^= byte;
        for (int i = 0; i < 8; ++i) crc = (crc & 1) ? static_cast<std::uint16_t>((crc >> 1) ^ 0xA6BC) : crc >> 1;
    }
    return static_cast<std::uint16_t>(~crc);
}

}  // namespace oracle
