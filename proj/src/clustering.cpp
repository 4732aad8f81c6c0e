#include "iiot/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <unordered_map>

namespace iiot {

std::vector<SubjectVector> vectorize(const std::vector<Document>& docs, const VectorizerOptions& opt) {
    std::unordered_map<std::string, std::uint32_t> vocab;
    std::vector<std::map<std::uint32_t, double>> counts(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto& s = docs[d].subject;
        for (std::size_t n = opt.min_n; n <= opt.max_n; ++n) {
            for (std::size_t i = 0; i + n <= s.size(); ++i) {
                auto [it, fresh] = vocab.try_emplace(s.substr(i, n), static_cast<std::uint32_t>(vocab.size()));
                counts[d][it->second] += 1;
            }
        }
    }
    std::vector<double> df(vocab.size(), 0);
    for (const auto& c : counts)
        for (const auto& [t, _] : c) df[t] += 1;
    const double n_docs = static_cast<double>(docs.size());

    std::vector<SubjectVector> out(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        out[d].fingerprint = docs[d].fingerprint;
        double norm = 0;
        for (const auto& [t, tf] : counts[d]) {
            const double w = tf * (std::log(n_docs / df[t]) + 1.0);
            out[d].weights.emplace_back(t, w);
            norm += w * w;
        }
        norm = std::sqrt(norm);
        if (norm > 0)
            for (auto& [t, w] : out[d].weights) w /= norm;
    }
    return out;
}

double cosine(const SubjectVector& a, const SubjectVector& b) {
    double dot = 0;
    auto i = a.weights.begin(), j = b.weights.begin();
    while (i != a.weights.end() && j != b.weights.end()) {
        if (i->first < j->first) {
            ++i;
        } else if (j->first < i->first) {
            ++j;
        } else {
            dot += i->second * j->second;
            ++i;
            ++j;
        }
    }
    return dot;
}

SimilarityGraph similarity_graph(const std::vector<SubjectVector>& v, std::size_t top_k, double threshold) {
    const std::size_t n = v.size();
    std::vector<std::map<std::size_t, double>> sym(n);
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t i = 0; i < n; ++i) {
        row.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double s = cosine(v[i], v[j]);
            if (s >= threshold) row.emplace_back(j, s);
        }
        if (row.size() > top_k) {
            // Ties broken by index so the kept set does not depend on sort stability.
            std::ranges::partial_sort(row, row.begin() + static_cast<std::ptrdiff_t>(top_k), [](auto& x, auto& y) {
                return x.second != y.second ? x.second > y.second : x.first < y.first;
            });
            row.resize(top_k);
        }
        for (const auto& [j, s] : row) {
            sym[i][j] = s;
            sym[j][i] = s;
        }
    }
    SimilarityGraph g;
    g.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.rows[i].assign(sym[i].begin(), sym[i].end());
    return g;
}

DbscanResult dbscan(const SimilarityGraph& g, double eps, std::size_t min_points) {
    const std::size_t n = g.rows.size();
    constexpr int kUnvisited = -2, kNoise = -1;
    DbscanResult res;
    res.labels.assign(n, kUnvisited);
    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (const auto& [j, s] : g.rows[i])
            if (1.0 - s <= eps + 1e-12) out.push_back(j);
        return out;
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (res.labels[i] != kUnvisited) continue;
        auto nb = neighbors(i);
        if (nb.size() + 1 < min_points) {
            res.labels[i] = kNoise;
            continue;
        }
        const int c = static_cast<int>(res.clusters.size());
        res.clusters.emplace_back();
        res.labels[i] = c;
        std::deque<std::size_t> queue(nb.begin(), nb.end());
        while (!queue.empty()) {
            const auto q = queue.front();
            queue.pop_front();
            if (res.labels[q] == kNoise) res.labels[q] = c;  // border point
            if (res.labels[q] != kUnvisited) continue;
            res.labels[q] = c;
            auto qn = neighbors(q);
            if (qn.size() + 1 >= min_points) queue.insert(queue.end(), qn.begin(), qn.end());
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (res.labels[i] >= 0) res.clusters[static_cast<std::size_t>(res.labels[i])].push_back(i);
    return res;
}

std::string_view to_string(CertParameter p) {
    switch (p) {
        case CertParameter::key: return "key";
        case CertParameter::signature_algorithm: return "signature_algorithm";
        case CertParameter::lifetime_days: return "lifetime_days";
        case CertParameter::not_before_date: return "not_before_date";
        case CertParameter::key_usage: return "key_usage";
        case CertParameter::issuer: return "issuer";
    }
    return "";
}

std::string parameter_value(const CertificateRecord& c, CertParameter p) {
    switch (p) {
        case CertParameter::key: return std::string(to_string(c.key_type)) + "-" + std::to_string(c.key_bits);
        case CertParameter::signature_algorithm: return c.sig_algorithm;
        case CertParameter::lifetime_days: return std::to_string((c.not_after - c.not_before).count() / 86400);
        case CertParameter::not_before_date: return format_time(c.not_before).substr(0, 10);
        case CertParameter::key_usage: return c.key_usage;
        case CertParameter::issuer: return c.issuer;
    }
    return "";
}

double shannon_entropy(const std::vector<std::string>& values) {
    if (values.empty()) return 0;
    std::map<std::string, double> freq;
    for (const auto& v : values) freq[v] += 1;
    const double n = static_cast<double>(values.size());
    double h = 0;
    for (const auto& [_, c] : freq) h -= c / n * std::log2(c / n);
    return h <= 0 ? 0.0 : h;
}

double normalized_entropy(const std::vector<std::string>& values) {
    if (values.size() <= 1) return 0;
    const double h = shannon_entropy(values);
    return h == 0 ? 0.0 : h / std::log2(static_cast<double>(values.size()));
}

std::map<CertParameter, ParameterEntropy> entropy_analysis(const std::vector<CertificateRecord>& corpus,
                                                          const std::vector<int>& labels) {
    if (labels.size() != corpus.size()) throw AuditError("one cluster label per certificate required");
    std::map<int, std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) clusters[labels[i]].push_back(i);
    std::size_t clustered = 0;
    for (const auto& [_, m] : clusters) clustered += m.size();

    std::map<CertParameter, ParameterEntropy> out;
    for (auto p : kCertParameters) {
        std::vector<std::string> all;
        for (const auto& c : corpus) all.push_back(parameter_value(c, p));
        ParameterEntropy e;
        e.global_entropy = shannon_entropy(all);
        e.global_normalized = normalized_entropy(all);
        for (const auto& [_, members] : clusters) {
            std::vector<std::string> vals;
            for (auto i : members) vals.push_back(all[i]);
            e.weighted_cluster_entropy +=
                static_cast<double>(members.size()) / static_cast<double>(clustered) * normalized_entropy(vals);
        }
        out[p] = e;
    }
    return out;
}

ClusterReport cluster_certificates(const std::vector<CertificateRecord>& certs) {
    std::vector<CertificateRecord> corpus;
    std::set<std::string> seen;
    for (const auto& c : certs)
        if (seen.insert(c.fingerprint).second) corpus.push_back(c);

    std::vector<Document> docs;
    for (const auto& c : corpus) docs.push_back({c.fingerprint, c.subject});
    const auto res = dbscan(similarity_graph(vectorize(docs)));

    ClusterReport r;
    for (const auto& members : res.clusters) {
        std::vector<std::string> fps;
        for (auto i : members) fps.push_back(corpus[i].fingerprint);
        r.clusters.push_back(std::move(fps));
    }
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (res.labels[i] < 0) r.noise.push_back(corpus[i].fingerprint);
    r.per_parameter = entropy_analysis(corpus, res.labels);
    return r;
}

nlohmann::json to_json(const ClusterReport& r) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [p, e] : r.per_parameter)
        params[std::string(to_string(p))] = {{"global_entropy_bits", e.global_entropy},
                                             {"global_normalized", e.global_normalized},
                                             {"weighted_cluster_entropy", e.weighted_cluster_entropy}};
    return {{"clusters", r.clusters},
            {"noise", r.noise},
            {"per_parameter", params},
            {"method",
             {{"ngrams", "char 1-3"},
              {"idf", "ln(N/df)+1, l2-normalized"},
              {"top_k", 500},
              {"threshold", 0.5},
              {"truncation", "per row, then symmetrized by union"},
              {"eps", 0.8},
              {"min_points", 3}}},
            {"manual_review_required", !r.clusters.empty()}};
}

}  // namespace iiot
