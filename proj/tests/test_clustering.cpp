#include <gtest/gtest.h>

#include <cstdio>
#include <random>

#include "iiot/clustering.hpp"
#include "cases.hpp"
#include "oracles.hpp"

using namespace iiot;

namespace {

using cases::synthetic_corpus;
using cases::reference_labels;

}  // namespace

TEST(Vectorize, CosineMatchesDenseReference) {
    const auto c = synthetic_corpus();
    const auto v = vectorize(c.docs);
    std::vector<std::string> subjects;
    for (const auto& d : c.docs) subjects.push_back(d.subject);
    const auto m = oracle::dense_tfidf(subjects);
    for (std::size_t i = 0; i < v.size(); i += 7)
        for (std::size_t j = 0; j < v.size(); j += 3)
            ASSERT_NEAR(cosine(v[i], v[j]), oracle::dense_cosine(m[i], m[j]), 1e-12) << i << "," << j;
    for (const auto& x : v) EXPECT_NEAR(cosine(x, x), 1.0, 1e-12);
}

TEST(Vectorize, PermutationEquivariant) {
    auto c = synthetic_corpus();
    const auto v = vectorize(c.docs);
    std::vector<Document> rev(c.docs.rbegin(), c.docs.rend());
    const auto w = vectorize(rev);
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; i += 5)
        for (std::size_t j = 0; j < n; j += 11)
            ASSERT_NEAR(cosine(v[i], v[j]), cosine(w[n - 1 - i], w[n - 1 - j]), 1e-12);
}

TEST(Dbscan, MatchesBruteForceReference) {
    const auto c = synthetic_corpus();
    const auto res = dbscan(similarity_graph(vectorize(c.docs)));
    EXPECT_EQ(res.labels, reference_labels(c.docs));
}

TEST(Dbscan, MatchesReferenceAcrossParameters) {
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto c = synthetic_corpus(seed);
        for (double eps : {0.3, 0.5, 0.8})
            for (std::size_t min_pts : {2u, 3u, 5u}) {
                const auto res = dbscan(similarity_graph(vectorize(c.docs), 500, 0.5), eps, min_pts);
                ASSERT_EQ(res.labels, reference_labels(c.docs, 0.5, eps, min_pts))
                    << "seed " << seed << " eps " << eps << " minPts " << min_pts;
            }
    }
}

TEST(Dbscan, RecoversTemplatesWithoutContamination) {
    const auto c = synthetic_corpus();
    const auto res = dbscan(similarity_graph(vectorize(c.docs)));
    ASSERT_EQ(res.clusters.size(), 4u);
    std::set<int> seen;
    for (const auto& cl : res.clusters) {
        const int t = c.template_of[cl.front()];
        ASSERT_GE(t, 0);
        EXPECT_TRUE(seen.insert(t).second);
        EXPECT_EQ(cl.size(), 30u);
        for (auto i : cl) EXPECT_EQ(c.template_of[i], t) << c.docs[i].subject;
    }
    for (std::size_t i = 120; i < c.docs.size(); ++i) EXPECT_EQ(res.labels[i], -1) << c.docs[i].subject;
}

TEST(Dbscan, ClustersDisjointAndLargeEnough) {
    const auto c = synthetic_corpus(9);
    const auto res = dbscan(similarity_graph(vectorize(c.docs)));
    std::set<std::size_t> all;
    for (const auto& cl : res.clusters) {
        EXPECT_GE(cl.size(), 3u);
        for (auto i : cl) EXPECT_TRUE(all.insert(i).second);
    }
}

TEST(SimilarityGraph, TopKThenUnion) {
    const std::vector<Document> docs = {{"a", "CN=alpha-1"}, {"b", "CN=alpha-2"}, {"c", "CN=alpha-3"}, {"d", "zzzz"}};
    const auto g = similarity_graph(vectorize(docs), 1, 0.0);
    // Every row keeps its single best partner; union may add more back.
    for (std::size_t i = 0; i < g.rows.size(); ++i) {
        EXPECT_FALSE(g.rows[i].empty());
        for (const auto& [j, s] : g.rows[i]) {
            EXPECT_NE(i, j);
            const auto& back = g.rows[j];
            EXPECT_TRUE(std::ranges::any_of(back, [&](auto& e) { return e.first == i; }));
        }
    }
}

// ------------------------------------------------------------ entropy

TEST(Entropy, HandComputedTable) {
    struct Row {
        std::vector<std::string> values;
        double bits;
        double normalized;
    };
    const std::vector<Row> table = {
        {{"a"}, 0.0, 0.0},
        {{"a", "a", "a", "a"}, 0.0, 0.0},
        {{"a", "b"}, 1.0, 1.0},
        {{"a", "a", "b", "b"}, 1.0, 0.5},
        {{"a", "b", "c", "d"}, 2.0, 1.0},
        {{"a", "a", "a", "b"}, 0.8112781244591328, 0.4056390622295664},
        {{"a", "b", "c"}, 1.5849625007211562, 1.0},
        {{"x", "x", "y", "z"}, 1.5, 0.75},
        {{"1", "1", "1", "1", "1", "1", "1", "2"}, 0.5435644431995964, 0.18118814773319880},
    };
    for (const auto& r : table) {
        EXPECT_NEAR(shannon_entropy(r.values), r.bits, 1e-9);
        EXPECT_NEAR(shannon_entropy(r.values), oracle::entropy_bits(r.values), 1e-12);
        EXPECT_NEAR(normalized_entropy(r.values), r.normalized, 1e-9);
    }
}

TEST(Entropy, NormalizedStaysInUnitInterval) {
    std::mt19937 rng(31);
    for (int i = 0; i < 500; ++i) {
        std::vector<std::string> v(1 + rng() % 50);
        const unsigned k = 1 + rng() % 10;
        for (auto& s : v) s = std::to_string(rng() % k);
        const double h = normalized_entropy(v);
        ASSERT_GE(h, 0.0);
        ASSERT_LE(h, 1.0 + 1e-12);
    }
}

TEST(Entropy, ClusterWeighting) {
    // Two clusters of sizes 2 and 4 plus one noise certificate.
    std::vector<CertificateRecord> corpus(7);
    const std::vector<std::string> issuers = {"A", "A", "B", "B", "C", "D", "Z"};
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        corpus[i].fingerprint = std::to_string(i);
        corpus[i].issuer = issuers[i];
    }
    const std::vector<int> labels = {0, 0, 1, 1, 1, 1, -1};
    const auto e = entropy_analysis(corpus, labels).at(CertParameter::issuer);
    // Cluster 0 is uniform: 0. Cluster 1 {B,B,C,D}: 1.5 bits / log2(4) = 0.75.
    EXPECT_NEAR(e.weighted_cluster_entropy, 4.0 / 6.0 * 0.75, 1e-12);
    EXPECT_NEAR(e.global_entropy, oracle::entropy_bits(issuers), 1e-12);
    EXPECT_NEAR(e.global_normalized, oracle::entropy_bits(issuers) / std::log2(7.0), 1e-12);
    EXPECT_THROW(entropy_analysis(corpus, {0}), AuditError);
}

TEST(ClusterReport, EndToEndOverCertificates) {
    const auto c = synthetic_corpus();
    std::vector<CertificateRecord> certs;
    for (const auto& d : c.docs) {
        CertificateRecord r;
        r.fingerprint = d.fingerprint;
        r.subject = d.subject;
        certs.push_back(r);
    }
    certs.push_back(certs.front());  // duplicate fingerprint collapses
    const auto report = cluster_certificates(certs);
    EXPECT_EQ(report.clusters.size(), 4u);
    EXPECT_EQ(report.noise.size(), 20u);
    const auto j = to_json(report);
    EXPECT_TRUE(j["manual_review_required"].get<bool>());
    EXPECT_EQ(j["method"]["idf"], "ln(N/df)+1, l2-normalized");
}
