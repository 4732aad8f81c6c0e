#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "iiot/x509.hpp"

// Certificate-template detection: TF-IDF over character n-grams of subject
// names, a thresholded top-k cosine similarity graph and DBSCAN on it.

namespace iiot {

/// Sparse L2-normalized TF-IDF vector; entries sorted by term id.
struct SubjectVector {
    std::string fingerprint;
    std::vector<std::pair<std::uint32_t, double>> weights;
};

struct Document {
    std::string fingerprint;
    std::string subject;
};

struct VectorizerOptions {
    std::size_t min_n = 1;
    std::size_t max_n = 3;
};

/// TF is the raw count, IDF is ln(N / df) + 1.
std::vector<SubjectVector> vectorize(const std::vector<Document>& docs, const VectorizerOptions& opt = {});
double cosine(const SubjectVector& a, const SubjectVector& b);

/// Symmetric sparse similarity graph. Row i lists (j, similarity), j != i,
/// sorted by j.
struct SimilarityGraph {
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;
};

/// Keeps per row the `top_k` most similar documents with similarity at or
/// above `threshold`, then symmetrizes by union.
SimilarityGraph similarity_graph(const std::vector<SubjectVector>& vectors, std::size_t top_k = 500,
                                 double threshold = 0.5);

struct DbscanResult {
    std::vector<int> labels;  ///< cluster index per point, -1 for noise
    std::vector<std::vector<std::size_t>> clusters;
};

/// DBSCAN over cosine distance (1 - similarity); a point's neighborhood
/// counts the point itself. Points are visited in index order.
DbscanResult dbscan(const SimilarityGraph& graph, double eps = 0.8, std::size_t min_points = 3);

enum class CertParameter : std::uint8_t { key, signature_algorithm, lifetime_days, not_before_date, key_usage, issuer };
inline constexpr std::array<CertParameter, 6> kCertParameters = {
    CertParameter::key,           CertParameter::signature_algorithm, CertParameter::lifetime_days,
    CertParameter::not_before_date, CertParameter::key_usage,         CertParameter::issuer};
std::string_view to_string(CertParameter p);
std::string parameter_value(const CertificateRecord& c, CertParameter p);

/// Shannon entropy in bits of a value multiset.
double shannon_entropy(const std::vector<std::string>& values);
/// Entropy divided by log2(n); 0 when n <= 1 or entropy is 0.
double normalized_entropy(const std::vector<std::string>& values);

struct ParameterEntropy {
    double global_entropy = 0;             ///< bits, whole corpus
    double global_normalized = 0;          ///< global / log2(corpus size)
    double weighted_cluster_entropy = 0;   ///< size-weighted mean of normalized cluster entropies
};

std::map<CertParameter, ParameterEntropy> entropy_analysis(const std::vector<CertificateRecord>& corpus,
                                                          const std::vector<int>& labels);

struct ClusterReport {
    std::vector<std::vector<std::string>> clusters;  ///< fingerprints
    std::vector<std::string> noise;
    std::map<CertParameter, ParameterEntropy> per_parameter;
};

/// Full analysis over parsed certificates (duplicates by fingerprint are
/// collapsed first).
ClusterReport cluster_certificates(const std::vector<CertificateRecord>& certs);
nlohmann::json to_json(const ClusterReport& r);

}  // namespace iiot
