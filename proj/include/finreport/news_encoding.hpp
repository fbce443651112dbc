#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace finreport {

// Pooled word embeddings of the verb (V), proto-agent (A0) and proto-patient (A1).
struct RoleEmbeddings {
    Eigen::VectorXd verb;
    Eigen::VectorXd agent;
    Eigen::VectorXd patient;

    Eigen::Index dim() const { return verb.size(); }
};

// Dependency-graph edge features between the three roles.
struct EdgeFeatures {
    Eigen::VectorXd verb_agent;
    Eigen::VectorXd verb_patient;
    Eigen::VectorXd agent_patient;

    Eigen::Index dim() const { return verb_agent.size(); }
};

// One column of the news feature matrix.
struct NewsFeatureVector {
    RoleEmbeddings roles;
    EdgeFeatures edges;

    static NewsFeatureVector zeros(Eigen::Index role_dim, Eigen::Index edge_dim);

    // Inverse of flatten(); throws ValidationError on a length mismatch.
    static NewsFeatureVector from_flat(const Eigen::VectorXd& flat, Eigen::Index role_dim,
                                       Eigen::Index edge_dim);

    Eigen::Index role_dim() const { return roles.dim(); }
    Eigen::Index edge_dim() const { return edges.dim(); }
    Eigen::Index flat_size() const { return 3 * role_dim() + 3 * edge_dim(); }

    // Row-block order: e_V, e_A0, e_A1, G_VA0, G_VA1, G_A0A1.
    Eigen::VectorXd flatten() const;

    // Throws ValidationError when the slots disagree in size or hold non-finite values.
    void validate() const;

    friend bool operator==(const NewsFeatureVector& a, const NewsFeatureVector& b);
};

// Element-wise mean over the frames of one sentence, per role slot.
RoleEmbeddings pool_roles(std::span<const RoleEmbeddings> frames);

// Mean over several edge-feature sets (same contract as pool_roles).
EdgeFeatures pool_edges(std::span<const EdgeFeatures> frames);

// Mean of whole feature vectors; used when several news items share one (symbol, date).
NewsFeatureVector pool_news(std::span<const NewsFeatureVector> items);

// Deterministic hashed bag-of-tokens stand-in for the pretrained role/edge encoders.
// Each of the six slots hashes every token with its own salt into signed buckets,
// then the slot is L2-normalised. Empty or token-free headlines give all zeros.
NewsFeatureVector fallback_hash_encoder(std::string_view headline, Eigen::Index role_dim,
                                        Eigen::Index edge_dim, std::uint64_t seed);

// Lower-cased ASCII alphanumeric runs; bytes >= 0x80 count as token characters.
std::vector<std::string> tokenize(std::string_view text);

// Column n is items[n].flatten(). Shape (3*role_dim + 3*edge_dim) x N.
Eigen::MatrixXd build_news_matrix(std::span<const NewsFeatureVector> items, Eigen::Index role_dim,
                                  Eigen::Index edge_dim);

using EmbeddingStore = std::map<std::string, NewsFeatureVector>;

// JSON-lines: {"id","e_v","e_a0","e_a1","g_va0","g_va1","g_a0a1"}.
EmbeddingStore load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingStore& store);

// Ids not present in the store; emits one warning listing them when non-empty.
std::vector<std::string> missing_embedding_ids(const EmbeddingStore& store,
                                               std::span<const std::string> ids);

}  // namespace finreport
