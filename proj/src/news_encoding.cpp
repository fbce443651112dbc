#include "finreport/news_encoding.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"

namespace finreport {

using Eigen::Index;
using Eigen::VectorXd;

NewsFeatureVector NewsFeatureVector::zeros(Index role_dim, Index edge_dim) {
    NewsFeatureVector v;
    v.roles = {VectorXd::Zero(role_dim), VectorXd::Zero(role_dim), VectorXd::Zero(role_dim)};
    v.edges = {VectorXd::Zero(edge_dim), VectorXd::Zero(edge_dim), VectorXd::Zero(edge_dim)};
    return v;
}

NewsFeatureVector NewsFeatureVector::from_flat(const VectorXd& flat, Index role_dim, Index edge_dim) {
    if (flat.size() != 3 * role_dim + 3 * edge_dim)
        throw ValidationError("flattened news vector has length " + std::to_string(flat.size()) +
                              ", expected " + std::to_string(3 * role_dim + 3 * edge_dim));
    NewsFeatureVector v;
    Index at = 0;
    auto take = [&](Index n) {
        VectorXd out = flat.segment(at, n);
        at += n;
        return out;
    };
    v.roles.verb = take(role_dim);
    v.roles.agent = take(role_dim);
    v.roles.patient = take(role_dim);
    v.edges.verb_agent = take(edge_dim);
    v.edges.verb_patient = take(edge_dim);
    v.edges.agent_patient = take(edge_dim);
    return v;
}

VectorXd NewsFeatureVector::flatten() const {
    VectorXd out(flat_size());
    out << roles.verb, roles.agent, roles.patient, edges.verb_agent, edges.verb_patient,
        edges.agent_patient;
    return out;
}

void NewsFeatureVector::validate() const {
    if (roles.agent.size() != roles.dim() || roles.patient.size() != roles.dim())
        throw ValidationError("role embeddings differ in dimension");
    if (edges.verb_patient.size() != edges.dim() || edges.agent_patient.size() != edges.dim())
        throw ValidationError("edge features differ in dimension");
    if (!flatten().allFinite()) throw ValidationError("news feature vector has non-finite entries");
}

bool operator==(const NewsFeatureVector& a, const NewsFeatureVector& b) {
    return a.role_dim() == b.role_dim() && a.edge_dim() == b.edge_dim() &&
           a.flatten() == b.flatten();
}

namespace {

using Slots = std::array<VectorXd, 3>;

Slots pool_slots(const std::vector<std::array<const VectorXd*, 3>>& frames, const char* what) {
    if (frames.empty()) throw ValidationError(std::string("no ") + what + " frames");
    const Index dim = frames.front()[0]->size();
    Slots out{VectorXd::Zero(dim), VectorXd::Zero(dim), VectorXd::Zero(dim)};
    for (std::size_t i = 0; i < frames.size(); ++i) {
        for (std::size_t s = 0; s < 3; ++s) {
            if (frames[i][s]->size() != dim)
                throw ValidationError(std::string(what) + " frame " + std::to_string(i) +
                                      " has dimension " + std::to_string(frames[i][s]->size()) +
                                      ", expected " + std::to_string(dim));
            out[s] += *frames[i][s];
        }
    }
    for (auto& slot : out) slot /= static_cast<double>(frames.size());
    return out;
}

}  // namespace

RoleEmbeddings pool_roles(std::span<const RoleEmbeddings> frames) {
    std::vector<std::array<const VectorXd*, 3>> slots;
    for (const auto& f : frames) slots.push_back({&f.verb, &f.agent, &f.patient});
    auto [verb, agent, patient] = pool_slots(slots, "SRL");
    return {std::move(verb), std::move(agent), std::move(patient)};
}

EdgeFeatures pool_edges(std::span<const EdgeFeatures> frames) {
    std::vector<std::array<const VectorXd*, 3>> slots;
    for (const auto& f : frames) slots.push_back({&f.verb_agent, &f.verb_patient, &f.agent_patient});
    auto [va, vp, ap] = pool_slots(slots, "edge");
    return {std::move(va), std::move(vp), std::move(ap)};
}

NewsFeatureVector pool_news(std::span<const NewsFeatureVector> items) {
    std::vector<RoleEmbeddings> roles;
    std::vector<EdgeFeatures> edges;
    for (const auto& item : items) {
        roles.push_back(item.roles);
        edges.push_back(item.edges);
    }
    return {pool_roles(roles), pool_edges(edges)};
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (u >= 0x80 || std::isalnum(u)) {
            current.push_back(static_cast<char>(u < 0x80 ? std::tolower(u) : u));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

VectorXd hashed_slot(const std::vector<std::string>& tokens, Index dim, std::uint64_t salt) {
    VectorXd v = VectorXd::Zero(dim);
    for (const auto& token : tokens) {
        const std::uint64_t h = mix(fnv1a(token) ^ salt);
        const auto bucket = static_cast<Index>(h % static_cast<std::uint64_t>(dim));
        v(bucket) += (h >> 63) ? 1.0 : -1.0;
    }
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    return v;
}

}  // namespace

NewsFeatureVector fallback_hash_encoder(std::string_view headline, Index role_dim, Index edge_dim,
                                        std::uint64_t seed) {
    if (role_dim <= 0 || edge_dim <= 0) throw ValidationError("encoder dimensions must be positive");
    const auto tokens = tokenize(headline);
    NewsFeatureVector out;
    std::array<VectorXd*, 6> slots{&out.roles.verb,        &out.roles.agent,
                                   &out.roles.patient,     &out.edges.verb_agent,
                                   &out.edges.verb_patient, &out.edges.agent_patient};
    for (std::size_t s = 0; s < slots.size(); ++s) {
        const Index dim = s < 3 ? role_dim : edge_dim;
        *slots[s] = hashed_slot(tokens, dim, mix(seed * 8 + s));
    }
    return out;
}

Eigen::MatrixXd build_news_matrix(std::span<const NewsFeatureVector> items, Index role_dim,
                                  Index edge_dim) {
    Eigen::MatrixXd x(3 * role_dim + 3 * edge_dim, static_cast<Index>(items.size()));
    for (std::size_t n = 0; n < items.size(); ++n) {
        const auto& item = items[n];
        if (item.role_dim() != role_dim || item.edge_dim() != edge_dim ||
            item.roles.agent.size() != role_dim || item.roles.patient.size() != role_dim ||
            item.edges.verb_patient.size() != edge_dim || item.edges.agent_patient.size() != edge_dim)
            throw ValidationError("news item " + std::to_string(n) + " has mismatched dimensions");
        x.col(static_cast<Index>(n)) = item.flatten();
    }
    return x;
}

namespace {

const std::array<const char*, 6> kSlotKeys{"e_v", "e_a0", "e_a1", "g_va0", "g_va1", "g_a0a1"};

VectorXd to_vector(const nlohmann::json& arr) {
    if (!arr.is_array()) throw ValidationError("expected array");
    VectorXd v(static_cast<Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) throw ValidationError("non-numeric embedding entry");
        v(static_cast<Index>(i)) = arr[i].get<double>();
    }
    return v;
}

}  // namespace

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open embeddings store " + path.string());
    EmbeddingStore store;
    std::string line;
    std::size_t line_no = 0;
    std::streamoff offset = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::streamoff record_offset = offset;
        offset += static_cast<std::streamoff>(line.size()) + 1;
        if (line.empty() || line == "\r") continue;
        try {
            const auto j = nlohmann::json::parse(line);
            NewsFeatureVector v;
            std::array<VectorXd*, 6> slots{&v.roles.verb,        &v.roles.agent,
                                           &v.roles.patient,     &v.edges.verb_agent,
                                           &v.edges.verb_patient, &v.edges.agent_patient};
            for (std::size_t s = 0; s < slots.size(); ++s) *slots[s] = to_vector(j.at(kSlotKeys[s]));
            v.validate();
            store[j.at("id").get<std::string>()] = std::move(v);
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line_no,
                             "corrupt embedding record at byte offset " +
                                 std::to_string(record_offset) + ": " + e.what());
        }
    }
    return store;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write embeddings store " + path.string());
    for (const auto& [id, v] : store) {
        nlohmann::json j;
        j["id"] = id;
        const std::array<const VectorXd*, 6> slots{&v.roles.verb,        &v.roles.agent,
                                                   &v.roles.patient,     &v.edges.verb_agent,
                                                   &v.edges.verb_patient, &v.edges.agent_patient};
        for (std::size_t s = 0; s < slots.size(); ++s)
            j[kSlotKeys[s]] = std::vector<double>(slots[s]->data(), slots[s]->data() + slots[s]->size());
        out << j.dump() << '\n';
    }
}

std::vector<std::string> missing_embedding_ids(const EmbeddingStore& store,
                                               std::span<const std::string> ids) {
    std::set<std::string> missing;
    for (const auto& id : ids)
        if (!id.empty() && !store.contains(id)) missing.insert(id);
    std::vector<std::string> out(missing.begin(), missing.end());
    if (!out.empty()) {
        constexpr std::size_t shown = 10;
        std::string list;
        for (std::size_t i = 0; i < std::min(shown, out.size()); ++i) list += (i ? ", " : "") + out[i];
        if (out.size() > shown) list += " and " + std::to_string(out.size() - shown) + " more";
        warn(std::to_string(out.size()) + " embedding ids missing from store: " + list);
    }
    return out;
}

}  // namespace finreport
