#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace u2g {

// Document-level co-occurrence statistics: a token or pair counts once
// per document it appears in. PAD (0) and UNK (1) are never counted.
struct CooccurrenceStats {
    std::unordered_map<int, std::int64_t> token_count;
    std::unordered_map<std::uint64_t, std::int64_t> pair_count;  // key packs (a<b)
    std::int64_t n_docs = 0;

    static std::uint64_t pack(int a, int b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b);
    }
    std::int64_t pairs(int a, int b) const {
        auto it = pair_count.find(pack(a, b));
        return it == pair_count.end() ? 0 : it->second;
    }
    std::int64_t count(int a) const {
        auto it = token_count.find(a);
        return it == token_count.end() ? 0 : it->second;
    }
};

enum class Granularity { kWord, kChar };

struct GlobalGraph {
    struct Node {
        int vocab_id;
        std::string surface;
    };
    struct Edge {
        int a, b;  // vocab ids, a < b
        double weight;
    };

    Granularity granularity = Granularity::kWord;
    double theta = 0.2;
    std::vector<Node> nodes;  // ascending vocab id
    std::vector<Edge> edges;  // ascending (a, b)

    std::unordered_map<int, std::size_t> node_index;       // vocab id -> nodes slot
    std::unordered_map<std::uint64_t, double> edge_index;  // packed pair -> weight

    bool has_node(int vocab_id) const { return node_index.count(vocab_id) > 0; }
    std::optional<double> edge_weight(int a, int b) const {
        auto it = edge_index.find(CooccurrenceStats::pack(a, b));
        if (it == edge_index.end()) return std::nullopt;
        return it->second;
    }
    void rebuild_indexes();
};

struct Subgraph {
    struct Node {
        int vocab_id;
        std::string surface;
    };
    std::vector<Node> nodes;                     // order of first occurrence
    std::vector<std::pair<int, int>> edges;      // local indices, i < j
    int source_url_id = -1;
};

struct BatchedGraph {
    std::vector<Subgraph::Node> nodes;       // concatenated node tables
    std::vector<int> segment;                // per node: which subgraph
    std::vector<std::pair<int, int>> edges;  // offset-shifted local indices
    std::vector<int> segment_node_counts;    // per subgraph

    int num_segments() const { return static_cast<int>(segment_node_counts.size()); }
};

CooccurrenceStats count_cooccurrences(const std::vector<std::vector<int>>& token_seqs);

// Merges shard statistics by addition (order-insensitive).
void merge_stats(CooccurrenceStats& into, const CooccurrenceStats& from);

// Eq-style normalized pointwise mutual information on document-level
// probabilities. Absent when the pair was never seen or is below
// min_pair_count; 0 when p(a,b) = 1 (degenerate denominator).
std::optional<double> npmi(const CooccurrenceStats& stats, int a, int b,
                           std::int64_t min_pair_count = 1);

// surfaces: vocab-id-indexed lookup used to label graph nodes.
GlobalGraph build_global_graph(const CooccurrenceStats& stats, double theta,
                               Granularity granularity,
                               const std::vector<std::string>& surfaces,
                               std::int64_t min_pair_count = 5);

Subgraph induce_subgraph(const GlobalGraph& global, const std::vector<int>& seq,
                         int source_url_id = -1);

BatchedGraph batch_subgraphs(const std::vector<Subgraph>& subs);

// Graph file: header line, `N`-prefixed node rows, `E`-prefixed edge rows.
void save_graph(const GlobalGraph& graph, const std::string& path);
GlobalGraph load_graph(const std::string& path);

}  // namespace u2g
