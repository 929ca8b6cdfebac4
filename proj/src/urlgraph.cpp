#include "u2g/urlgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "u2g/error.hpp"

namespace u2g {

void GlobalGraph::rebuild_indexes() {
    node_index.clear();
    edge_index.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) node_index[nodes[i].vocab_id] = i;
    for (const auto& e : edges) edge_index[CooccurrenceStats::pack(e.a, e.b)] = e.weight;
}

CooccurrenceStats count_cooccurrences(const std::vector<std::vector<int>>& token_seqs) {
    CooccurrenceStats stats;
    std::vector<int> distinct;
    for (const auto& seq : token_seqs) {
        ++stats.n_docs;
        distinct.clear();
        distinct.assign(seq.begin(), seq.end());
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        // presence semantics: PAD/UNK excluded, repeats counted once
        distinct.erase(std::remove_if(distinct.begin(), distinct.end(),
                                      [](int id) { return id <= 1; }),
                       distinct.end());
        for (std::size_t i = 0; i < distinct.size(); ++i) {
            ++stats.token_count[distinct[i]];
            for (std::size_t j = i + 1; j < distinct.size(); ++j)
                ++stats.pair_count[CooccurrenceStats::pack(distinct[i], distinct[j])];
        }
    }
    return stats;
}

void merge_stats(CooccurrenceStats& into, const CooccurrenceStats& from) {
    into.n_docs += from.n_docs;
    for (const auto& [k, v] : from.token_count) into.token_count[k] += v;
    for (const auto& [k, v] : from.pair_count) into.pair_count[k] += v;
}

std::optional<double> npmi(const CooccurrenceStats& stats, int a, int b,
                           std::int64_t min_pair_count) {
    if (a == b) throw SpecError("npmi: a and b must differ");
    std::int64_t joint = stats.pairs(a, b);
    if (joint == 0 || joint < min_pair_count) return std::nullopt;
    double n = static_cast<double>(stats.n_docs);
    double p_ab = static_cast<double>(joint) / n;
    double p_a = static_cast<double>(stats.count(a)) / n;
    double p_b = static_cast<double>(stats.count(b)) / n;
    if (p_ab >= 1.0) return 0.0;  // -log p(a,b) vanishes
    return std::log(p_ab / (p_a * p_b)) / (-std::log(p_ab));
}

GlobalGraph build_global_graph(const CooccurrenceStats& stats, double theta,
                               Granularity granularity,
                               const std::vector<std::string>& surfaces,
                               std::int64_t min_pair_count) {
    GlobalGraph g;
    g.granularity = granularity;
    g.theta = theta;

    std::vector<int> ids;
    ids.reserve(stats.token_count.size());
    for (const auto& [id, count] : stats.token_count)
        if (count > 0) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (int id : ids) {
        std::string surface =
            static_cast<std::size_t>(id) < surfaces.size() ? surfaces[static_cast<std::size_t>(id)] : "";
        g.nodes.push_back({id, surface});
    }

    std::vector<std::uint64_t> keys;
    keys.reserve(stats.pair_count.size());
    for (const auto& [key, count] : stats.pair_count) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    for (std::uint64_t key : keys) {
        int a = static_cast<int>(key >> 32);
        int b = static_cast<int>(key & 0xffffffffu);
        auto score = npmi(stats, a, b, min_pair_count);
        if (score && *score > theta) g.edges.push_back({a, b, *score});
    }
    g.rebuild_indexes();
    return g;
}

Subgraph induce_subgraph(const GlobalGraph& global, const std::vector<int>& seq,
                         int source_url_id) {
    Subgraph sub;
    sub.source_url_id = source_url_id;
    std::unordered_map<int, int> local;  // vocab id -> local index
    for (int id : seq) {
        if (id <= 1) continue;  // PAD/UNK excluded
        if (!global.has_node(id) || local.count(id)) continue;
        local[id] = static_cast<int>(sub.nodes.size());
        sub.nodes.push_back({id, global.nodes[global.node_index.at(id)].surface});
    }
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < sub.nodes.size(); ++j) {
            if (global.edge_weight(sub.nodes[i].vocab_id, sub.nodes[j].vocab_id))
                sub.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return sub;
}

BatchedGraph batch_subgraphs(const std::vector<Subgraph>& subs) {
    if (subs.empty()) throw SpecError("batch_subgraphs: at least one subgraph required");
    BatchedGraph batch;
    int offset = 0;
    int seg = 0;
    for (const auto& sub : subs) {
        for (const auto& n : sub.nodes) {
            batch.nodes.push_back(n);
            batch.segment.push_back(seg);
        }
        for (const auto& [a, b] : sub.edges)
            batch.edges.emplace_back(a + offset, b + offset);
        batch.segment_node_counts.push_back(static_cast<int>(sub.nodes.size()));
        offset += static_cast<int>(sub.nodes.size());
        ++seg;
    }
    return batch;
}

void save_graph(const GlobalGraph& graph, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write graph file: " + path);
    out << "#url2graph-graph v1 granularity="
        << (graph.granularity == Granularity::kWord ? "word" : "char")
        << " theta=" << graph.theta << " nodes=" << graph.nodes.size()
        << " edges=" << graph.edges.size() << '\n';
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        out << "N\t" << i << '\t' << graph.nodes[i].vocab_id << '\t'
            << graph.nodes[i].surface << '\n';
    }
    out << std::setprecision(9);
    for (const auto& e : graph.edges)
        out << "E\t" << e.a << '\t' << e.b << '\t' << e.weight << '\n';
}

GlobalGraph load_graph(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open graph file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#url2graph-graph v1", 0) != 0)
        throw FormatError("bad graph header in: " + path);

    GlobalGraph g;
    {
        std::istringstream hs(line);
        std::string field;
        while (hs >> field) {
            if (field.rfind("granularity=", 0) == 0)
                g.granularity = field.substr(12) == "char" ? Granularity::kChar
                                                           : Granularity::kWord;
            else if (field.rfind("theta=", 0) == 0)
                g.theta = std::stod(field.substr(6));
        }
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        std::getline(ls, tag, '\t');
        if (tag == "N") {
            std::string local, vocab, surface;
            std::getline(ls, local, '\t');
            std::getline(ls, vocab, '\t');
            std::getline(ls, surface);
            g.nodes.push_back({std::stoi(vocab), surface});
        } else if (tag == "E") {
            std::string a, b, w;
            std::getline(ls, a, '\t');
            std::getline(ls, b, '\t');
            std::getline(ls, w);
            g.edges.push_back({std::stoi(a), std::stoi(b), std::stod(w)});
        } else {
            throw FormatError("bad graph line: " + line);
        }
    }
    g.rebuild_indexes();
    return g;
}

}  // namespace u2g
