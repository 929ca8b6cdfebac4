#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "u2g/error.hpp"
#include "u2g/urlgraph.hpp"

using namespace u2g;

namespace {

// Brute-force document-presence counter used as an oracle.
struct Oracle {
    std::map<int, std::int64_t> token;
    std::map<std::pair<int, int>, std::int64_t> pair;
    std::int64_t docs = 0;

    explicit Oracle(const std::vector<std::vector<int>>& seqs) {
        docs = static_cast<std::int64_t>(seqs.size());
        for (const auto& seq : seqs) {
            std::set<int> present;
            for (int id : seq)
                if (id > 1) present.insert(id);
            for (int a : present) ++token[a];
            for (int a : present)
                for (int b : present)
                    if (a < b) ++pair[{a, b}];
        }
    }

    std::optional<double> npmi(int a, int b, std::int64_t min_pair) const {
        if (a > b) std::swap(a, b);
        auto it = pair.find({a, b});
        if (it == pair.end() || it->second < min_pair) return std::nullopt;
        double pab = static_cast<double>(it->second) / static_cast<double>(docs);
        if (pab >= 1.0) return 0.0;
        double pa = static_cast<double>(token.at(a)) / static_cast<double>(docs);
        double pb = static_cast<double>(token.at(b)) / static_cast<double>(docs);
        return std::log(pab / (pa * pb)) / (-std::log(pab));
    }
};

std::vector<std::vector<int>> random_corpus(std::mt19937_64& rng, int max_docs,
                                            int max_vocab) {
    auto docs = 1 + rng() % static_cast<std::uint64_t>(max_docs);
    std::vector<std::vector<int>> seqs(docs);
    for (auto& seq : seqs) {
        auto len = 1 + rng() % 12;
        for (std::size_t i = 0; i < len; ++i)
            seq.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(max_vocab)));
    }
    return seqs;
}

std::vector<std::string> numbered_surfaces(int n) {
    std::vector<std::string> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = "t" + std::to_string(i);
    return s;
}

}  // namespace

TEST_CASE("count_cooccurrences direct enumeration") {
    // ids: a=2, b=3, c=4
    CooccurrenceStats st = count_cooccurrences({{2, 3}, {2, 3}, {2, 4}});
    CHECK(st.n_docs == 3);
    CHECK(st.count(2) == 3);
    CHECK(st.count(3) == 2);
    CHECK(st.count(4) == 1);
    CHECK(st.pairs(2, 3) == 2);
    CHECK(st.pairs(3, 4) == 0);
}

TEST_CASE("count_cooccurrences uses presence, not multiplicity") {
    CooccurrenceStats st = count_cooccurrences({{2, 2, 3}});
    CHECK(st.count(2) == 1);
    CHECK(st.pairs(2, 3) == 1);
}

TEST_CASE("count_cooccurrences excludes PAD and UNK") {
    CooccurrenceStats st = count_cooccurrences({{0, 1, 2}, {1, 1, 1}});
    CHECK(st.count(0) == 0);
    CHECK(st.count(1) == 0);
    CHECK(st.count(2) == 1);
    CHECK(st.pairs(1, 2) == 0);
}

TEST_CASE("count_cooccurrences matches nested-loop oracle on random corpora") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        auto seqs = random_corpus(rng, 40, 15);
        CooccurrenceStats st = count_cooccurrences(seqs);
        Oracle oracle(seqs);
        CHECK(st.n_docs == oracle.docs);
        for (int a = 2; a < 15; ++a) {
            auto it = oracle.token.find(a);
            CHECK(st.count(a) == (it == oracle.token.end() ? 0 : it->second));
            for (int b = a + 1; b < 15; ++b) {
                auto pit = oracle.pair.find({a, b});
                CHECK(st.pairs(a, b) == (pit == oracle.pair.end() ? 0 : pit->second));
            }
        }
    }
}

TEST_CASE("merge_stats equals counting the concatenated corpus") {
    std::mt19937_64 rng(23);
    auto s1 = random_corpus(rng, 20, 10);
    auto s2 = random_corpus(rng, 20, 10);
    CooccurrenceStats a = count_cooccurrences(s1);
    CooccurrenceStats b = count_cooccurrences(s2);
    merge_stats(a, b);
    auto all = s1;
    all.insert(all.end(), s2.begin(), s2.end());
    CooccurrenceStats whole = count_cooccurrences(all);
    CHECK(a.n_docs == whole.n_docs);
    for (int x = 2; x < 10; ++x) {
        CHECK(a.count(x) == whole.count(x));
        for (int y = x + 1; y < 10; ++y) CHECK(a.pairs(x, y) == whole.pairs(x, y));
    }
}

TEST_CASE("npmi limits: perfect association and independence") {
    // tokens 2 and 3 always co-occur, in half the documents
    CooccurrenceStats assoc = count_cooccurrences({{2, 3}, {2, 3}, {4}, {4}});
    CHECK(*npmi(assoc, 2, 3) == doctest::Approx(1.0).epsilon(1e-12));

    // p(a,b) = p(a)p(b): a in docs {1,2}, b in docs {1,3}, both in doc 1, N=4
    CooccurrenceStats indep = count_cooccurrences({{2, 3}, {2}, {3}, {4}});
    CHECK(*npmi(indep, 2, 3) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("npmi hand value on the four-document corpus") {
    CooccurrenceStats st = count_cooccurrences({{2, 3}, {2, 3}, {2, 4}, {5}});
    double expected = std::log(4.0 / 3.0) / std::log(2.0);
    CHECK(*npmi(st, 2, 3) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.415).epsilon(1e-3));
}

TEST_CASE("npmi contract: symmetry, absence, self-pair, degenerate joint") {
    CooccurrenceStats st = count_cooccurrences({{2, 3}, {2, 4}, {3, 4}});
    CHECK(*npmi(st, 2, 3) == *npmi(st, 3, 2));
    CHECK_FALSE(npmi(st, 2, 5).has_value());
    CHECK_FALSE(npmi(st, 2, 3, /*min_pair_count=*/2).has_value());
    CHECK_THROWS_AS(npmi(st, 2, 2), SpecError);

    CooccurrenceStats always = count_cooccurrences({{2, 3}, {2, 3}});
    CHECK(*npmi(always, 2, 3) == 0.0);  // p(a,b) = 1
}

TEST_CASE("npmi stays within [-1, 1] and matches oracle on random corpora") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        auto seqs = random_corpus(rng, 50, 20);
        CooccurrenceStats st = count_cooccurrences(seqs);
        Oracle oracle(seqs);
        for (int a = 2; a < 20; ++a)
            for (int b = a + 1; b < 20; ++b) {
                auto got = npmi(st, a, b);
                auto want = oracle.npmi(a, b, 1);
                CHECK(got.has_value() == want.has_value());
                if (got) {
                    CHECK(*got >= -1.0 - 1e-12);
                    CHECK(*got <= 1.0 + 1e-12);
                    CHECK(*got == doctest::Approx(*want).epsilon(1e-12));
                }
            }
    }
}

TEST_CASE("build_global_graph threshold semantics") {
    CooccurrenceStats st = count_cooccurrences({{2, 3}, {2, 3}, {2, 4}, {5}});
    auto surfaces = numbered_surfaces(6);

    GlobalGraph g = build_global_graph(st, 0.2, Granularity::kWord, surfaces, 1);
    CHECK(g.theta == 0.2);
    CHECK(g.edge_weight(2, 3).has_value());  // 0.415 > 0.2
    // (2,4): log(4/3)/log(4) ~ 0.2075, just above the threshold
    CHECK(*g.edge_weight(2, 4) ==
          doctest::Approx(std::log(4.0 / 3.0) / std::log(4.0)).epsilon(1e-12));
    GlobalGraph g25 = build_global_graph(st, 0.25, Granularity::kWord, surfaces, 1);
    CHECK_FALSE(g25.edge_weight(2, 4).has_value());
    CHECK(g25.edge_weight(2, 3).has_value());

    // near-1 threshold keeps only perfectly associated pairs
    GlobalGraph tight = build_global_graph(st, 1.0 - 1e-9, Granularity::kWord,
                                           surfaces, 1);
    CHECK(tight.edges.empty());

    // nodes = every id with count > 0
    std::set<int> ids;
    for (const auto& n : g.nodes) ids.insert(n.vocab_id);
    CHECK(ids == std::set<int>{2, 3, 4, 5});
}

TEST_CASE("raising theta never adds an edge") {
    std::mt19937_64 rng(41);
    auto seqs = random_corpus(rng, 50, 12);
    CooccurrenceStats st = count_cooccurrences(seqs);
    auto surfaces = numbered_surfaces(12);
    GlobalGraph lo = build_global_graph(st, -0.5, Granularity::kWord, surfaces, 1);
    GlobalGraph hi = build_global_graph(st, 0.3, Granularity::kWord, surfaces, 1);
    for (const auto& e : hi.edges) {
        CHECK(lo.edge_weight(e.a, e.b).has_value());
        CHECK(e.weight > 0.3);
    }
    CHECK(hi.edges.size() <= lo.edges.size());
}

TEST_CASE("graph edges match all-pairs oracle; build is corpus-order invariant") {
    std::mt19937_64 rng(53);
    auto seqs = random_corpus(rng, 50, 14);
    CooccurrenceStats st = count_cooccurrences(seqs);
    auto surfaces = numbered_surfaces(14);
    GlobalGraph g = build_global_graph(st, 0.1, Granularity::kWord, surfaces, 1);
    Oracle oracle(seqs);
    for (int a = 2; a < 14; ++a)
        for (int b = a + 1; b < 14; ++b) {
            auto w = oracle.npmi(a, b, 1);
            bool expect = w.has_value() && *w > 0.1;
            CHECK(g.edge_weight(a, b).has_value() == expect);
        }

    auto shuffled = seqs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    GlobalGraph g2 = build_global_graph(count_cooccurrences(shuffled), 0.1,
                                        Granularity::kWord, surfaces, 1);
    REQUIRE(g2.edges.size() == g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        CHECK(g2.edges[i].a == g.edges[i].a);
        CHECK(g2.edges[i].b == g.edges[i].b);
        CHECK(g2.edges[i].weight == g.edges[i].weight);
    }
}

TEST_CASE("induce_subgraph restriction semantics") {
    CooccurrenceStats st = count_cooccurrences({{2, 3}, {2, 3}, {4, 5}});
    auto surfaces = numbered_surfaces(6);
    GlobalGraph g = build_global_graph(st, 0.0, Granularity::kWord, surfaces, 1);

    Subgraph sub = induce_subgraph(g, {4, 2, 3, 4});
    REQUIRE(sub.nodes.size() == 3);
    CHECK(sub.nodes[0].vocab_id == 4);  // first-occurrence order
    CHECK(sub.nodes[1].vocab_id == 2);
    CHECK(sub.nodes[2].vocab_id == 3);
    REQUIRE(sub.edges.size() == 1);     // only (2,3) survives restriction
    CHECK(sub.edges[0] == std::pair<int, int>{1, 2});

    CHECK(induce_subgraph(g, {1, 1, 0}).nodes.empty());
    CHECK(induce_subgraph(g, {1, 1, 0}).edges.empty());
}

TEST_CASE("induce_subgraph matches brute-force filter on random instances") {
    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 1000; ++trial) {
        auto seqs = random_corpus(rng, 25, 12);
        CooccurrenceStats st = count_cooccurrences(seqs);
        GlobalGraph g = build_global_graph(st, -0.2, Granularity::kWord,
                                           numbered_surfaces(12), 1);
        std::vector<int> seq;
        auto len = 1 + rng() % 10;
        for (std::size_t i = 0; i < len; ++i)
            seq.push_back(static_cast<int>(rng() % 12));
        Subgraph sub = induce_subgraph(g, seq);

        std::set<int> nodes;
        for (int id : seq)
            if (id > 1 && g.has_node(id)) nodes.insert(id);
        CHECK(sub.nodes.size() == nodes.size());

        std::set<std::pair<int, int>> expect;
        for (const auto& e : g.edges)
            if (nodes.count(e.a) && nodes.count(e.b))
                expect.insert({std::min(e.a, e.b), std::max(e.a, e.b)});
        std::set<std::pair<int, int>> got;
        for (auto [i, j] : sub.edges) {
            int a = sub.nodes[static_cast<std::size_t>(i)].vocab_id;
            int b = sub.nodes[static_cast<std::size_t>(j)].vocab_id;
            got.insert({std::min(a, b), std::max(a, b)});
        }
        CHECK(got == expect);
    }
}

TEST_CASE("batch_subgraphs offsets and segments") {
    Subgraph s1;
    s1.nodes = {{2, "a"}, {3, "b"}, {4, "c"}};
    s1.edges = {{0, 1}};
    Subgraph s2;
    s2.nodes = {{5, "d"}, {6, "e"}};
    s2.edges = {{0, 1}};

    BatchedGraph batch = batch_subgraphs({s1, s2});
    CHECK(batch.nodes.size() == 5);
    CHECK(batch.segment == std::vector<int>{0, 0, 0, 1, 1});
    REQUIRE(batch.edges.size() == 2);
    CHECK(batch.edges[1] == std::pair<int, int>{3, 4});
    CHECK(batch.segment_node_counts == std::vector<int>{3, 2});
    CHECK(batch.num_segments() == 2);

    BatchedGraph one = batch_subgraphs({s1});
    CHECK(one.nodes.size() == 3);
    CHECK(one.edges == s1.edges);

    Subgraph empty;
    BatchedGraph with_empty = batch_subgraphs({s1, empty, s2});
    CHECK(with_empty.num_segments() == 3);
    CHECK(with_empty.segment_node_counts == std::vector<int>{3, 0, 2});
    CHECK(with_empty.edges[1] == std::pair<int, int>{3, 4});
}

TEST_CASE("graph file round-trip preserves structure") {
    CooccurrenceStats st = count_cooccurrences({{2, 3}, {2, 3}, {2, 4}, {3, 4}});
    GlobalGraph g = build_global_graph(st, 0.0, Granularity::kChar,
                                       numbered_surfaces(5), 1);
    save_graph(g, "graph_rt.txt");
    GlobalGraph back = load_graph("graph_rt.txt");
    CHECK(back.granularity == Granularity::kChar);
    CHECK(back.theta == g.theta);
    REQUIRE(back.nodes.size() == g.nodes.size());
    REQUIRE(back.edges.size() == g.edges.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        CHECK(back.nodes[i].vocab_id == g.nodes[i].vocab_id);
        CHECK(back.nodes[i].surface == g.nodes[i].surface);
    }
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        CHECK(back.edges[i].a == g.edges[i].a);
        CHECK(back.edges[i].b == g.edges[i].b);
        CHECK(back.edges[i].weight == doctest::Approx(g.edges[i].weight).epsilon(1e-8));
    }
    std::remove("graph_rt.txt");
}
