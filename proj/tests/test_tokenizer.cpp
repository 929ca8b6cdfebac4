#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "u2g/error.hpp"
#include "u2g/tokenizer.hpp"

using namespace u2g;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Vocab with given extra surfaces on top of specials; frequencies of 1.
SubwordVocab toy_vocab(const std::vector<std::string>& extra) {
    SubwordVocab v;
    v.surfaces = {"<pad>", "<unk>"};
    v.frequencies = {0, 0};
    for (const auto& s : extra) {
        v.ids[s] = v.size();
        v.surfaces.push_back(s);
        v.frequencies.push_back(1);
        v.max_surface_len = std::max(v.max_surface_len, s.size());
    }
    return v;
}

}  // namespace

TEST_CASE("char alphabet is 96 symbols with fixed layout") {
    CHECK(CharAlphabet::kSize == 96);
    CHECK(CharAlphabet::to_id('!') == 2);
    CHECK(CharAlphabet::to_id('~') == 95);
    CHECK(CharAlphabet::to_id(' ') == CharAlphabet::kUnk);
    CHECK(CharAlphabet::to_id('\x7f') == CharAlphabet::kUnk);
    for (int c = 33; c <= 126; ++c)
        CHECK(CharAlphabet::surface(CharAlphabet::to_id(static_cast<char>(c))) ==
              static_cast<char>(c));
}

TEST_CASE("encode_chars on the g00gle.com homoglyph") {
    CharSeq seq = encode_chars("g00gle.com");
    REQUIRE(seq.ids.size() == 10);
    CHECK(seq.ids[1] == CharAlphabet::to_id('0'));
    CHECK(seq.ids[2] == CharAlphabet::to_id('0'));
    CHECK(seq.ids[1] == seq.ids[2]);
    for (int id : seq.ids) CHECK(id < 96);
}

TEST_CASE("encode_chars boundary and degenerate cases") {
    CharSeq sp = encode_chars("a b");
    REQUIRE(sp.ids.size() == 3);
    CHECK(sp.ids[1] == CharAlphabet::kUnk);

    CHECK(encode_chars("").ids == std::vector<int>{CharAlphabet::kUnk});

    TokenizerConfig cfg;
    cfg.max_char_len = 4;
    CHECK(encode_chars("abcdefgh", cfg).ids.size() == 4);
    CHECK(encode_chars("xy", cfg).ids.size() == 2);

    CHECK(encode_chars("g00gle.com").ids == encode_chars("g00gle.com").ids);
}

TEST_CASE("encode_subwords splits on delimiters, drops them") {
    SubwordVocab v = toy_vocab({"a", "b"});
    TokenSeq seq = encode_subwords("a.b", v);
    REQUIRE(seq.surfaces.size() == 2);
    CHECK(seq.surfaces[0] == "a");
    CHECK(seq.surfaces[1] == "b");
}

TEST_CASE("encode_subwords recovers path words") {
    SubwordVocab v = toy_vocab({"paypal", "com", "account", "verify"});
    TokenSeq seq = encode_subwords("paypal.com/account/verify", v);
    REQUIRE(seq.surfaces.size() == 4);
    CHECK(seq.surfaces == std::vector<std::string>{"paypal", "com", "account", "verify"});
}

TEST_CASE("encode_subwords empty input yields a single UNK") {
    SubwordVocab v = toy_vocab({"a"});
    TokenSeq seq = encode_subwords("", v);
    REQUIRE(seq.ids.size() == 1);
    CHECK(seq.ids[0] == SubwordVocab::kUnk);
    // all-delimiter input degenerates the same way
    CHECK(encode_subwords("///...", v).ids == std::vector<int>{SubwordVocab::kUnk});
}

TEST_CASE("encode_subwords marks continuations and truncates") {
    SubwordVocab v = toy_vocab({"log", "in"});
    TokenSeq seq = encode_subwords("login", v);
    REQUIRE(seq.surfaces.size() == 2);
    CHECK(seq.surfaces[0] == "log");
    CHECK(seq.surfaces[1] == "##in");

    TokenizerConfig cfg;
    cfg.max_subword_len = 1;
    CHECK(encode_subwords("login", v, cfg).ids.size() == 1);
}

TEST_CASE("greedy longest-match property on random vocab") {
    SubwordVocab v = toy_vocab({"a", "b", "c", "ab", "bc", "abc", "cab", "bca"});
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::string frag;
        auto len = 1 + rng() % 12;
        for (std::size_t i = 0; i < len; ++i)
            frag += static_cast<char>('a' + rng() % 3);
        auto pieces = match_fragment(frag, v);
        std::size_t covered = 0;
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            CHECK(pieces[p].offset == covered);
            covered += pieces[p].length;
            // no longer vocab token starts at this offset
            for (std::size_t l = pieces[p].length + 1;
                 l <= v.max_surface_len && pieces[p].offset + l <= frag.size(); ++l)
                CHECK(v.ids.find(frag.substr(pieces[p].offset, l)) == v.ids.end());
        }
        CHECK(covered == frag.size());
    }
}

TEST_CASE("vocab training merges frequent pairs") {
    std::vector<std::string> corpus = {"login.php", "login.html"};
    SubwordVocab v = train_subword_vocab(corpus, 500, 2);
    CHECK(v.ids.count("login") == 1);
    // ids dense, specials in place
    CHECK(v.surfaces[0] == "<pad>");
    CHECK(v.surfaces[1] == "<unk>");
    CHECK(v.surfaces.size() == v.frequencies.size());
    for (const auto& [surface, id] : v.ids) {
        CHECK(id >= 2);
        CHECK(id < v.size());
        CHECK(v.surfaces[static_cast<std::size_t>(id)] == surface);
    }
}

TEST_CASE("vocab training with no merge budget is alphabet plus specials") {
    std::vector<std::string> corpus = {"abc.def"};
    SubwordVocab v = train_subword_vocab(corpus, 96, 1);
    CHECK(v.size() == 96);
    for (const auto& [surface, id] : v.ids) CHECK(surface.size() == 1);
    CHECK_THROWS_AS(train_subword_vocab(corpus, 10, 1), SpecError);
}

TEST_CASE("vocab training determinism and corpus-order insensitivity") {
    std::vector<std::string> corpus = {"paypal.com/verify", "secure-login.net",
                                       "paypal.com/account", "login.php"};
    SubwordVocab v1 = train_subword_vocab(corpus, 150, 1);
    std::reverse(corpus.begin(), corpus.end());
    SubwordVocab v2 = train_subword_vocab(corpus, 150, 1);
    REQUIRE(v1.size() == v2.size());
    CHECK(v1.surfaces == v2.surfaces);
    CHECK(v1.frequencies == v2.frequencies);

    save_vocab(v1, "vocab_a.tsv");
    save_vocab(v2, "vocab_b.tsv");
    CHECK(read_file("vocab_a.tsv") == read_file("vocab_b.tsv"));
    std::remove("vocab_a.tsv");
    std::remove("vocab_b.tsv");
}

TEST_CASE("merged tokens respect the training min_freq") {
    std::vector<std::string> corpus = {"abab", "abab", "xy"};
    SubwordVocab v = train_subword_vocab(corpus, 200, 2);
    for (const auto& [surface, id] : v.ids)
        if (surface.size() > 1)
            CHECK(v.frequencies[static_cast<std::size_t>(id)] >= 2);
    CHECK(v.ids.count("xy") == 0);  // pair frequency 1 < min_freq
}

TEST_CASE("vocab file round-trip") {
    std::vector<std::string> corpus = {"login.php", "login.html", "admin.php"};
    SubwordVocab v = train_subword_vocab(corpus, 150, 1);
    save_vocab(v, "vocab_rt.tsv");

    std::ifstream in("vocab_rt.tsv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "#url2graph-vocab v1");

    SubwordVocab back = load_vocab("vocab_rt.tsv");
    CHECK(back.surfaces == v.surfaces);
    CHECK(back.frequencies == v.frequencies);
    CHECK(back.max_surface_len == v.max_surface_len);
    std::remove("vocab_rt.tsv");
}

TEST_CASE("every emitted subword id is in range") {
    std::vector<std::string> corpus = {"paypal.com/account/verify", "g00gle.com"};
    SubwordVocab v = train_subword_vocab(corpus, 150, 1);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::string url;
        auto len = rng() % 50;
        for (std::size_t i = 0; i < len; ++i)
            url += static_cast<char>(32 + rng() % 96);
        TokenSeq seq = encode_subwords(url, v);
        REQUIRE(seq.ids.size() >= 1);
        CHECK(seq.ids.size() == seq.surfaces.size());
        for (int id : seq.ids) {
            CHECK(id >= 0);
            CHECK(id < v.size());
        }
    }
}
