#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace u2g {

// URL structural separators. Delimiters bound merge fragments and are
// never emitted as tokens.
inline constexpr const char* kDelimiters = "/.?=&-_:@~%+#";

inline bool is_delimiter(char c) {
    for (const char* p = kDelimiters; *p; ++p)
        if (*p == c) return true;
    return false;
}

// Fixed character alphabet: PAD=0, UNK=1, printable ASCII 33..126 at
// ids 2..95. 96 symbols total, immutable.
struct CharAlphabet {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kSize = 96;

    static int to_id(char c) {
        auto u = static_cast<unsigned char>(c);
        return (u >= 33 && u <= 126) ? static_cast<int>(u) - 31 : kUnk;
    }
    static char surface(int id) {
        // PAD/UNK have no printable surface; callers use these for display only
        if (id < 2 || id >= kSize) return '?';
        return static_cast<char>(id + 31);
    }
};

struct SubwordVocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    std::vector<std::string> surfaces;        // id -> surface ("<pad>", "<unk>" first)
    std::vector<std::int64_t> frequencies;    // id -> corpus frequency
    std::unordered_map<std::string, int> ids; // surface -> id (specials excluded)
    std::size_t max_surface_len = 1;

    int size() const { return static_cast<int>(surfaces.size()); }
    int lookup(const std::string& s) const {
        auto it = ids.find(s);
        return it == ids.end() ? kUnk : it->second;
    }
};

struct TokenSeq {
    std::vector<int> ids;
    // parallel surfaces; continuation pieces carry a "##" prefix
    std::vector<std::string> surfaces;
};

struct CharSeq {
    std::vector<int> ids;
};

struct TokenizerConfig {
    std::size_t max_subword_len = 128;
    std::size_t max_char_len = 256;
};

// Frequency-ranked pair merging over delimiter-bounded fragments, seeded
// with all printable single characters. Deterministic: ties in merge rank
// break on lexicographic order of the merged surface.
SubwordVocab train_subword_vocab(const std::vector<std::string>& corpus,
                                 std::size_t target_size, std::int64_t min_freq);

// Greedy longest-match over the vocab inside each delimiter-bounded
// fragment. Unmatched bytes become UNK; empty input yields [UNK].
TokenSeq encode_subwords(const std::string& url, const SubwordVocab& vocab,
                         const TokenizerConfig& cfg = {});

// Per-fragment greedy match with byte offsets into the fragment, used by
// both encode_subwords and adversarial boundary detection.
struct Piece {
    std::size_t offset;
    std::size_t length;
    int id;
};
std::vector<Piece> match_fragment(const std::string& fragment,
                                  const SubwordVocab& vocab);

CharSeq encode_chars(const std::string& url, const TokenizerConfig& cfg = {});

// Vocab file: `#url2graph-vocab v1` header, then `surface \t id \t freq`.
void save_vocab(const SubwordVocab& vocab, const std::string& path);
SubwordVocab load_vocab(const std::string& path);

}  // namespace u2g
