#include "u2g/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "u2g/error.hpp"

namespace u2g {

namespace {

constexpr char kNonPrintable = '\x01';  // training sentinel, never merged

bool printable(char c) {
    auto u = static_cast<unsigned char>(c);
    return u >= 33 && u <= 126;
}

std::vector<std::string> split_fragments(const std::string& url) {
    std::vector<std::string> frags;
    std::string cur;
    for (char c : url) {
        if (is_delimiter(c)) {
            if (!cur.empty()) frags.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) frags.push_back(std::move(cur));
    return frags;
}

}  // namespace

SubwordVocab train_subword_vocab(const std::vector<std::string>& corpus,
                                 std::size_t target_size, std::int64_t min_freq) {
    if (corpus.empty()) throw SpecError("train_subword_vocab: empty corpus");
    if (min_freq < 1) throw SpecError("train_subword_vocab: min_freq must be >= 1");

    SubwordVocab vocab;
    vocab.surfaces = {"<pad>", "<unk>"};
    vocab.frequencies = {0, 0};

    // single-character seeds: all 94 printable ASCII characters
    std::vector<std::int64_t> char_occurrences(128, 0);
    for (const auto& url : corpus)
        for (char c : url)
            if (printable(c)) ++char_occurrences[static_cast<unsigned char>(c)];
    for (int c = 33; c <= 126; ++c) {
        std::string s(1, static_cast<char>(c));
        vocab.ids[s] = vocab.size();
        vocab.surfaces.push_back(s);
        vocab.frequencies.push_back(char_occurrences[static_cast<std::size_t>(c)]);
    }
    if (target_size < vocab.surfaces.size())
        throw SpecError("train_subword_vocab: target_size smaller than seed set");

    // delimiter-bounded fragments as symbol sequences, deduplicated with counts;
    // map keeps iteration deterministic
    std::map<std::vector<std::string>, std::int64_t> fragments;
    for (const auto& url : corpus) {
        for (const auto& frag : split_fragments(url)) {
            std::vector<std::string> syms;
            syms.reserve(frag.size());
            for (char c : frag)
                syms.emplace_back(1, printable(c) ? c : kNonPrintable);
            ++fragments[std::move(syms)];
        }
    }

    while (vocab.surfaces.size() < target_size) {
        // frequency of each adjacent symbol pair, weighted by fragment count
        std::map<std::pair<std::string, std::string>, std::int64_t> pair_freq;
        for (const auto& [syms, count] : fragments) {
            for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
                if (syms[i][0] == kNonPrintable || syms[i + 1][0] == kNonPrintable)
                    continue;
                pair_freq[{syms[i], syms[i + 1]}] += count;
            }
        }
        std::int64_t best_freq = 0;
        std::pair<std::string, std::string> best;
        std::string best_surface;
        for (const auto& [pr, freq] : pair_freq) {
            std::string merged = pr.first + pr.second;
            if (freq > best_freq || (freq == best_freq && merged < best_surface)) {
                best_freq = freq;
                best = pr;
                best_surface = merged;
            }
        }
        if (best_freq < min_freq) break;

        if (!vocab.ids.count(best_surface)) {
            vocab.ids[best_surface] = vocab.size();
            vocab.surfaces.push_back(best_surface);
            vocab.frequencies.push_back(best_freq);
        }

        std::map<std::vector<std::string>, std::int64_t> next;
        for (const auto& [syms, count] : fragments) {
            std::vector<std::string> merged;
            merged.reserve(syms.size());
            for (std::size_t i = 0; i < syms.size(); ++i) {
                if (i + 1 < syms.size() && syms[i] == best.first &&
                    syms[i + 1] == best.second) {
                    merged.push_back(best_surface);
                    ++i;
                } else {
                    merged.push_back(syms[i]);
                }
            }
            next[std::move(merged)] += count;
        }
        fragments = std::move(next);
    }

    for (const auto& s : vocab.surfaces)
        vocab.max_surface_len = std::max(vocab.max_surface_len, s.size());
    return vocab;
}

std::vector<Piece> match_fragment(const std::string& fragment,
                                  const SubwordVocab& vocab) {
    std::vector<Piece> pieces;
    std::size_t i = 0;
    while (i < fragment.size()) {
        std::size_t best_len = 0;
        int best_id = SubwordVocab::kUnk;
        std::size_t cap = std::min(vocab.max_surface_len, fragment.size() - i);
        for (std::size_t len = cap; len >= 1; --len) {
            auto it = vocab.ids.find(fragment.substr(i, len));
            if (it != vocab.ids.end()) {
                best_len = len;
                best_id = it->second;
                break;
            }
        }
        if (best_len == 0) {
            pieces.push_back({i, 1, SubwordVocab::kUnk});
            ++i;
        } else {
            pieces.push_back({i, best_len, best_id});
            i += best_len;
        }
    }
    return pieces;
}

TokenSeq encode_subwords(const std::string& url, const SubwordVocab& vocab,
                         const TokenizerConfig& cfg) {
    TokenSeq seq;
    for (const auto& frag : split_fragments(url)) {
        bool first = true;
        for (const auto& p : match_fragment(frag, vocab)) {
            if (seq.ids.size() >= cfg.max_subword_len) break;
            seq.ids.push_back(p.id);
            std::string surface = p.id == SubwordVocab::kUnk
                                      ? frag.substr(p.offset, p.length)
                                      : vocab.surfaces[static_cast<std::size_t>(p.id)];
            seq.surfaces.push_back(first ? surface : "##" + surface);
            first = false;
        }
        if (seq.ids.size() >= cfg.max_subword_len) break;
    }
    if (seq.ids.empty()) {
        seq.ids.push_back(SubwordVocab::kUnk);
        seq.surfaces.push_back("<unk>");
    }
    return seq;
}

CharSeq encode_chars(const std::string& url, const TokenizerConfig& cfg) {
    CharSeq seq;
    seq.ids.reserve(std::min(url.size(), cfg.max_char_len));
    for (char c : url) {
        if (seq.ids.size() >= cfg.max_char_len) break;
        seq.ids.push_back(CharAlphabet::to_id(c));
    }
    if (seq.ids.empty()) seq.ids.push_back(CharAlphabet::kUnk);
    return seq;
}

void save_vocab(const SubwordVocab& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write vocab file: " + path);
    out << "#url2graph-vocab v1\n";
    for (int i = 0; i < vocab.size(); ++i) {
        out << vocab.surfaces[static_cast<std::size_t>(i)] << '\t' << i << '\t'
            << vocab.frequencies[static_cast<std::size_t>(i)] << '\n';
    }
}

SubwordVocab load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open vocab file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#url2graph-vocab v1", 0) != 0)
        throw FormatError("bad vocab header in: " + path);
    SubwordVocab vocab;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t t1 = line.find('\t');
        std::size_t t2 = line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw FormatError("bad vocab line: " + line);
        std::string surface = line.substr(0, t1);
        int id = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
        std::int64_t freq = std::stoll(line.substr(t2 + 1));
        if (id != vocab.size()) throw FormatError("non-dense vocab ids in: " + path);
        vocab.surfaces.push_back(surface);
        vocab.frequencies.push_back(freq);
        if (id >= 2) vocab.ids[surface] = id;
    }
    if (vocab.size() < 2 || vocab.surfaces[0] != "<pad>" || vocab.surfaces[1] != "<unk>")
        throw FormatError("vocab missing PAD/UNK specials: " + path);
    for (const auto& s : vocab.surfaces)
        vocab.max_surface_len = std::max(vocab.max_surface_len, s.size());
    return vocab;
}

}  // namespace u2g
