// url2graph-cli: dataset plumbing, artifact building, training, evaluation,
// prediction and adversarial generation, all behind one binary.
//
// Exit codes: 0 success, 1 usage error, 2 data/artifact error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "u2g/corpus.hpp"
#include "u2g/error.hpp"
#include "u2g/fusion.hpp"
#include "u2g/metrics.hpp"
#include "u2g/pipeline.hpp"
#include "u2g/tokenizer.hpp"
#include "u2g/urlgraph.hpp"

namespace {

using namespace u2g;

std::map<std::string, int> parse_label_map(const std::string& spec,
                                           const std::string& data_path) {
    if (spec.empty()) return scan_labels(data_path);
    std::map<std::string, int> map;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        std::size_t comma = spec.find(',', pos);
        std::string item = spec.substr(pos, comma == std::string::npos
                                                ? std::string::npos
                                                : comma - pos);
        std::size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw FormatError("bad --labels entry (want name=id): " + item);
        map[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return map;
}

std::vector<std::string> read_url_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open URL list: " + path);
    std::vector<std::string> urls;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) urls.push_back(line);
    }
    if (urls.empty()) throw FormatError("no URLs in: " + path);
    return urls;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write: " + path);
    out << body;
}

// Builds dual-granularity token sequences and the two global graphs from a
// training split. Shared by `build-graphs` and nothing else, but kept as a
// function so errors surface with context.
std::pair<GlobalGraph, GlobalGraph> build_graphs(const Dataset& ds,
                                                 const SubwordVocab& vocab,
                                                 const TrainConfig& cfg) {
    std::vector<std::vector<int>> word_seqs, char_seqs;
    word_seqs.reserve(ds.size());
    char_seqs.reserve(ds.size());
    for (const auto& r : ds.records) {
        word_seqs.push_back(encode_subwords(r.url, vocab, cfg.model.tokenizer).ids);
        char_seqs.push_back(encode_chars(r.url, cfg.model.tokenizer).ids);
    }
    CooccurrenceStats word_stats = count_cooccurrences(word_seqs);
    CooccurrenceStats char_stats = count_cooccurrences(char_seqs);

    std::vector<std::string> char_surfaces(CharAlphabet::kSize);
    for (int i = 0; i < CharAlphabet::kSize; ++i)
        char_surfaces[static_cast<std::size_t>(i)] = CharAlphabet::surface(i);

    return {build_global_graph(word_stats, cfg.theta_word, Granularity::kWord,
                               vocab.surfaces, cfg.min_pair_count),
            build_global_graph(char_stats, cfg.theta_char, Granularity::kChar,
                               char_surfaces, cfg.min_pair_count)};
}

void add_train_config_flags(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--batch-size", cfg.batch_size, "mini-batch size");
    cmd->add_option("--epochs", cfg.epochs, "maximum training epochs");
    cmd->add_option("--lr", cfg.lr, "Adam learning rate");
    cmd->add_option("--seed", cfg.seed, "RNG seed");
    cmd->add_option("--patience", cfg.patience,
                    "epochs without val-AUC improvement before stopping");
    cmd->add_flag("--class-weights", cfg.class_weights,
                  "inverse-frequency loss weights");
    cmd->add_option("--positive-class", cfg.positive_class, "positive class id");
    cmd->add_option("--theta-word", cfg.theta_word, "subword-graph NPMI threshold");
    cmd->add_option("--theta-char", cfg.theta_char, "char-graph NPMI threshold");
    cmd->add_option("--min-pair-count", cfg.min_pair_count,
                    "minimum document co-occurrence count per edge");
    cmd->add_option("--vocab-target-size", cfg.vocab_target_size,
                    "subword vocabulary size");
    cmd->add_option("--vocab-min-freq", cfg.vocab_min_freq,
                    "minimum merge frequency during vocab training");
    cmd->add_option("--charcnn-embed-dim", cfg.model.charcnn.embed_dim,
                    "character embedding width");
    cmd->add_option("--charcnn-channels", cfg.model.charcnn.channels_per_width,
                    "convolution channels per kernel width");
    cmd->add_option("--semantic-dim", cfg.model.semantic.model_dim,
                    "semantic encoder width");
    cmd->add_option("--semantic-heads", cfg.model.semantic.heads, "attention heads");
    cmd->add_option("--semantic-layers", cfg.model.semantic.layers, "encoder layers");
    cmd->add_option("--gcn-layers", cfg.model.gcn_layers, "GCN depth");
    cmd->add_option("--graph-dim", cfg.model.graph_dim, "GCN hidden/output width");
    cmd->add_option("--max-subword-len", cfg.model.tokenizer.max_subword_len,
                    "token sequence cap");
    cmd->add_option("--max-char-len", cfg.model.tokenizer.max_char_len,
                    "character sequence cap");
    cmd->add_flag("--freeze-semantic", cfg.model.freeze_semantic,
                  "exclude the semantic encoder from optimization");
}

int run(int argc, char** argv) {
    CLI::App app{"url2graph: dual-granularity graph URL classifier"};
    app.require_subcommand(1);

    // --- split ---------------------------------------------------------
    auto* sp = app.add_subcommand("split", "stratified train/val/test split");
    std::string sp_data, sp_labels, sp_train = "train.csv", sp_val = "val.csv",
                         sp_test = "test.csv";
    SplitSpec sp_spec;
    sp->add_option("--data", sp_data, "input CSV (url,label)")->required();
    sp->add_option("--labels", sp_labels, "label map, name=id[,name=id...]");
    sp->add_option("--train-frac", sp_spec.train_frac);
    sp->add_option("--val-frac", sp_spec.val_frac);
    sp->add_option("--test-frac", sp_spec.test_frac);
    sp->add_option("--seed", sp_spec.seed);
    sp->add_option("--out-train", sp_train);
    sp->add_option("--out-val", sp_val);
    sp->add_option("--out-test", sp_test);
    std::size_t sp_short = 0;
    sp->add_option("--short-only", sp_short,
                   "keep only URLs shorter than this many characters first");

    // --- build-vocab -----------------------------------------------------
    auto* bv = app.add_subcommand("build-vocab", "train the subword vocabulary");
    std::string bv_data, bv_labels, bv_out = "vocab.tsv";
    std::size_t bv_size = 8000;
    std::int64_t bv_min_freq = 2;
    bv->add_option("--data", bv_data, "training CSV")->required();
    bv->add_option("--labels", bv_labels, "label map, name=id[,name=id...]");
    bv->add_option("--out", bv_out, "vocabulary TSV path");
    bv->add_option("--target-size", bv_size);
    bv->add_option("--min-freq", bv_min_freq);

    // --- build-graphs ----------------------------------------------------
    auto* bg = app.add_subcommand("build-graphs",
                                  "NPMI co-occurrence graphs at both granularities");
    std::string bg_data, bg_labels, bg_vocab, bg_word = "word.graph",
                         bg_char = "char.graph";
    TrainConfig bg_cfg;
    bg->add_option("--data", bg_data, "training CSV")->required();
    bg->add_option("--labels", bg_labels, "label map, name=id[,name=id...]");
    bg->add_option("--vocab", bg_vocab, "vocabulary TSV")->required();
    bg->add_option("--out-word", bg_word);
    bg->add_option("--out-char", bg_char);
    bg->add_option("--theta-word", bg_cfg.theta_word);
    bg->add_option("--theta-char", bg_cfg.theta_char);
    bg->add_option("--min-pair-count", bg_cfg.min_pair_count);
    bg->add_option("--max-subword-len", bg_cfg.model.tokenizer.max_subword_len);
    bg->add_option("--max-char-len", bg_cfg.model.tokenizer.max_char_len);

    // --- train -----------------------------------------------------------
    auto* tr = app.add_subcommand("train", "end-to-end model training");
    std::string tr_data, tr_val, tr_labels, tr_vocab, tr_word, tr_char,
        tr_out = "model.ckpt";
    TrainConfig tr_cfg;
    tr->add_option("--data", tr_data, "training CSV")->required();
    tr->add_option("--val", tr_val, "validation CSV")->required();
    tr->add_option("--labels", tr_labels, "label map, name=id[,name=id...]");
    tr->add_option("--vocab", tr_vocab, "vocabulary TSV")->required();
    tr->add_option("--word-graph", tr_word)->required();
    tr->add_option("--char-graph", tr_char)->required();
    tr->add_option("--out", tr_out, "checkpoint path");
    add_train_config_flags(tr, tr_cfg);

    // --- eval ------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "metrics on a labeled test set");
    std::string ev_ckpt, ev_data, ev_labels, ev_vocab, ev_word, ev_char,
        ev_out = "metrics.json";
    bool ev_mismatch = false;
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--data", ev_data, "test CSV")->required();
    ev->add_option("--labels", ev_labels, "label map, name=id[,name=id...]");
    ev->add_option("--vocab", ev_vocab)->required();
    ev->add_option("--word-graph", ev_word)->required();
    ev->add_option("--char-graph", ev_char)->required();
    ev->add_option("--out", ev_out, "metrics JSON path");
    ev->add_flag("--allow-artifact-mismatch", ev_mismatch,
                 "load even when artifact digests differ from the checkpoint");

    // --- predict -----------------------------------------------------------
    auto* pr = app.add_subcommand("predict", "score a list of URLs");
    std::string pr_ckpt, pr_urls, pr_vocab, pr_word, pr_char, pr_out = "predictions.tsv";
    bool pr_mismatch = false;
    pr->add_option("--checkpoint", pr_ckpt)->required();
    pr->add_option("--urls", pr_urls, "text file, one URL per line")->required();
    pr->add_option("--vocab", pr_vocab)->required();
    pr->add_option("--word-graph", pr_word)->required();
    pr->add_option("--char-graph", pr_char)->required();
    pr->add_option("--out", pr_out, "TSV output path");
    pr->add_flag("--allow-artifact-mismatch", pr_mismatch);

    // --- perturb -----------------------------------------------------------
    auto* pt = app.add_subcommand("perturb", "adversarial URL rewriting");
    std::string pt_urls, pt_vocab, pt_out = "perturbed.txt", pt_mode = "hyphen";
    AdversarialSpec pt_spec;
    pt->add_option("--urls", pt_urls, "text file, one URL per line")->required();
    pt->add_option("--vocab", pt_vocab)->required();
    pt->add_option("--out", pt_out);
    pt->add_option("--mode", pt_mode, "hyphen | duplicate | both")
        ->check(CLI::IsMember({"hyphen", "duplicate", "both"}));
    pt->add_option("--ratio", pt_spec.ratio, "fraction of boundaries, (0, 1]");
    pt->add_option("--seed", pt_spec.seed);

    // --- stats -------------------------------------------------------------
    auto* st = app.add_subcommand("stats", "class balance and length histogram");
    std::string st_data, st_labels, st_out;
    st->add_option("--data", st_data, "input CSV")->required();
    st->add_option("--labels", st_labels, "label map, name=id[,name=id...]");
    st->add_option("--out", st_out, "JSON path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    if (sp->parsed()) {
        Dataset ds = load_csv(sp_data, parse_label_map(sp_labels, sp_data));
        if (sp_short > 0) ds = filter_short(ds, sp_short);
        auto [train_ds, val_ds, test_ds] = split(ds, sp_spec);
        write_csv(train_ds, sp_train);
        write_csv(val_ds, sp_val);
        write_csv(test_ds, sp_test);
        std::cout << "train " << train_ds.size() << ", val " << val_ds.size()
                  << ", test " << test_ds.size() << "\n";
    } else if (bv->parsed()) {
        Dataset ds = load_csv(bv_data, parse_label_map(bv_labels, bv_data));
        std::vector<std::string> urls;
        urls.reserve(ds.size());
        for (const auto& r : ds.records) urls.push_back(r.url);
        SubwordVocab vocab = train_subword_vocab(urls, bv_size, bv_min_freq);
        save_vocab(vocab, bv_out);
        std::cout << "vocab size " << vocab.size() << " -> " << bv_out << "\n";
    } else if (bg->parsed()) {
        Dataset ds = load_csv(bg_data, parse_label_map(bg_labels, bg_data));
        SubwordVocab vocab = load_vocab(bg_vocab);
        auto [g_word, g_char] = build_graphs(ds, vocab, bg_cfg);
        save_graph(g_word, bg_word);
        save_graph(g_char, bg_char);
        std::cout << "word graph: " << g_word.nodes.size() << " nodes, "
                  << g_word.edges.size() << " edges -> " << bg_word << "\n"
                  << "char graph: " << g_char.nodes.size() << " nodes, "
                  << g_char.edges.size() << " edges -> " << bg_char << "\n";
    } else if (tr->parsed()) {
        auto label_map = parse_label_map(tr_labels, tr_data);
        Dataset train_ds = load_csv(tr_data, label_map);
        Dataset val_ds = load_csv(tr_val, label_map);
        SubwordVocab vocab = load_vocab(tr_vocab);
        GlobalGraph g_word = load_graph(tr_word);
        GlobalGraph g_char = load_graph(tr_char);
        tr_cfg.model.num_classes = train_ds.num_classes();
        ModelParams params =
            ModelParams::create(tr_cfg.model, vocab.size(), tr_cfg.seed);
        TrainResult result =
            train(train_ds, val_ds, vocab, g_word, g_char, params, tr_cfg);
        ArtifactDigests digests{file_digest(tr_vocab), file_digest(tr_word),
                                file_digest(tr_char)};
        save_checkpoint(tr_out, params, tr_cfg, digests);
        std::cout << "best epoch " << result.best_epoch << ", best val metric "
                  << result.best_val_auc << " -> " << tr_out << "\n";
    } else if (ev->parsed()) {
        ArtifactDigests digests{file_digest(ev_vocab), file_digest(ev_word),
                                file_digest(ev_char)};
        LoadedCheckpoint ckpt = load_checkpoint(ev_ckpt, &digests, ev_mismatch);
        Dataset test_ds = load_csv(ev_data, parse_label_map(ev_labels, ev_data));
        SubwordVocab vocab = load_vocab(ev_vocab);
        GlobalGraph g_word = load_graph(ev_word);
        GlobalGraph g_char = load_graph(ev_char);
        Metrics m =
            evaluate(test_ds, vocab, g_word, g_char, ckpt.params, ckpt.cfg);
        write_text(ev_out, metrics_to_json(m) + "\n");
        std::cout << metrics_to_json(m) << "\n";
    } else if (pr->parsed()) {
        ArtifactDigests digests{file_digest(pr_vocab), file_digest(pr_word),
                                file_digest(pr_char)};
        LoadedCheckpoint ckpt = load_checkpoint(pr_ckpt, &digests, pr_mismatch);
        std::vector<std::string> urls = read_url_lines(pr_urls);
        SubwordVocab vocab = load_vocab(pr_vocab);
        GlobalGraph g_word = load_graph(pr_word);
        GlobalGraph g_char = load_graph(pr_char);
        auto preds = predict(urls, vocab, g_word, g_char, ckpt.params, ckpt.cfg);
        std::ofstream out(pr_out, std::ios::binary);
        if (!out) throw FormatError("cannot write: " + pr_out);
        out.precision(9);
        for (std::size_t i = 0; i < urls.size(); ++i)
            out << urls[i] << '\t' << preds[i].score << '\t' << preds[i].label
                << '\t' << preds[i].alpha_t << '\t' << preds[i].alpha_word << '\t'
                << preds[i].alpha_char << '\n';
        std::cout << urls.size() << " predictions -> " << pr_out << "\n";
    } else if (pt->parsed()) {
        if (pt_mode == "duplicate") pt_spec.mode = AdversarialSpec::Mode::kDuplicate;
        else if (pt_mode == "both") pt_spec.mode = AdversarialSpec::Mode::kBoth;
        SubwordVocab vocab = load_vocab(pt_vocab);
        std::vector<std::string> urls = read_url_lines(pt_urls);
        std::ofstream out(pt_out, std::ios::binary);
        if (!out) throw FormatError("cannot write: " + pt_out);
        std::size_t changed = 0;
        std::uint64_t seed = pt_spec.seed;
        for (const auto& url : urls) {
            AdversarialSpec s = pt_spec;
            s.seed = seed++;  // one stream position per URL, still seed-determined
            PerturbResult r = perturb_adversarial(url, vocab, s);
            changed += r.changed ? 1u : 0u;
            out << r.url << '\n';
        }
        std::cout << changed << "/" << urls.size() << " URLs perturbed -> "
                  << pt_out << "\n";
    } else if (st->parsed()) {
        Dataset ds = load_csv(st_data, parse_label_map(st_labels, st_data));
        std::string json = stats_to_json(ds, class_stats(ds));
        if (st_out.empty()) std::cout << json << "\n";
        else write_text(st_out, json + "\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::Error&) {
        return 1;  // CLI11_PARSE already printed usage; defensive only
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
