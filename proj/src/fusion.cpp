#include "u2g/fusion.hpp"

#include <algorithm>

#include "u2g/error.hpp"

namespace u2g {

FusionParams FusionParams::create(std::size_t d_t, std::size_t d_g, int num_classes,
                                  std::mt19937_64& rng) {
    FusionParams p;
    auto C = static_cast<std::size_t>(num_classes);
    p.w_word = Param("fusion.w_word", {d_t, d_g});
    p.b_word = Param("fusion.b_word", {d_t});
    p.w_char = Param("fusion.w_char", {d_t, d_g});
    p.b_char = Param("fusion.b_char", {d_t});
    p.w_gate = Param("fusion.w_gate", {3, 3 * d_t});
    p.b_gate = Param("fusion.b_gate", {3});
    p.w_cls = Param("fusion.w_cls", {C, d_t});
    p.b_cls = Param("fusion.b_cls", {C});
    init_glorot(p.w_word, rng);
    init_glorot(p.w_char, rng);
    init_glorot(p.w_gate, rng);
    init_glorot(p.w_cls, rng);
    return p;
}

void FusionParams::collect(ParamGroup& group) {
    group.add(w_word);
    group.add(b_word);
    group.add(w_char);
    group.add(b_char);
    group.add(w_gate);
    group.add(b_gate);
    group.add(w_cls);
    group.add(b_cls);
}

ModelParams ModelParams::create(const ModelConfig& cfg, std::size_t vocab_size,
                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelParams p{cfg,
                  vocab_size,
                  CharCnnParams::create(cfg.charcnn, rng),
                  SemanticEncoderParams::create(cfg.semantic, vocab_size, rng),
                  GcnParams::create({cfg.gcn_layers, cfg.charcnn.out_dim(),
                                     cfg.graph_dim},
                                    "gcn_word", rng),
                  GcnParams::create({cfg.gcn_layers, cfg.charcnn.out_dim(),
                                     cfg.graph_dim},
                                    "gcn_char", rng),
                  FusionParams::create(cfg.semantic.model_dim, cfg.graph_dim,
                                       cfg.num_classes, rng)};
    p.apply_freeze();
    return p;
}

ParamGroup ModelParams::group() {
    ParamGroup g;
    charcnn.collect(g);
    semantic.collect(g);
    gcn_word.collect(g);
    gcn_char.collect(g);
    fusion.collect(g);
    return g;
}

void ModelParams::apply_freeze() {
    semantic.set_trainable(!cfg.freeze_semantic);
}

Tensor& project(Tape& tape, Tensor& g, Tensor& w, Tensor& b) {
    return tape.affine(w, g, &b);
}

GateResult gate_fuse(Tape& tape, Tensor& h_t, Tensor& h_word, Tensor& h_char,
                     Tensor& w_gate, Tensor& b_gate) {
    if (h_t.size() != h_word.size() || h_t.size() != h_char.size())
        throw ShapeError("gate_fuse: source vectors must share dimension");
    Tensor& concat = tape.concat_vecs({&h_t, &h_word, &h_char});
    Tensor& alpha = tape.softmax_rows(tape.affine(w_gate, concat, &b_gate));
    Tensor& t0 = tape.mul_scalar(h_t, tape.entry(alpha, 0));
    Tensor& t1 = tape.mul_scalar(h_word, tape.entry(alpha, 1));
    Tensor& t2 = tape.mul_scalar(h_char, tape.entry(alpha, 2));
    Tensor& fused = tape.add(tape.add(t0, t1), t2);
    return {&alpha, &fused};
}

Tensor& classify(Tape& tape, Tensor& h_fused, Tensor& w_cls, Tensor& b_cls) {
    return tape.softmax_rows(tape.affine(w_cls, h_fused, &b_cls));
}

ForwardResult model_forward(Tape& tape, const std::vector<std::string>& urls,
                            const SubwordVocab& vocab, const GlobalGraph& g_word,
                            const GlobalGraph& g_char, ModelParams& params,
                            bool want_traces) {
    if (urls.empty()) throw SpecError("model_forward: empty batch");
    for (const auto& n : g_word.nodes)
        if (n.vocab_id >= vocab.size())
            throw ArtifactError("word graph references ids outside the vocabulary");
    for (const auto& n : g_char.nodes)
        if (n.vocab_id >= CharAlphabet::kSize)
            throw ArtifactError("char graph references ids outside the alphabet");

    CharCnnForward charcnn(tape, params.charcnn);
    SemanticForward semantic(tape, params.semantic);

    std::vector<Tensor*> h_t(urls.size());
    std::vector<Subgraph> word_subs, char_subs;
    word_subs.reserve(urls.size());
    char_subs.reserve(urls.size());
    for (std::size_t i = 0; i < urls.size(); ++i) {
        TokenSeq tokens = encode_subwords(urls[i], vocab, params.cfg.tokenizer);
        CharSeq chars = encode_chars(urls[i], params.cfg.tokenizer);
        h_t[i] = &semantic(tokens.ids);
        word_subs.push_back(induce_subgraph(g_word, tokens.ids, static_cast<int>(i)));
        char_subs.push_back(induce_subgraph(g_char, chars.ids, static_cast<int>(i)));
    }

    BatchedGraph word_batch = batch_subgraphs(word_subs);
    BatchedGraph char_batch = batch_subgraphs(char_subs);
    Tensor& word_x0 = init_node_features(tape, word_batch, charcnn,
                                         params.cfg.tokenizer);
    Tensor& char_x0 = init_node_features(tape, char_batch, charcnn,
                                         params.cfg.tokenizer);
    Tensor& word_pooled = gcn_forward(tape, word_batch, word_x0, params.gcn_word);
    Tensor& char_pooled = gcn_forward(tape, char_batch, char_x0, params.gcn_char);

    Tensor& w_word = tape.leaf(params.fusion.w_word);
    Tensor& b_word = tape.leaf(params.fusion.b_word);
    Tensor& w_char = tape.leaf(params.fusion.w_char);
    Tensor& b_char = tape.leaf(params.fusion.b_char);
    Tensor& w_gate = tape.leaf(params.fusion.w_gate);
    Tensor& b_gate = tape.leaf(params.fusion.b_gate);
    Tensor& w_cls = tape.leaf(params.fusion.w_cls);
    Tensor& b_cls = tape.leaf(params.fusion.b_cls);

    ForwardResult result;
    std::vector<Tensor*> prob_rows(urls.size());
    for (std::size_t i = 0; i < urls.size(); ++i) {
        Tensor& hw = tape.row(word_pooled, i);
        Tensor& hc = tape.row(char_pooled, i);
        Tensor& pw = project(tape, hw, w_word, b_word);
        Tensor& pc = project(tape, hc, w_char, b_char);
        GateResult gate = gate_fuse(tape, *h_t[i], pw, pc, w_gate, b_gate);
        Tensor& probs = classify(tape, *gate.fused, w_cls, b_cls);
        prob_rows[i] = &probs;
        if (want_traces) {
            result.traces.push_back({h_t[i]->val, hw.val, hc.val, gate.alpha->val,
                                     probs.val});
        }
    }
    result.probs = &tape.stack_rows(prob_rows);
    return result;
}

Tensor& batch_loss(Tape& tape, Tensor& probs, const std::vector<int>& labels,
                   const std::vector<double>* weights) {
    return tape.cross_entropy(probs, labels, weights);
}

}  // namespace u2g
