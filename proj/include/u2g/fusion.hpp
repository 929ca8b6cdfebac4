#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "u2g/autodiff.hpp"
#include "u2g/encoders.hpp"
#include "u2g/tokenizer.hpp"
#include "u2g/urlgraph.hpp"

namespace u2g {

struct FusionParams {
    Param w_word, b_word;  // [d_t x d_g], [d_t]
    Param w_char, b_char;  // [d_t x d_g], [d_t]
    Param w_gate, b_gate;  // [3 x 3 d_t], [3]
    Param w_cls, b_cls;    // [C x d_t], [C]

    static FusionParams create(std::size_t d_t, std::size_t d_g, int num_classes,
                               std::mt19937_64& rng);
    void collect(ParamGroup& group);
};

struct ModelConfig {
    CharCnnConfig charcnn;
    SemanticConfig semantic;
    std::size_t gcn_layers = 2;
    std::size_t graph_dim = 64;  // d_g
    int num_classes = 2;
    TokenizerConfig tokenizer;
    bool freeze_semantic = false;
};

struct ModelParams {
    ModelConfig cfg;
    std::size_t vocab_size = 0;
    CharCnnParams charcnn;
    SemanticEncoderParams semantic;
    GcnParams gcn_word;
    GcnParams gcn_char;
    FusionParams fusion;

    static ModelParams create(const ModelConfig& cfg, std::size_t vocab_size,
                              std::uint64_t seed);
    // Stable enumeration order; used by the optimizer and checkpoints.
    ParamGroup group();
    void apply_freeze();
};

// Per-sample intermediate values kept for inspection.
struct ForwardTrace {
    std::vector<double> h_t;
    std::vector<double> h_word;
    std::vector<double> h_char;
    std::vector<double> alpha;
    std::vector<double> probs;
};

// Eq-style building blocks, exposed for direct testing.
Tensor& project(Tape& tape, Tensor& g, Tensor& w, Tensor& b);

struct GateResult {
    Tensor* alpha;   // [3], convex weights
    Tensor* fused;   // [d_t]
};
GateResult gate_fuse(Tape& tape, Tensor& h_t, Tensor& h_word, Tensor& h_char,
                     Tensor& w_gate, Tensor& b_gate);

Tensor& classify(Tape& tape, Tensor& h_fused, Tensor& w_cls, Tensor& b_cls);

struct ForwardResult {
    Tensor* probs = nullptr;  // [B x C]
    std::vector<ForwardTrace> traces;
};

// Full model on a mini-batch: dual tokenization, semantic encoding,
// subgraph induction + disjoint-union batching per granularity, CharCNN
// node init, two GCNs, projection, gated fusion, classification.
ForwardResult model_forward(Tape& tape, const std::vector<std::string>& urls,
                            const SubwordVocab& vocab, const GlobalGraph& g_word,
                            const GlobalGraph& g_char, ModelParams& params,
                            bool want_traces = false);

Tensor& batch_loss(Tape& tape, Tensor& probs, const std::vector<int>& labels,
                   const std::vector<double>* weights = nullptr);

}  // namespace u2g
