#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "u2g/autodiff.hpp"
#include "u2g/tokenizer.hpp"
#include "u2g/urlgraph.hpp"

namespace u2g {

struct CharCnnConfig {
    std::size_t embed_dim = 16;               // d_c
    std::vector<std::size_t> widths = {2, 3, 4};
    std::size_t channels_per_width = 32;      // n_k

    std::size_t out_dim() const { return widths.size() * channels_per_width; }
};

struct CharCnnParams {
    CharCnnConfig cfg;
    Param embed;                 // [96 x d_c]
    std::vector<Param> kernels;  // per width: {k, d_c, n_k}
    std::vector<Param> biases;   // per width: [n_k]

    static CharCnnParams create(const CharCnnConfig& cfg, std::mt19937_64& rng);
    void collect(ParamGroup& group);
};

// Per-tape CharCNN runner: parameter leaves are created once and shared
// across every surface encoded on the same tape.
class CharCnnForward {
public:
    CharCnnForward(Tape& tape, CharCnnParams& params);

    // embed, per width conv + ReLU + max pooling, concat in ascending
    // width order. Input is left-padded with PAD so every kernel fits.
    Tensor& operator()(const std::vector<int>& char_ids);

    std::size_t out_dim() const { return params_.cfg.out_dim(); }

private:
    Tape& tape_;
    CharCnnParams& params_;
    Tensor* embed_leaf_;
    std::vector<Tensor*> kernel_leaves_;
    std::vector<Tensor*> bias_leaves_;
};

struct SemanticConfig {
    std::size_t model_dim = 64;  // d_t
    std::size_t heads = 4;
    std::size_t layers = 2;
    bool use_positional = true;
};

struct SemanticEncoderParams {
    SemanticConfig cfg;
    Param token_embed;  // [|V_t| x d_t]
    struct Layer {
        Param wq, wk, wv, wo;  // [d_t x d_t]
        Param ff_w1, ff_b1;    // [d_t x 4 d_t], [4 d_t]
        Param ff_w2, ff_b2;    // [4 d_t x d_t], [d_t]
    };
    std::vector<Layer> layers;

    static SemanticEncoderParams create(const SemanticConfig& cfg,
                                        std::size_t vocab_size,
                                        std::mt19937_64& rng);
    void collect(ParamGroup& group);
    void set_trainable(bool trainable);
};

class SemanticForward {
public:
    SemanticForward(Tape& tape, SemanticEncoderParams& params);

    // Returns the mean-pooled sequence representation h_t [d_t]. When
    // attn_debug is given, every head's attention matrix (row-major,
    // L x L) is appended for inspection.
    Tensor& operator()(const std::vector<int>& token_ids,
                       std::vector<std::vector<double>>* attn_debug = nullptr);

private:
    Tape& tape_;
    SemanticEncoderParams& params_;
    Tensor* embed_leaf_;
    struct LayerLeaves {
        Tensor *wq, *wk, *wv, *wo, *ff_w1, *ff_b1, *ff_w2, *ff_b2;
    };
    std::vector<LayerLeaves> layer_leaves_;
};

struct GcnConfig {
    std::size_t layers = 2;
    std::size_t in_dim = 96;   // d_c'
    std::size_t out_dim = 64;  // d_g, also the hidden width
};

struct GcnParams {
    GcnConfig cfg;
    std::vector<Param> weights;  // layer ell: [d_in x d_out]

    static GcnParams create(const GcnConfig& cfg, const std::string& prefix,
                            std::mt19937_64& rng);
    void collect(ParamGroup& group);
};

// Sinusoidal positional table, rows 0..len-1.
std::vector<double> sinusoidal_positions(std::size_t len, std::size_t dim);

// Symmetric-normalized adjacency with self-loops for a batched graph.
SparseMatrix normalized_adjacency(const BatchedGraph& batch);

// CharCNN rows for every node of a batched graph (surfaces deduplicated),
// in node order. Empty batch yields a 0 x d_c' tensor.
Tensor& init_node_features(Tape& tape, const BatchedGraph& batch,
                           CharCnnForward& charcnn, const TokenizerConfig& tok = {});

// L rounds of ReLU(A_hat H W), then per-segment mean pooling. Output is
// [num_segments x d_g]; empty segments yield zero rows.
Tensor& gcn_forward(Tape& tape, const BatchedGraph& batch, Tensor& x0,
                    GcnParams& params);

}  // namespace u2g
