#include "u2g/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "u2g/error.hpp"

namespace u2g {

CharCnnParams CharCnnParams::create(const CharCnnConfig& cfg, std::mt19937_64& rng) {
    CharCnnParams p;
    p.cfg = cfg;
    p.embed = Param("charcnn.embed",
                    {static_cast<std::size_t>(CharAlphabet::kSize), cfg.embed_dim});
    init_normal(p.embed, 0.02, rng);
    for (std::size_t k : cfg.widths) {
        Param w("charcnn.kernel" + std::to_string(k),
                {k, cfg.embed_dim, cfg.channels_per_width});
        init_glorot(w, rng);
        p.kernels.push_back(std::move(w));
        p.biases.emplace_back("charcnn.bias" + std::to_string(k),
                              std::vector<std::size_t>{cfg.channels_per_width});
    }
    return p;
}

void CharCnnParams::collect(ParamGroup& group) {
    group.add(embed);
    for (auto& w : kernels) group.add(w);
    for (auto& b : biases) group.add(b);
}

CharCnnForward::CharCnnForward(Tape& tape, CharCnnParams& params)
    : tape_(tape), params_(params) {
    embed_leaf_ = &tape_.leaf(params_.embed);
    for (std::size_t i = 0; i < params_.kernels.size(); ++i) {
        kernel_leaves_.push_back(&tape_.leaf(params_.kernels[i]));
        bias_leaves_.push_back(&tape_.leaf(params_.biases[i]));
    }
}

Tensor& CharCnnForward::operator()(const std::vector<int>& char_ids) {
    if (char_ids.empty()) throw SpecError("charcnn: empty character sequence");
    std::size_t max_width = 1;
    for (std::size_t k : params_.cfg.widths) max_width = std::max(max_width, k);
    std::vector<int> padded = char_ids;
    while (padded.size() < max_width)
        padded.insert(padded.begin(), CharAlphabet::kPad);

    Tensor& embedded = tape_.gather_rows(*embed_leaf_, padded);
    std::vector<Tensor*> pooled;
    for (std::size_t i = 0; i < params_.cfg.widths.size(); ++i) {
        Tensor& conv = tape_.conv1d_bank(embedded, *kernel_leaves_[i], *bias_leaves_[i]);
        Tensor& act = tape_.relu(conv);
        pooled.push_back(&tape_.max_over_rows(act));
    }
    return tape_.concat_vecs(pooled);
}

SemanticEncoderParams SemanticEncoderParams::create(const SemanticConfig& cfg,
                                                    std::size_t vocab_size,
                                                    std::mt19937_64& rng) {
    if (cfg.model_dim % cfg.heads != 0)
        throw SpecError("semantic encoder: model_dim must be divisible by head count");
    SemanticEncoderParams p;
    p.cfg = cfg;
    p.token_embed = Param("semantic.embed", {vocab_size, cfg.model_dim});
    init_normal(p.token_embed, 0.02, rng);
    std::size_t d = cfg.model_dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        std::string pre = "semantic.l" + std::to_string(l) + ".";
        Layer layer{
            Param(pre + "wq", {d, d}), Param(pre + "wk", {d, d}),
            Param(pre + "wv", {d, d}), Param(pre + "wo", {d, d}),
            Param(pre + "ff_w1", {d, 4 * d}), Param(pre + "ff_b1", {4 * d}),
            Param(pre + "ff_w2", {4 * d, d}), Param(pre + "ff_b2", {d}),
        };
        init_glorot(layer.wq, rng);
        init_glorot(layer.wk, rng);
        init_glorot(layer.wv, rng);
        init_glorot(layer.wo, rng);
        init_glorot(layer.ff_w1, rng);
        init_glorot(layer.ff_w2, rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

void SemanticEncoderParams::collect(ParamGroup& group) {
    group.add(token_embed);
    for (auto& l : layers) {
        group.add(l.wq);
        group.add(l.wk);
        group.add(l.wv);
        group.add(l.wo);
        group.add(l.ff_w1);
        group.add(l.ff_b1);
        group.add(l.ff_w2);
        group.add(l.ff_b2);
    }
}

void SemanticEncoderParams::set_trainable(bool trainable) {
    token_embed.trainable = trainable;
    for (auto& l : layers) {
        l.wq.trainable = trainable;
        l.wk.trainable = trainable;
        l.wv.trainable = trainable;
        l.wo.trainable = trainable;
        l.ff_w1.trainable = trainable;
        l.ff_b1.trainable = trainable;
        l.ff_w2.trainable = trainable;
        l.ff_b2.trainable = trainable;
    }
}

std::vector<double> sinusoidal_positions(std::size_t len, std::size_t dim) {
    std::vector<double> table(len * dim, 0.0);
    for (std::size_t pos = 0; pos < len; ++pos) {
        for (std::size_t i = 0; i < dim; i += 2) {
            double rate = std::pow(10000.0, static_cast<double>(i) /
                                                static_cast<double>(dim));
            double angle = static_cast<double>(pos) / rate;
            table[pos * dim + i] = std::sin(angle);
            if (i + 1 < dim) table[pos * dim + i + 1] = std::cos(angle);
        }
    }
    return table;
}

SemanticForward::SemanticForward(Tape& tape, SemanticEncoderParams& params)
    : tape_(tape), params_(params) {
    embed_leaf_ = &tape_.leaf(params_.token_embed);
    for (auto& l : params_.layers) {
        layer_leaves_.push_back({&tape_.leaf(l.wq), &tape_.leaf(l.wk),
                                 &tape_.leaf(l.wv), &tape_.leaf(l.wo),
                                 &tape_.leaf(l.ff_w1), &tape_.leaf(l.ff_b1),
                                 &tape_.leaf(l.ff_w2), &tape_.leaf(l.ff_b2)});
    }
}

Tensor& SemanticForward::operator()(const std::vector<int>& token_ids,
                                    std::vector<std::vector<double>>* attn_debug) {
    if (token_ids.empty()) throw SpecError("semantic_encode: empty token sequence");
    const std::size_t L = token_ids.size();
    const std::size_t d = params_.cfg.model_dim;
    const std::size_t heads = params_.cfg.heads;
    const std::size_t dh = d / heads;

    Tensor* x = &tape_.gather_rows(*embed_leaf_, token_ids);
    if (params_.cfg.use_positional) {
        Tensor& pos = tape_.constant({L, d}, sinusoidal_positions(L, d));
        x = &tape_.add(*x, pos);
    }

    for (auto& leaves : layer_leaves_) {
        Tensor& q = tape_.matmul(*x, *leaves.wq);
        Tensor& k = tape_.matmul(*x, *leaves.wk);
        Tensor& v = tape_.matmul(*x, *leaves.wv);
        std::vector<Tensor*> head_outs;
        for (std::size_t h = 0; h < heads; ++h) {
            Tensor& qh = tape_.slice_cols(q, h * dh, (h + 1) * dh);
            Tensor& kh = tape_.slice_cols(k, h * dh, (h + 1) * dh);
            Tensor& vh = tape_.slice_cols(v, h * dh, (h + 1) * dh);
            Tensor& scores =
                tape_.scale(tape_.matmul(qh, kh, false, true),
                            1.0 / std::sqrt(static_cast<double>(dh)));
            Tensor& attn = tape_.softmax_rows(scores);
            if (attn_debug) attn_debug->push_back(attn.val);
            head_outs.push_back(&tape_.matmul(attn, vh));
        }
        Tensor& merged = tape_.concat_cols(head_outs);
        Tensor& projected = tape_.matmul(merged, *leaves.wo);
        Tensor& attended = tape_.add(*x, projected);  // residual

        Tensor& hidden = tape_.relu(
            tape_.add_rowvec(tape_.matmul(attended, *leaves.ff_w1), *leaves.ff_b1));
        Tensor& ff =
            tape_.add_rowvec(tape_.matmul(hidden, *leaves.ff_w2), *leaves.ff_b2);
        x = &tape_.add(attended, ff);  // residual
    }
    return tape_.mean_rows(*x);
}

GcnParams GcnParams::create(const GcnConfig& cfg, const std::string& prefix,
                            std::mt19937_64& rng) {
    GcnParams p;
    p.cfg = cfg;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        std::size_t in = l == 0 ? cfg.in_dim : cfg.out_dim;
        Param w(prefix + ".w" + std::to_string(l), {in, cfg.out_dim});
        init_glorot(w, rng);
        p.weights.push_back(std::move(w));
    }
    return p;
}

void GcnParams::collect(ParamGroup& group) {
    for (auto& w : weights) group.add(w);
}

SparseMatrix normalized_adjacency(const BatchedGraph& batch) {
    int n = static_cast<int>(batch.nodes.size());
    std::vector<double> degree(static_cast<std::size_t>(n), 1.0);  // self-loops
    for (const auto& [a, b] : batch.edges) {
        degree[static_cast<std::size_t>(a)] += 1.0;
        degree[static_cast<std::size_t>(b)] += 1.0;
    }
    SparseMatrix adj;
    adj.n = n;
    for (int i = 0; i < n; ++i)
        adj.entries.push_back({i, i, 1.0 / degree[static_cast<std::size_t>(i)]});
    for (const auto& [a, b] : batch.edges) {
        double w = 1.0 / std::sqrt(degree[static_cast<std::size_t>(a)] *
                                   degree[static_cast<std::size_t>(b)]);
        adj.entries.push_back({a, b, w});
        adj.entries.push_back({b, a, w});
    }
    return adj;
}

Tensor& init_node_features(Tape& tape, const BatchedGraph& batch,
                           CharCnnForward& charcnn, const TokenizerConfig& tok) {
    if (batch.nodes.empty()) return tape.zeros({0, charcnn.out_dim()});
    std::unordered_map<std::string, Tensor*> cache;
    std::vector<Tensor*> rows;
    rows.reserve(batch.nodes.size());
    for (const auto& node : batch.nodes) {
        auto it = cache.find(node.surface);
        if (it == cache.end()) {
            Tensor& feat = charcnn(encode_chars(node.surface, tok).ids);
            it = cache.emplace(node.surface, &feat).first;
        }
        rows.push_back(it->second);
    }
    return tape.stack_rows(rows);
}

Tensor& gcn_forward(Tape& tape, const BatchedGraph& batch, Tensor& x0,
                    GcnParams& params) {
    if (x0.rows() != batch.nodes.size())
        throw ShapeError("gcn_forward: feature row count mismatch");
    SparseMatrix adj = normalized_adjacency(batch);
    Tensor* h = &x0;
    for (auto& w : params.weights) {
        Tensor& w_leaf = tape.leaf(w);
        if (batch.nodes.empty()) {
            h = &tape.zeros({0, w.dims[1]});
            continue;
        }
        h = &tape.relu(tape.matmul(tape.spmm(adj, *h), w_leaf));
    }
    return tape.segment_mean(*h, batch.segment, batch.num_segments());
}

}  // namespace u2g
