#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace u2g {

// Trainable leaf living outside any tape. Gradients accumulate across
// backward calls until the optimizer (or an explicit reset) zeroes them.
struct Param {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> value;
    std::vector<double> grad;
    bool trainable = true;

    Param() = default;
    Param(std::string n, std::vector<std::size_t> d, bool train = true);
    std::size_t size() const;
    void zero_grad();
};

// Flat, name-indexed view over a model's parameters.
struct ParamGroup {
    std::vector<Param*> params;

    void add(Param& p);
    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;
    void zero_grads();
};

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;
    std::unordered_map<std::string, std::pair<std::vector<double>, std::vector<double>>>
        moments;  // name -> (m, v)
};

// Standard Adam with bias correction; zeroes gradients afterwards.
void adam_step(ParamGroup& params, AdamState& state);

// Glorot-uniform for weights (fan_out = last dim), N(0, stddev) for
// embeddings, zeros for biases. All driven by one seeded generator.
void init_glorot(Param& p, std::mt19937_64& rng);
void init_normal(Param& p, double stddev, std::mt19937_64& rng);

// Constant sparse matrix (no gradient), used for normalized adjacencies.
struct SparseMatrix {
    int n = 0;  // square, n x n
    struct Entry {
        int row, col;
        double value;
    };
    std::vector<Entry> entries;
};

// One forward/backward computation. Nodes are tape-owned; handles are
// references valid for the tape's lifetime. Confined to a single thread.
class Tape {
public:
    struct Tensor {
        std::vector<std::size_t> dims;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void(Tensor&)> backprop;

        std::size_t size() const { return val.size(); }
        std::size_t rows() const { return dims.empty() ? 1 : dims[0]; }
        std::size_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }
        bool scalar() const { return val.size() == 1 && dims.size() <= 1; }
    };

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Tensor& leaf(Param& p);
    Tensor& constant(std::vector<std::size_t> dims, std::vector<double> values);
    Tensor& zeros(std::vector<std::size_t> dims);

    Tensor& gather_rows(Tensor& table, const std::vector<int>& ids);
    Tensor& matmul(Tensor& a, Tensor& b, bool trans_a = false, bool trans_b = false);
    // W[m x n] * x[n] + b[m]; pass b = nullptr for a plain matvec
    Tensor& affine(Tensor& w, Tensor& x, Tensor* b);
    Tensor& add(Tensor& a, Tensor& b);
    Tensor& add_rowvec(Tensor& x, Tensor& b);
    Tensor& scale(Tensor& x, double c);
    Tensor& mul_scalar(Tensor& x, Tensor& s);  // s is a scalar node
    Tensor& entry(Tensor& v, std::size_t i);   // scalar view of one element
    Tensor& relu(Tensor& x);
    Tensor& softmax_rows(Tensor& x);  // rank-1 input treated as a single row
    Tensor& max_over_time(Tensor& v);           // vector -> scalar, first max on ties
    Tensor& max_over_rows(Tensor& x);           // [L x n] -> [n], column-wise
    Tensor& mean_rows(Tensor& x);               // [n x d] -> [d]
    Tensor& concat_vecs(const std::vector<Tensor*>& xs);
    Tensor& concat_cols(const std::vector<Tensor*>& xs);
    Tensor& slice_cols(Tensor& x, std::size_t c0, std::size_t c1);
    Tensor& stack_rows(const std::vector<Tensor*>& rows);
    Tensor& row(Tensor& x, std::size_t i);
    // single-channel valid 1-D convolution; b is a scalar node
    Tensor& conv1d_valid(Tensor& x, Tensor& w, Tensor& b);
    // all channels of one kernel width at once: W dims {k, d, n}, b[n]
    Tensor& conv1d_bank(Tensor& x, Tensor& w, Tensor& b);
    Tensor& segment_mean(Tensor& x, const std::vector<int>& segments, int num_segments);
    Tensor& spmm(const SparseMatrix& a, Tensor& x);
    Tensor& cross_entropy(Tensor& probs, const std::vector<int>& labels,
                          const std::vector<double>* weights = nullptr);

    void backward(Tensor& loss);

    std::size_t node_count() const { return order_.size(); }

private:
    Tensor& alloc(std::vector<std::size_t> dims);

    std::deque<Tensor> nodes_;
    std::vector<Tensor*> order_;
    bool grad_enabled_;
};

using Tensor = Tape::Tensor;

}  // namespace u2g
