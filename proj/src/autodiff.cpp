#include "u2g/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "u2g/error.hpp"

namespace u2g {

namespace {
std::size_t dim_product(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}
}  // namespace

Param::Param(std::string n, std::vector<std::size_t> d, bool train)
    : name(std::move(n)), dims(std::move(d)), trainable(train) {
    value.assign(dim_product(dims), 0.0);
    grad.assign(value.size(), 0.0);
}

std::size_t Param::size() const { return value.size(); }

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

void ParamGroup::add(Param& p) {
    if (find(p.name)) throw SpecError("duplicate parameter name: " + p.name);
    params.push_back(&p);
}

Param* ParamGroup::find(const std::string& name) {
    for (Param* p : params)
        if (p->name == name) return p;
    return nullptr;
}

const Param* ParamGroup::find(const std::string& name) const {
    for (const Param* p : params)
        if (p->name == name) return p;
    return nullptr;
}

void ParamGroup::zero_grads() {
    for (Param* p : params) p->zero_grad();
}

void adam_step(ParamGroup& params, AdamState& state) {
    ++state.t;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (Param* p : params.params) {
        if (!p->trainable) continue;
        if (p->grad.size() != p->value.size())
            throw ShapeError("adam_step: missing gradient for " + p->name);
        auto& [m, v] = state.moments[p->name];
        if (m.size() != p->size()) {
            m.assign(p->size(), 0.0);
            v.assign(p->size(), 0.0);
        }
        for (std::size_t i = 0; i < p->size(); ++i) {
            double g = p->grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            p->value[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
        p->zero_grad();
    }
}

void init_glorot(Param& p, std::mt19937_64& rng) {
    std::size_t fan_out = p.dims.empty() ? 1 : p.dims.back();
    std::size_t fan_in = fan_out ? p.size() / fan_out : 1;
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : p.value) x = dist(rng);
}

void init_normal(Param& p, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& x : p.value) x = dist(rng);
}

Tensor& Tape::alloc(std::vector<std::size_t> dims) {
    nodes_.emplace_back();
    Tensor& t = nodes_.back();
    t.dims = std::move(dims);
    t.val.assign(dim_product(t.dims), 0.0);
    if (grad_enabled_) t.grad.assign(t.val.size(), 0.0);
    order_.push_back(&t);
    return t;
}

Tensor& Tape::leaf(Param& p) {
    Tensor& t = alloc(p.dims);
    t.val = p.value;
    if (grad_enabled_ && p.trainable) {
        Param* pp = &p;
        t.backprop = [pp](Tensor& self) {
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pp->grad[i] += self.grad[i];
        };
    }
    return t;
}

Tensor& Tape::constant(std::vector<std::size_t> dims, std::vector<double> values) {
    Tensor& t = alloc(std::move(dims));
    if (values.size() != t.val.size()) throw ShapeError("constant: value count mismatch");
    t.val = std::move(values);
    return t;
}

Tensor& Tape::zeros(std::vector<std::size_t> dims) { return alloc(std::move(dims)); }

Tensor& Tape::gather_rows(Tensor& table, const std::vector<int>& ids) {
    if (table.dims.size() != 2) throw ShapeError("gather_rows: table must be rank 2");
    std::size_t d = table.cols();
    Tensor& out = alloc({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto r = static_cast<std::size_t>(ids[i]);
        if (r >= table.rows()) throw ShapeError("gather_rows: id out of range");
        std::copy_n(&table.val[r * d], d, &out.val[i * d]);
    }
    if (grad_enabled_) {
        Tensor* src = &table;
        std::vector<int> idx = ids;
        out.backprop = [src, idx, d](Tensor& self) {
            for (std::size_t i = 0; i < idx.size(); ++i) {
                auto r = static_cast<std::size_t>(idx[i]);
                for (std::size_t c = 0; c < d; ++c)
                    src->grad[r * d + c] += self.grad[i * d + c];
            }
        };
    }
    return out;
}

Tensor& Tape::matmul(Tensor& a, Tensor& b, bool trans_a, bool trans_b) {
    if (a.dims.size() != 2 || b.dims.size() != 2)
        throw ShapeError("matmul: operands must be rank 2");
    std::size_t m = trans_a ? a.cols() : a.rows();
    std::size_t k = trans_a ? a.rows() : a.cols();
    std::size_t kb = trans_b ? b.cols() : b.rows();
    std::size_t n = trans_b ? b.rows() : b.cols();
    if (k != kb) throw ShapeError("matmul: inner dimensions mismatch");

    Tensor& out = alloc({m, n});
    // ikj ordering on the non-transposed layouts for cache friendliness
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            double av = trans_a ? a.val[kk * m + i] : a.val[i * k + kk];
            if (av == 0.0) continue;
            if (!trans_b) {
                const double* brow = &b.val[kk * n];
                double* orow = &out.val[i * n];
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            } else {
                for (std::size_t j = 0; j < n; ++j)
                    out.val[i * n + j] += av * b.val[j * k + kk];
            }
        }
    }
    if (grad_enabled_) {
        Tensor *pa = &a, *pb = &b;
        out.backprop = [pa, pb, m, k, n, trans_a, trans_b](Tensor& self) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double da = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        double g = self.grad[i * n + j];
                        double bv = trans_b ? pb->val[j * k + kk] : pb->val[kk * n + j];
                        da += g * bv;
                    }
                    if (trans_a)
                        pa->grad[kk * m + i] += da;
                    else
                        pa->grad[i * k + kk] += da;
                }
            }
            for (std::size_t kk = 0; kk < k; ++kk) {
                for (std::size_t j = 0; j < n; ++j) {
                    double db = 0.0;
                    for (std::size_t i = 0; i < m; ++i) {
                        double g = self.grad[i * n + j];
                        double av = trans_a ? pa->val[kk * m + i] : pa->val[i * k + kk];
                        db += g * av;
                    }
                    if (trans_b)
                        pb->grad[j * k + kk] += db;
                    else
                        pb->grad[kk * n + j] += db;
                }
            }
        };
    }
    return out;
}

Tensor& Tape::affine(Tensor& w, Tensor& x, Tensor* b) {
    if (w.dims.size() != 2) throw ShapeError("affine: W must be rank 2");
    std::size_t m = w.rows(), n = w.cols();
    if (x.size() != n) throw ShapeError("affine: x dimension mismatch");
    if (b && b->size() != m) throw ShapeError("affine: b dimension mismatch");
    Tensor& out = alloc({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = b ? b->val[i] : 0.0;
        const double* wrow = &w.val[i * n];
        for (std::size_t j = 0; j < n; ++j) s += wrow[j] * x.val[j];
        out.val[i] = s;
    }
    if (grad_enabled_) {
        Tensor *pw = &w, *px = &x, *pbias = b;
        out.backprop = [pw, px, pbias, m, n](Tensor& self) {
            for (std::size_t i = 0; i < m; ++i) {
                double g = self.grad[i];
                if (g == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    pw->grad[i * n + j] += g * px->val[j];
                    px->grad[j] += g * pw->val[i * n + j];
                }
                if (pbias) pbias->grad[i] += g;
            }
        };
    }
    return out;
}

Tensor& Tape::add(Tensor& a, Tensor& b) {
    if (a.dims != b.dims) throw ShapeError("add: shape mismatch");
    Tensor& out = alloc(a.dims);
    for (std::size_t i = 0; i < out.size(); ++i) out.val[i] = a.val[i] + b.val[i];
    if (grad_enabled_) {
        Tensor *pa = &a, *pb = &b;
        out.backprop = [pa, pb](Tensor& self) {
            for (std::size_t i = 0; i < self.size(); ++i) {
                pa->grad[i] += self.grad[i];
                pb->grad[i] += self.grad[i];
            }
        };
    }
    return out;
}

Tensor& Tape::add_rowvec(Tensor& x, Tensor& b) {
    if (x.dims.size() != 2 || b.size() != x.cols())
        throw ShapeError("add_rowvec: shape mismatch");
    std::size_t n = x.rows(), d = x.cols();
    Tensor& out = alloc(x.dims);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c)
            out.val[i * d + c] = x.val[i * d + c] + b.val[c];
    if (grad_enabled_) {
        Tensor *px = &x, *pb = &b;
        out.backprop = [px, pb, n, d](Tensor& self) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < d; ++c) {
                    px->grad[i * d + c] += self.grad[i * d + c];
                    pb->grad[c] += self.grad[i * d + c];
                }
        };
    }
    return out;
}

Tensor& Tape::scale(Tensor& x, double c) {
    Tensor& out = alloc(x.dims);
    for (std::size_t i = 0; i < out.size(); ++i) out.val[i] = c * x.val[i];
    if (grad_enabled_) {
        Tensor* px = &x;
        out.backprop = [px, c](Tensor& self) {
            for (std::size_t i = 0; i < self.size(); ++i)
                px->grad[i] += c * self.grad[i];
        };
    }
    return out;
}

Tensor& Tape::mul_scalar(Tensor& x, Tensor& s) {
    if (!s.scalar()) throw ShapeError("mul_scalar: s must be scalar");
    Tensor& out = alloc(x.dims);
    double sv = s.val[0];
    for (std::size_t i = 0; i < out.size(); ++i) out.val[i] = sv * x.val[i];
    if (grad_enabled_) {
        Tensor *px = &x, *ps = &s;
        out.backprop = [px, ps](Tensor& self) {
            double ds = 0.0;
            for (std::size_t i = 0; i < self.size(); ++i) {
                px->grad[i] += ps->val[0] * self.grad[i];
                ds += self.grad[i] * px->val[i];
            }
            ps->grad[0] += ds;
        };
    }
    return out;
}

Tensor& Tape::entry(Tensor& v, std::size_t i) {
    if (i >= v.size()) throw ShapeError("entry: index out of range");
    Tensor& out = alloc({});
    out.val[0] = v.val[i];
    if (grad_enabled_) {
        Tensor* pv = &v;
        out.backprop = [pv, i](Tensor& self) { pv->grad[i] += self.grad[0]; };
    }
    return out;
}

Tensor& Tape::relu(Tensor& x) {
    Tensor& out = alloc(x.dims);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.val[i] = x.val[i] > 0.0 ? x.val[i] : 0.0;
    if (grad_enabled_) {
        Tensor* px = &x;
        out.backprop = [px](Tensor& self) {
            for (std::size_t i = 0; i < self.size(); ++i)
                if (px->val[i] > 0.0) px->grad[i] += self.grad[i];
        };
    }
    return out;
}

Tensor& Tape::softmax_rows(Tensor& x) {
    std::size_t n = x.dims.size() == 2 ? x.rows() : 1;
    std::size_t d = x.dims.size() == 2 ? x.cols() : x.size();
    Tensor& out = alloc(x.dims);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = &x.val[i * d];
        double* yi = &out.val[i * d];
        double mx = xi[0];
        for (std::size_t c = 1; c < d; ++c) mx = std::max(mx, xi[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            yi[c] = std::exp(xi[c] - mx);
            sum += yi[c];
        }
        for (std::size_t c = 0; c < d; ++c) yi[c] /= sum;
    }
    if (grad_enabled_) {
        Tensor* px = &x;
        out.backprop = [px, n, d](Tensor& self) {
            for (std::size_t i = 0; i < n; ++i) {
                const double* y = &self.val[i * d];
                const double* g = &self.grad[i * d];
                double dot = 0.0;
                for (std::size_t c = 0; c < d; ++c) dot += g[c] * y[c];
                for (std::size_t c = 0; c < d; ++c)
                    px->grad[i * d + c] += y[c] * (g[c] - dot);
            }
        };
    }
    return out;
}

Tensor& Tape::max_over_time(Tensor& v) {
    if (v.size() == 0) throw ShapeError("max_over_time: empty input");
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v.val[i] > v.val[arg]) arg = i;  // first maximal index wins ties
    Tensor& out = alloc({});
    out.val[0] = v.val[arg];
    if (grad_enabled_) {
        Tensor* pv = &v;
        out.backprop = [pv, arg](Tensor& self) { pv->grad[arg] += self.grad[0]; };
    }
    return out;
}

Tensor& Tape::max_over_rows(Tensor& x) {
    if (x.dims.size() != 2 || x.rows() == 0)
        throw ShapeError("max_over_rows: need a non-empty matrix");
    std::size_t n = x.rows(), d = x.cols();
    std::vector<std::size_t> arg(d, 0);
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t i = 1; i < n; ++i)
            if (x.val[i * d + c] > x.val[arg[c] * d + c]) arg[c] = i;
    Tensor& out = alloc({d});
    for (std::size_t c = 0; c < d; ++c) out.val[c] = x.val[arg[c] * d + c];
    if (grad_enabled_) {
        Tensor* px = &x;
        out.backprop = [px, arg, d](Tensor& self) {
            for (std::size_t c = 0; c < d; ++c)
                px->grad[arg[c] * d + c] += self.grad[c];
        };
    }
    return out;
}

Tensor& Tape::mean_rows(Tensor& x) {
    if (x.dims.size() != 2 || x.rows() == 0)
        throw ShapeError("mean_rows: need a non-empty matrix");
    std::size_t n = x.rows(), d = x.cols();
    Tensor& out = alloc({d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) out.val[c] += x.val[i * d + c];
    for (std::size_t c = 0; c < d; ++c) out.val[c] /= static_cast<double>(n);
    if (grad_enabled_) {
        Tensor* px = &x;
        out.backprop = [px, n, d](Tensor& self) {
            double inv = 1.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < d; ++c)
                    px->grad[i * d + c] += inv * self.grad[c];
        };
    }
    return out;
}

Tensor& Tape::concat_vecs(const std::vector<Tensor*>& xs) {
    std::size_t total = 0;
    for (Tensor* x : xs) total += x->size();
    Tensor& out = alloc({total});
    std::size_t off = 0;
    for (Tensor* x : xs) {
        std::copy(x->val.begin(), x->val.end(), out.val.begin() + static_cast<long>(off));
        off += x->size();
    }
    if (grad_enabled_) {
        std::vector<Tensor*> srcs = xs;
        out.backprop = [srcs](Tensor& self) {
            std::size_t off = 0;
            for (Tensor* x : srcs) {
                for (std::size_t i = 0; i < x->size(); ++i)
                    x->grad[i] += self.grad[off + i];
                off += x->size();
            }
        };
    }
    return out;
}

Tensor& Tape::concat_cols(const std::vector<Tensor*>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty input");
    std::size_t n = xs[0]->rows();
    std::size_t total = 0;
    for (Tensor* x : xs) {
        if (x->dims.size() != 2 || x->rows() != n)
            throw ShapeError("concat_cols: row mismatch");
        total += x->cols();
    }
    Tensor& out = alloc({n, total});
    std::size_t coff = 0;
    for (Tensor* x : xs) {
        std::size_t d = x->cols();
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(&x->val[i * d], d, &out.val[i * total + coff]);
        coff += d;
    }
    if (grad_enabled_) {
        std::vector<Tensor*> srcs = xs;
        out.backprop = [srcs, n, total](Tensor& self) {
            std::size_t coff = 0;
            for (Tensor* x : srcs) {
                std::size_t d = x->cols();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t c = 0; c < d; ++c)
                        x->grad[i * d + c] += self.grad[i * total + coff + c];
                coff += d;
            }
        };
    }
    return out;
}

Tensor& Tape::slice_cols(Tensor& x, std::size_t c0, std::size_t c1) {
    if (x.dims.size() != 2 || c1 > x.cols() || c0 >= c1)
        throw ShapeError("slice_cols: bad range");
    std::size_t n = x.rows(), d = x.cols(), w = c1 - c0;
    Tensor& out = alloc({n, w});
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(&x.val[i * d + c0], w, &out.val[i * w]);
    if (grad_enabled_) {
        Tensor* px = &x;
        out.backprop = [px, n, d, c0, w](Tensor& self) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < w; ++c)
                    px->grad[i * d + c0 + c] += self.grad[i * w + c];
        };
    }
    return out;
}

Tensor& Tape::stack_rows(const std::vector<Tensor*>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows: empty input");
    std::size_t d = rows[0]->size();
    for (Tensor* r : rows)
        if (r->size() != d) throw ShapeError("stack_rows: row length mismatch");
    Tensor& out = alloc({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i]->val.begin(), rows[i]->val.end(),
                  out.val.begin() + static_cast<long>(i * d));
    if (grad_enabled_) {
        std::vector<Tensor*> srcs = rows;
        out.backprop = [srcs, d](Tensor& self) {
            for (std::size_t i = 0; i < srcs.size(); ++i)
                for (std::size_t c = 0; c < d; ++c)
                    srcs[i]->grad[c] += self.grad[i * d + c];
        };
    }
    return out;
}

Tensor& Tape::row(Tensor& x, std::size_t i) {
    if (x.dims.size() != 2 || i >= x.rows()) throw ShapeError("row: out of range");
    std::size_t d = x.cols();
    Tensor& out = alloc({d});
    std::copy_n(&x.val[i * d], d, out.val.data());
    if (grad_enabled_) {
        Tensor* px = &x;
        out.backprop = [px, i, d](Tensor& self) {
            for (std::size_t c = 0; c < d; ++c)
                px->grad[i * d + c] += self.grad[c];
        };
    }
    return out;
}

Tensor& Tape::conv1d_valid(Tensor& x, Tensor& w, Tensor& b) {
    if (x.dims.size() != 2 || w.dims.size() != 2 || x.cols() != w.cols())
        throw ShapeError("conv1d_valid: shape mismatch");
    if (!b.scalar()) throw ShapeError("conv1d_valid: bias must be scalar");
    std::size_t length = x.rows(), k = w.rows(), d = x.cols();
    if (length < k) throw ShapeError("conv1d_valid: input shorter than kernel");
    std::size_t out_len = length - k + 1;
    Tensor& out = alloc({out_len});
    for (std::size_t i = 0; i < out_len; ++i) {
        double s = b.val[0];
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < d; ++c)
                s += x.val[(i + r) * d + c] * w.val[r * d + c];
        out.val[i] = s;
    }
    if (grad_enabled_) {
        Tensor *px = &x, *pw = &w, *pb = &b;
        out.backprop = [px, pw, pb, out_len, k, d](Tensor& self) {
            for (std::size_t i = 0; i < out_len; ++i) {
                double g = self.grad[i];
                if (g == 0.0) continue;
                for (std::size_t r = 0; r < k; ++r)
                    for (std::size_t c = 0; c < d; ++c) {
                        px->grad[(i + r) * d + c] += g * pw->val[r * d + c];
                        pw->grad[r * d + c] += g * px->val[(i + r) * d + c];
                    }
                pb->grad[0] += g;
            }
        };
    }
    return out;
}

Tensor& Tape::conv1d_bank(Tensor& x, Tensor& w, Tensor& b) {
    if (x.dims.size() != 2 || w.dims.size() != 3 || x.cols() != w.dims[1])
        throw ShapeError("conv1d_bank: shape mismatch");
    std::size_t length = x.rows(), k = w.dims[0], d = w.dims[1], n = w.dims[2];
    if (b.size() != n) throw ShapeError("conv1d_bank: bias length mismatch");
    if (length < k) throw ShapeError("conv1d_bank: input shorter than kernel");
    std::size_t out_len = length - k + 1;
    Tensor& out = alloc({out_len, n});
    for (std::size_t i = 0; i < out_len; ++i) {
        double* orow = &out.val[i * n];
        std::copy(b.val.begin(), b.val.end(), orow);
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < d; ++c) {
                double xv = x.val[(i + r) * d + c];
                if (xv == 0.0) continue;
                const double* wrow = &w.val[(r * d + c) * n];
                for (std::size_t ch = 0; ch < n; ++ch) orow[ch] += xv * wrow[ch];
            }
    }
    if (grad_enabled_) {
        Tensor *px = &x, *pw = &w, *pb = &b;
        out.backprop = [px, pw, pb, out_len, k, d, n](Tensor& self) {
            for (std::size_t i = 0; i < out_len; ++i) {
                const double* g = &self.grad[i * n];
                for (std::size_t r = 0; r < k; ++r)
                    for (std::size_t c = 0; c < d; ++c) {
                        double xv = px->val[(i + r) * d + c];
                        const double* wrow = &pw->val[(r * d + c) * n];
                        double* gwrow = &pw->grad[(r * d + c) * n];
                        double dx = 0.0;
                        for (std::size_t ch = 0; ch < n; ++ch) {
                            dx += g[ch] * wrow[ch];
                            gwrow[ch] += g[ch] * xv;
                        }
                        px->grad[(i + r) * d + c] += dx;
                    }
                for (std::size_t ch = 0; ch < n; ++ch) pb->grad[ch] += g[ch];
            }
        };
    }
    return out;
}

Tensor& Tape::segment_mean(Tensor& x, const std::vector<int>& segments,
                           int num_segments) {
    if (x.dims.size() != 2 || segments.size() != x.rows())
        throw ShapeError("segment_mean: shape mismatch");
    auto S = static_cast<std::size_t>(num_segments);
    std::size_t d = x.cols();
    std::vector<std::size_t> counts(S, 0);
    for (int s : segments) {
        if (s < 0 || static_cast<std::size_t>(s) >= S)
            throw ShapeError("segment_mean: segment id out of range");
        ++counts[static_cast<std::size_t>(s)];
    }
    Tensor& out = alloc({S, d});  // empty segments stay zero rows
    for (std::size_t i = 0; i < segments.size(); ++i) {
        auto s = static_cast<std::size_t>(segments[i]);
        for (std::size_t c = 0; c < d; ++c)
            out.val[s * d + c] += x.val[i * d + c] / static_cast<double>(counts[s]);
    }
    if (grad_enabled_) {
        Tensor* px = &x;
        std::vector<int> segs = segments;
        out.backprop = [px, segs, counts, d](Tensor& self) {
            for (std::size_t i = 0; i < segs.size(); ++i) {
                auto s = static_cast<std::size_t>(segs[i]);
                double inv = 1.0 / static_cast<double>(counts[s]);
                for (std::size_t c = 0; c < d; ++c)
                    px->grad[i * d + c] += inv * self.grad[s * d + c];
            }
        };
    }
    return out;
}

Tensor& Tape::spmm(const SparseMatrix& a, Tensor& x) {
    if (x.dims.size() != 2 || x.rows() != static_cast<std::size_t>(a.n))
        throw ShapeError("spmm: dimension mismatch");
    std::size_t d = x.cols();
    Tensor& out = alloc(x.dims);
    for (const auto& e : a.entries) {
        const double* src = &x.val[static_cast<std::size_t>(e.col) * d];
        double* dst = &out.val[static_cast<std::size_t>(e.row) * d];
        for (std::size_t c = 0; c < d; ++c) dst[c] += e.value * src[c];
    }
    if (grad_enabled_) {
        Tensor* px = &x;
        std::vector<SparseMatrix::Entry> entries = a.entries;
        out.backprop = [px, entries, d](Tensor& self) {
            for (const auto& e : entries) {
                const double* g = &self.grad[static_cast<std::size_t>(e.row) * d];
                double* dst = &px->grad[static_cast<std::size_t>(e.col) * d];
                for (std::size_t c = 0; c < d; ++c) dst[c] += e.value * g[c];
            }
        };
    }
    return out;
}

Tensor& Tape::cross_entropy(Tensor& probs, const std::vector<int>& labels,
                            const std::vector<double>* weights) {
    if (probs.dims.size() != 2 || labels.size() != probs.rows())
        throw ShapeError("cross_entropy: shape mismatch");
    std::size_t B = probs.rows(), C = probs.cols();
    constexpr double kClamp = 1e-12;
    for (std::size_t i = 0; i < B; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c) s += probs.val[i * C + c];
        if (std::abs(s - 1.0) > 1e-6)
            throw ShapeError("cross_entropy: row does not sum to 1");
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= C)
            throw LabelError("cross_entropy: label out of range");
    }
    double wsum = 0.0;
    std::vector<double> w(B, 1.0);
    if (weights) {
        if (weights->size() != B) throw ShapeError("cross_entropy: weights size");
        w = *weights;
    }
    for (double wi : w) wsum += wi;

    Tensor& out = alloc({});
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double p = probs.val[i * C + static_cast<std::size_t>(labels[i])];
        loss -= w[i] * std::log(std::max(p, kClamp));
    }
    out.val[0] = loss / wsum;
    if (grad_enabled_) {
        Tensor* pp = &probs;
        std::vector<int> lab = labels;
        out.backprop = [pp, lab, w, wsum, C](Tensor& self) {
            double g = self.grad[0];
            for (std::size_t i = 0; i < lab.size(); ++i) {
                std::size_t idx = i * C + static_cast<std::size_t>(lab[i]);
                double p = pp->val[idx];
                if (p >= kClamp)  // clamped region has zero slope
                    pp->grad[idx] -= g * w[i] / (wsum * p);
            }
        };
    }
    return out;
}

void Tape::backward(Tensor& loss) {
    if (!grad_enabled_) throw SpecError("backward: tape built with gradients disabled");
    if (!loss.scalar()) throw ShapeError("backward: loss must be scalar");
    for (Tensor* t : order_) std::fill(t->grad.begin(), t->grad.end(), 0.0);
    loss.grad[0] = 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace u2g
