#pragma once

// Tape-based reverse-mode autodiff over basic_tensor<T>. Ops append nodes to
// the tape; backward() walks it in reverse creation order, which is a valid
// topological order and fixes the gradient accumulation sequence, so repeated
// runs are bit-identical. Instantiated with T=float for training and
// T=double for the finite-difference harness.

#include <cmath>
#include <cstring>
#include <functional>
#include <type_traits>
#include <vector>

#include "eagle/kernels.hpp"
#include "eagle/quant.hpp"
#include "eagle/tensor.hpp"

namespace eagle {

template <typename T>
class graph {
  public:
    using tens = basic_tensor<T>;

    struct value {
        int32_t idx = -1;
        bool ok() const { return idx >= 0; }
    };

    graph() = default;
    graph(const graph&) = delete;
    graph& operator=(const graph&) = delete;

    value input(tens v, bool requires_grad = false) {
        nodes_.push_back(node{std::move(v), tens{}, requires_grad, nullptr});
        return value{static_cast<int32_t>(nodes_.size() - 1)};
    }

    value constant(tens v) { return input(std::move(v), false); }

    const tens& val(value v) const { return nodes_[v.idx].val; }
    const tens& grad(value v) const { return nodes_[v.idx].grad; }
    bool requires_grad(value v) const { return nodes_[v.idx].requires_grad; }
    size_t size() const { return nodes_.size(); }

    // y = x * w^T, w stored [out x in]
    value linear(value x, value w) {
        const tens& xv = val(x);
        const tens& wv = val(w);
        if (xv.ndim() != 2 || wv.ndim() != 2 || xv.shape[1] != wv.shape[1])
            throw shape_error("linear: " + shape_str(xv.shape) + " x " + shape_str(wv.shape) + "^T");
        value y = make(matmul_nt(xv, wv), {x, w});
        set_back(y, [this, x, w, y] {
            const tens& dy = grad_of(y);
            if (requires_grad(x)) accum(x, eagle::matmul(dy, val(w)));
            if (requires_grad(w)) accum(w, matmul_tn(dy, val(x)));
        });
        return y;
    }

    value matmul(value a, value b) {
        value y = make(eagle::matmul(val(a), val(b)), {a, b});
        set_back(y, [this, a, b, y] {
            const tens& dy = grad_of(y);
            if (requires_grad(a)) accum(a, matmul_nt(dy, val(b)));
            if (requires_grad(b)) accum(b, matmul_tn(val(a), dy));
        });
        return y;
    }

    value add(value a, value b) { return binary(binary_op::add, a, b); }
    value mul(value a, value b) { return binary(binary_op::mul, a, b); }

    value scale(value a, T c) {
        value y = make(eagle::scale(val(a), c), {a});
        set_back(y, [this, a, y, c] {
            if (requires_grad(a)) accum(a, eagle::scale(grad_of(y), c));
        });
        return y;
    }

    value silu(value x) {
        value y = make(eagle::silu(val(x)), {x});
        set_back(y, [this, x, y] {
            if (!requires_grad(x)) return;
            const tens& xv = val(x);
            const tens& dy = grad_of(y);
            tens dx(xv.shape);
            for (int64_t i = 0; i < xv.numel(); ++i) {
                const T s = T(1) / (T(1) + std::exp(-xv.data[i]));
                dx.data[i] = dy.data[i] * s * (T(1) + xv.data[i] * (T(1) - s));
            }
            accum(x, std::move(dx));
        });
        return y;
    }

    value gelu(value x) {
        value y = make(eagle::gelu(val(x)), {x});
        set_back(y, [this, x, y] {
            if (!requires_grad(x)) return;
            const T c0 = T(0.7978845608), c1 = T(0.044715);
            const tens& xv = val(x);
            const tens& dy = grad_of(y);
            tens dx(xv.shape);
            for (int64_t i = 0; i < xv.numel(); ++i) {
                const T v = xv.data[i];
                const T u = c0 * (v + c1 * v * v * v);
                const T th = std::tanh(u);
                const T sech2 = T(1) - th * th;
                dx.data[i] = dy.data[i] * (T(0.5) * (T(1) + th) +
                                           T(0.5) * v * sech2 * c0 * (T(1) + T(3) * c1 * v * v));
            }
            accum(x, std::move(dx));
        });
        return y;
    }

    value rmsnorm(value x, value gain, T eps) {
        value y = make(eagle::rmsnorm(val(x), val(gain), eps), {x, gain});
        set_back(y, [this, x, gain, y, eps] {
            const tens& xv = val(x);
            const tens& gv = val(gain);
            const tens& dy = grad_of(y);
            const int64_t d = xv.last_dim(), rows = xv.rows2d();
            tens dx(xv.shape);
            tens dg(gv.shape);
            for (int64_t r = 0; r < rows; ++r) {
                const T* xp = xv.row(r);
                const T* dp = dy.data.data() + r * d;
                const T inv = T(1) / std::sqrt(sum_squares(xp, d) / T(d) + eps);
                T proj = T(0);
                for (int64_t j = 0; j < d; ++j) proj += dp[j] * gv.data[j] * xp[j];
                proj *= inv * inv * inv / T(d);
                for (int64_t j = 0; j < d; ++j) {
                    dx.data[r * d + j] = inv * gv.data[j] * dp[j] - xp[j] * proj;
                    dg.data[j] += dp[j] * xp[j] * inv;
                }
            }
            if (requires_grad(x)) accum(x, std::move(dx));
            if (requires_grad(gain)) accum(gain, std::move(dg));
        });
        return y;
    }

    value softmax_lastdim(value x) {
        value y = make(eagle::softmax_lastdim(val(x)), {x});
        set_back(y, [this, x, y] {
            if (!requires_grad(x)) return;
            const tens& yv = val(y);
            const tens& dy = grad_of(y);
            const int64_t d = yv.last_dim(), rows = yv.rows2d();
            tens dx(yv.shape);
            for (int64_t r = 0; r < rows; ++r) {
                const T* yp = yv.row(r);
                const T* dp = dy.data.data() + r * d;
                const T s = dot(dp, yp, d);
                for (int64_t j = 0; j < d; ++j) dx.data[r * d + j] = yp[j] * (dp[j] - s);
            }
            accum(x, std::move(dx));
        });
        return y;
    }

    // Rotary position encoding, pairwise within each head; row r sits at
    // position pos_offset + r.
    value rope(value x, int n_heads, int64_t pos_offset, T theta) {
        const tens& xv = val(x);
        if (xv.ndim() != 2 || xv.shape[1] % (2 * n_heads) != 0)
            throw shape_error("rope: width " + shape_str(xv.shape) + " not divisible by 2*heads");
        value y = make(rope_apply(xv, n_heads, pos_offset, theta, false), {x});
        set_back(y, [this, x, y, n_heads, pos_offset, theta] {
            if (requires_grad(x))
                accum(x, rope_apply(grad_of(y), n_heads, pos_offset, theta, true));
        });
        return y;
    }

    // Multi-head scaled dot-product attention over [rows x d] activations.
    // q may have fewer rows than k/v (cross attention); causal requires equal
    // row counts. Softmax probabilities are saved for the backward pass.
    value attention(value q, value k, value v, int n_heads, bool causal) {
        const tens& qv = val(q);
        const tens& kv = val(k);
        const tens& vv = val(v);
        if (qv.ndim() != 2 || kv.ndim() != 2 || vv.ndim() != 2 || qv.shape[1] != kv.shape[1] ||
            kv.shape != vv.shape || qv.shape[1] % n_heads != 0)
            throw shape_error("attention: bad shapes " + shape_str(qv.shape) + ", " +
                              shape_str(kv.shape) + ", " + shape_str(vv.shape));
        if (causal && qv.shape[0] != kv.shape[0])
            throw shape_error("attention: causal attention needs equal q/k rows");
        const int64_t m = qv.shape[0], n = kv.shape[0], d = qv.shape[1];
        const int64_t dh = d / n_heads;
        const T sc = T(1) / std::sqrt(static_cast<T>(dh));

        auto probs = std::make_shared<tens>(std::vector<int64_t>{static_cast<int64_t>(n_heads), m, n});
        tens out({m, d});
#pragma omp parallel for schedule(static) collapse(2)
        for (int h = 0; h < n_heads; ++h) {
            for (int64_t i = 0; i < m; ++i) {
                T* p = probs->data.data() + (static_cast<int64_t>(h) * m + i) * n;
                const int64_t lim = causal ? i + 1 : n;
                T mx = -std::numeric_limits<T>::infinity();
                for (int64_t j = 0; j < lim; ++j) {
                    p[j] = sc * dot(qv.row(i) + h * dh, kv.row(j) + h * dh, dh);
                    mx = std::max(mx, p[j]);
                }
                T sum = T(0);
                for (int64_t j = 0; j < lim; ++j) {
                    p[j] = std::exp(p[j] - mx);
                    sum += p[j];
                }
                const T inv = T(1) / sum;
                for (int64_t j = 0; j < lim; ++j) p[j] *= inv;
                for (int64_t j = lim; j < n; ++j) p[j] = T(0);
                T* orow = out.row(i) + h * dh;
                for (int64_t t = 0; t < dh; ++t) orow[t] = T(0);
                for (int64_t j = 0; j < lim; ++j) axpy(orow, vv.row(j) + h * dh, p[j], dh);
            }
        }

        value yv_ = make(std::move(out), {q, k, v});
        set_back(yv_, [this, q, k, v, yv_, n_heads, probs, sc] {
            const tens& qv2 = val(q);
            const tens& kv2 = val(k);
            const tens& vv2 = val(v);
            const tens& dy = grad_of(yv_);
            const int64_t m = qv2.shape[0], n = kv2.shape[0], d = qv2.shape[1];
            const int64_t dh = d / n_heads;
            tens dq(qv2.shape), dk(kv2.shape), dv(vv2.shape);
            tens ds({static_cast<int64_t>(n_heads), m, n});
#pragma omp parallel for schedule(static) collapse(2)
            for (int h = 0; h < n_heads; ++h) {
                for (int64_t i = 0; i < m; ++i) {
                    const T* p = probs->data.data() + (static_cast<int64_t>(h) * m + i) * n;
                    T* dsrow = ds.data.data() + (static_cast<int64_t>(h) * m + i) * n;
                    // dp then ds = p * (dp - sum(dp*p))
                    T acc = T(0);
                    for (int64_t j = 0; j < n; ++j) {
                        const T dp = p[j] == T(0) ? T(0) : dot(dy.row(i) + h * dh, vv2.row(j) + h * dh, dh);
                        dsrow[j] = dp;
                        acc += dp * p[j];
                    }
                    for (int64_t j = 0; j < n; ++j) dsrow[j] = p[j] * (dsrow[j] - acc);
                    T* dqrow = dq.row(i) + h * dh;
                    for (int64_t j = 0; j < n; ++j)
                        if (dsrow[j] != T(0)) axpy(dqrow, kv2.row(j) + h * dh, sc * dsrow[j], dh);
                }
            }
#pragma omp parallel for schedule(static) collapse(2)
            for (int h = 0; h < n_heads; ++h) {
                for (int64_t j = 0; j < n; ++j) {
                    T* dkrow = dk.row(j) + h * dh;
                    T* dvrow = dv.row(j) + h * dh;
                    for (int64_t i = 0; i < m; ++i) {
                        const T* p = probs->data.data() + (static_cast<int64_t>(h) * m + i) * n;
                        const T dsij = ds.data[(static_cast<int64_t>(h) * m + i) * n + j];
                        if (dsij != T(0)) axpy(dkrow, qv2.row(i) + h * dh, sc * dsij, dh);
                        if (p[j] != T(0)) axpy(dvrow, dy.row(i) + h * dh, p[j], dh);
                    }
                }
            }
            if (requires_grad(q)) accum(q, std::move(dq));
            if (requires_grad(k)) accum(k, std::move(dk));
            if (requires_grad(v)) accum(v, std::move(dv));
        });
        return yv_;
    }

    value embed(value table, std::vector<int> ids) {
        const tens& tv = val(table);
        if (tv.ndim() != 2) throw shape_error("embed: table must be 2-d");
        if (ids.empty()) throw std::invalid_argument("embed: empty id list");
        const int64_t d = tv.shape[1];
        tens out({static_cast<int64_t>(ids.size()), d});
        for (size_t r = 0; r < ids.size(); ++r) {
            if (ids[r] < 0 || ids[r] >= tv.shape[0])
                throw std::invalid_argument("embed: token id " + std::to_string(ids[r]) +
                                            " out of range");
            std::memcpy(out.row(static_cast<int64_t>(r)), tv.row(ids[r]), sizeof(T) * d);
        }
        value y = make(std::move(out), {table});
        set_back(y, [this, table, y, ids = std::move(ids)] {
            if (!requires_grad(table)) return;
            const tens& dy = grad_of(y);
            const int64_t d = dy.shape[1];
            tens dt(val(table).shape);
            for (size_t r = 0; r < ids.size(); ++r)
                axpy(dt.row(ids[r]), dy.row(static_cast<int64_t>(r)), T(1), d);
            accum(table, std::move(dt));
        });
        return y;
    }

    // groups of `factor` consecutive rows concatenated widthwise (a strided
    // 1-d conv patchify); missing tail rows are zero
    value merge_rows(value x, int factor) {
        const tens& xv = val(x);
        const int64_t rows = xv.shape[0], w = xv.shape[1];
        const int64_t out_rows = (rows + factor - 1) / factor;
        tens out({out_rows, w * factor});
        for (int64_t t = 0; t < out_rows; ++t)
            for (int f = 0; f < factor; ++f) {
                const int64_t src = t * factor + f;
                if (src < rows)
                    std::memcpy(out.row(t) + f * w, xv.row(src), sizeof(T) * w);
            }
        value y = make(std::move(out), {x});
        set_back(y, [this, x, y, factor] {
            if (!requires_grad(x)) return;
            const tens& dy = grad_of(y);
            const tens& xv2 = val(x);
            const int64_t rows = xv2.shape[0], w = xv2.shape[1];
            tens dx(xv2.shape);
            for (int64_t t = 0; t < dy.shape[0]; ++t)
                for (int f = 0; f < factor; ++f) {
                    const int64_t src = t * factor + f;
                    if (src < rows)
                        std::memcpy(dx.row(src), dy.row(t) + f * w, sizeof(T) * w);
                }
            accum(x, std::move(dx));
        });
        return y;
    }

    // mean over groups of `factor` consecutive rows; the tail group averages
    // however many rows it has
    value mean_pool_rows(value x, int factor) {
        const tens& xv = val(x);
        const int64_t rows = xv.shape[0], w = xv.shape[1];
        const int64_t out_rows = (rows + factor - 1) / factor;
        tens out({out_rows, w});
        for (int64_t t = 0; t < out_rows; ++t) {
            const int64_t lo = t * factor, hi = std::min<int64_t>(lo + factor, rows);
            T* orow = out.row(t);
            for (int64_t r = lo; r < hi; ++r) axpy(orow, xv.row(r), T(1), w);
            const T inv = T(1) / static_cast<T>(hi - lo);
            for (int64_t j = 0; j < w; ++j) orow[j] *= inv;
        }
        value y = make(std::move(out), {x});
        set_back(y, [this, x, y, factor] {
            if (!requires_grad(x)) return;
            const tens& dy = grad_of(y);
            const tens& xv2 = val(x);
            const int64_t rows = xv2.shape[0], w = xv2.shape[1];
            tens dx(xv2.shape);
            for (int64_t t = 0; t < dy.shape[0]; ++t) {
                const int64_t lo = t * factor, hi = std::min<int64_t>(lo + factor, rows);
                const T inv = T(1) / static_cast<T>(hi - lo);
                for (int64_t r = lo; r < hi; ++r) axpy(dx.row(r), dy.row(t), inv, w);
            }
            accum(x, std::move(dx));
        });
        return y;
    }

    value concat_rows(const std::vector<value>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_rows: empty part list");
        const int64_t w = val(parts[0]).shape[1];
        int64_t total = 0;
        for (value p : parts) {
            if (val(p).ndim() != 2 || val(p).shape[1] != w)
                throw shape_error("concat_rows: width mismatch");
            total += val(p).shape[0];
        }
        tens out({total, w});
        int64_t pos = 0;
        for (value p : parts) {
            const tens& pv = val(p);
            std::memcpy(out.row(pos), pv.data.data(), sizeof(T) * pv.data.size());
            pos += pv.shape[0];
        }
        value y = make(std::move(out), parts);
        set_back(y, [this, parts, y] {
            const tens& dy = grad_of(y);
            const int64_t w = dy.shape[1];
            int64_t pos = 0;
            for (value p : parts) {
                const int64_t rows = val(p).shape[0];
                if (requires_grad(p)) {
                    tens dp({rows, w});
                    std::memcpy(dp.data.data(), dy.row(pos), sizeof(T) * dp.data.size());
                    accum(p, std::move(dp));
                }
                pos += rows;
            }
        });
        return y;
    }

    // copy of rows [start, start+len)
    value slice_rows(value x, int64_t start, int64_t len) {
        const tens& xv = val(x);
        if (start < 0 || len < 1 || start + len > xv.shape[0])
            throw shape_error("slice_rows: range out of bounds");
        const int64_t w = xv.shape[1];
        tens out({len, w});
        std::memcpy(out.data.data(), xv.row(start), sizeof(T) * out.data.size());
        value y = make(std::move(out), {x});
        set_back(y, [this, x, y, start, len] {
            if (!requires_grad(x)) return;
            const tens& dy = grad_of(y);
            tens dx(val(x).shape);
            std::memcpy(dx.row(start), dy.data.data(), sizeof(T) * dy.data.size());
            (void)len;
            accum(x, std::move(dx));
        });
        return y;
    }

    value reduce_sum(value x) {
        const tens& xv = val(x);
        T s = T(0);
        for (int64_t i = 0; i < xv.numel(); ++i) s += xv.data[i];
        tens out({1});
        out.data[0] = s;
        value y = make(std::move(out), {x});
        set_back(y, [this, x, y] {
            if (!requires_grad(x)) return;
            const T g = grad_of(y).data[0];
            accum(x, full(val(x).shape, g));
        });
        return y;
    }

    // Simulated quantization with straight-through gradients; float graphs
    // only (quantization scales are single precision by definition).
    value fake_quant(value w, const quant_spec& spec) {
        if constexpr (!std::is_same_v<T, float>) {
            (void)spec;
            throw std::logic_error("fake_quant: only supported on float graphs");
        } else {
            auto scales = std::make_shared<std::vector<float>>(group_scales(val(w), spec));
            value y = make(eagle::fake_quant(val(w), spec), {w});
            set_back(y, [this, w, y, spec, scales] {
                if (requires_grad(w)) accum(w, ste_grad(grad_of(y), val(w), spec, *scales));
            });
            return y;
        }
    }

    // mean cross-entropy over rows where mask is nonzero, next-token targets
    value cross_entropy(value logits, std::vector<int> targets, std::vector<uint8_t> mask) {
        const tens& lv = val(logits);
        if (lv.ndim() != 2 || static_cast<int64_t>(targets.size()) != lv.shape[0] ||
            mask.size() != targets.size())
            throw shape_error("cross_entropy: logits " + shape_str(lv.shape) + " vs " +
                              std::to_string(targets.size()) + " targets");
        int64_t count = 0;
        for (uint8_t m : mask) count += m ? 1 : 0;
        if (count == 0) throw std::invalid_argument("cross_entropy: empty target mask");
        const int64_t vsz = lv.shape[1];
        T loss = T(0);
        for (int64_t r = 0; r < lv.shape[0]; ++r) {
            if (!mask[r]) continue;
            const T* p = lv.row(r);
            T mx = p[0];
            for (int64_t j = 1; j < vsz; ++j) mx = std::max(mx, p[j]);
            T sum = T(0);
            for (int64_t j = 0; j < vsz; ++j) sum += std::exp(p[j] - mx);
            loss += std::log(sum) + mx - p[targets[r]];
        }
        tens out({1});
        out.data[0] = loss / static_cast<T>(count);
        value y = make(std::move(out), {logits});
        set_back(y, [this, logits, y, targets = std::move(targets), mask = std::move(mask), count] {
            if (!requires_grad(logits)) return;
            const tens& lv2 = val(logits);
            const T g = grad_of(y).data[0] / static_cast<T>(count);
            const int64_t vsz = lv2.shape[1];
            tens dl(lv2.shape);
            for (int64_t r = 0; r < lv2.shape[0]; ++r) {
                if (!mask[r]) continue;
                const T* p = lv2.row(r);
                T* dp = dl.row(r);
                T mx = p[0];
                for (int64_t j = 1; j < vsz; ++j) mx = std::max(mx, p[j]);
                T sum = T(0);
                for (int64_t j = 0; j < vsz; ++j) {
                    dp[j] = std::exp(p[j] - mx);
                    sum += dp[j];
                }
                const T inv = T(1) / sum;
                for (int64_t j = 0; j < vsz; ++j) dp[j] *= inv * g;
                dp[targets[r]] -= g;
            }
            accum(logits, std::move(dl));
        });
        return y;
    }

    void backward(value loss) {
        if (val(loss).numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                        shape_str(val(loss).shape));
        if (!nodes_[loss.idx].requires_grad)
            throw std::invalid_argument("backward: loss does not depend on any gradient input");
        ensure_grad(loss.idx);
        nodes_[loss.idx].grad.data[0] = T(1);
        for (int32_t i = loss.idx; i >= 0; --i) {
            node& n = nodes_[i];
            if (n.requires_grad && n.back && n.grad.numel() > 0) n.back();
        }
    }

    static tens rope_apply(const tens& x, int n_heads, int64_t pos_offset, T theta, bool inverse) {
        const int64_t rows = x.shape[0], d = x.shape[1];
        const int64_t dh = d / n_heads;
        std::vector<T> freqs(static_cast<size_t>(dh / 2));
        for (int64_t i = 0; i < dh / 2; ++i)
            freqs[i] = std::pow(theta, -static_cast<T>(2 * i) / static_cast<T>(dh));
        tens y(x.shape);
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            const T pos = static_cast<T>(pos_offset + r);
            const T* xp = x.row(r);
            T* yp = y.data.data() + r * d;
            for (int64_t i = 0; i < dh / 2; ++i) {
                T a = pos * freqs[i];
                if (inverse) a = -a;
                const T c = std::cos(a), s = std::sin(a);
                for (int h = 0; h < n_heads; ++h) {
                    const int64_t k0 = h * dh + 2 * i, k1 = k0 + 1;
                    yp[k0] = xp[k0] * c - xp[k1] * s;
                    yp[k1] = xp[k0] * s + xp[k1] * c;
                }
            }
        }
        return y;
    }

  private:
    struct node {
        tens val;
        tens grad;
        bool requires_grad = false;
        std::function<void()> back;
    };

    std::vector<node> nodes_;

    value make(tens v, const std::vector<value>& deps) {
        bool rg = false;
        for (value d : deps) rg = rg || nodes_[d.idx].requires_grad;
        nodes_.push_back(node{std::move(v), tens{}, rg, nullptr});
        return value{static_cast<int32_t>(nodes_.size() - 1)};
    }

    template <typename F>
    void set_back(value v, F&& f) {
        if (nodes_[v.idx].requires_grad) nodes_[v.idx].back = std::forward<F>(f);
    }

    void ensure_grad(int32_t idx) {
        node& n = nodes_[idx];
        if (n.grad.numel() == 0) n.grad = tens(n.val.shape);
    }

    const tens& grad_of(value v) { return nodes_[v.idx].grad; }

    void accum(value v, tens contribution) {
        ensure_grad(v.idx);
        tens& g = nodes_[v.idx].grad;
        for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += contribution.data[i];
    }

    value binary(binary_op op, value a, value b) {
        value y = make(elementwise_binary(op, val(a), val(b)), {a, b});
        set_back(y, [this, op, a, b, y] {
            const tens& dy = grad_of(y);
            const tens& av = val(a);
            const tens& bv = val(b);
            const bool broadcast = av.shape != bv.shape;
            if (requires_grad(a)) {
                if (op == binary_op::add) {
                    accum(a, dy);
                } else {
                    accum(a, elementwise_binary(binary_op::mul, dy, bv));
                }
            }
            if (requires_grad(b)) {
                if (!broadcast) {
                    accum(b, op == binary_op::add ? dy : eagle::mul(dy, av));
                } else {
                    // reduce over rows onto the trailing vector
                    const int64_t d = av.last_dim(), rows = av.rows2d();
                    tens db(bv.shape);
                    for (int64_t r = 0; r < rows; ++r) {
                        const T* dp = dy.data.data() + r * d;
                        const T* ap = av.row(r);
                        for (int64_t j = 0; j < d; ++j)
                            db.data[j] += op == binary_op::add ? dp[j] : dp[j] * ap[j];
                    }
                    accum(b, std::move(db));
                }
            }
        });
        return y;
    }
};

using graphf = graph<float>;
using graphd = graph<double>;

}  // namespace eagle
