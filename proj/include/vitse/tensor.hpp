#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "vitse/errors.hpp"

namespace vitse {

// Dense row-major tensor of float or double. Tensors are handled through
// shared pointers; operations recorded on a Tape keep their inputs alive via
// the captured pointers, which is what makes reverse-mode differentiation
// work with plain value buffers.
template <typename T>
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<T> data;
    std::vector<T> grad;  // same length as data iff requires_grad
    bool requires_grad = false;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t rows() const { return shape[0]; }
    int64_t cols() const { return shape[1]; }

    T& operator()(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    T operator()(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() { grad.assign(data.size(), T(0)); }

    static int64_t shape_numel(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t e : s) {
            if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(s));
            n *= e;
        }
        return n;
    }

    static std::shared_ptr<Tensor<T>> zeros(std::vector<int64_t> s, bool req_grad = false) {
        auto t = std::make_shared<Tensor<T>>();
        const int64_t n = shape_numel(s);
        t->shape = std::move(s);
        t->data.assign(static_cast<size_t>(n), T(0));
        t->requires_grad = req_grad;
        if (req_grad) t->ensure_grad();
        return t;
    }

    static std::shared_ptr<Tensor<T>> full(std::vector<int64_t> s, T value, bool req_grad = false) {
        auto t = zeros(std::move(s), req_grad);
        for (auto& v : t->data) v = value;
        return t;
    }

    static std::shared_ptr<Tensor<T>> from(std::vector<int64_t> s, std::vector<T> values, bool req_grad = false) {
        if (shape_numel(s) != static_cast<int64_t>(values.size()))
            throw ShapeError("value count " + std::to_string(values.size()) + " does not fill shape " + shape_str(s));
        auto t = std::make_shared<Tensor<T>>();
        t->shape = std::move(s);
        t->data = std::move(values);
        t->requires_grad = req_grad;
        if (req_grad) t->ensure_grad();
        return t;
    }

    static std::shared_ptr<Tensor<T>> scalar(T v, bool req_grad = false) { return from({1}, {v}, req_grad); }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
    for (T v : t.data)
        if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
#else
    (void)t;
    (void)op;
#endif
}

inline void require_rank(const std::vector<int64_t>& shape, int rank, const char* what) {
    if (static_cast<int>(shape.size()) != rank)
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(shape));
}

}  // namespace detail

// Records one forward pass. Every op appends its backward rule in forward
// order, so inputs always precede their consumers and reverse iteration is a
// valid topological traversal that touches each rule exactly once. Gradients
// accumulate additively across fan-out. One tape per training step; a
// non-recording tape evaluates forward only and marks nothing differentiable.
template <typename T>
class Tape {
public:
    Tape() = default;
    explicit Tape(bool recording) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    size_t num_ops() const { return records_.size(); }

    // loss must be scalar; seeds d loss / d loss = 1 and replays the tape in
    // reverse. A tape backpropagates at most once.
    void backward(const TensorPtr<T>& loss) {
        if (loss->numel() != 1) throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss->shape));
        if (backward_done_) throw ContractError("backward: tape already backpropagated");
        backward_done_ = true;
        if (!loss->requires_grad) return;
        loss->grad[0] = T(1);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
    }

    // ---- primitive operations -------------------------------------------

    TensorPtr<T> matmul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
        detail::require_rank(a->shape, 2, "matmul lhs");
        detail::require_rank(b->shape, 2, "matmul rhs");
        if (a->cols() != b->rows())
            throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
        const int64_t m = a->rows(), k = a->cols(), n = b->cols();
        auto out = make_out({m, n}, {a, b});
        const T* ad = a->data.data();
        const T* bd = b->data.data();
        T* od = out->data.data();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
                const T av = ad[i * k + p];
                const T* brow = bd + p * n;
                T* orow = od + i * n;
                for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        detail::check_finite(*out, "matmul");
        if (out->requires_grad)
            record([a, b, out, m, k, n] {
                const T* g = out->grad.data();
                if (a->requires_grad) {
                    T* ga = a->grad.data();
                    const T* bd2 = b->data.data();
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t j = 0; j < n; ++j) {
                            const T gv = g[i * n + j];
                            for (int64_t p = 0; p < k; ++p) ga[i * k + p] += gv * bd2[p * n + j];
                        }
                }
                if (b->requires_grad) {
                    T* gb = b->grad.data();
                    const T* ad2 = a->data.data();
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t p = 0; p < k; ++p) {
                            const T av = ad2[i * k + p];
                            const T* grow = g + i * n;
                            T* gbrow = gb + p * n;
                            for (int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                        }
                }
            });
        return out;
    }

    TensorPtr<T> transpose(const TensorPtr<T>& x) {
        detail::require_rank(x->shape, 2, "transpose");
        const int64_t r = x->rows(), c = x->cols();
        auto out = make_out({c, r}, {x});
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) out->data[j * r + i] = x->data[i * c + j];
        if (out->requires_grad)
            record([x, out, r, c] {
                if (!x->requires_grad) return;
                for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < c; ++j) x->grad[i * c + j] += out->grad[j * r + i];
            });
        return out;
    }

    TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
        if (a->shape != b->shape)
            throw ShapeError("add: shape mismatch: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
        auto out = make_out(a->shape, {a, b});
        for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
        detail::check_finite(*out, "add");
        if (out->requires_grad)
            record([a, b, out] {
                if (a->requires_grad)
                    for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
                if (b->requires_grad)
                    for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
            });
        return out;
    }

    TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
        if (a->shape != b->shape)
            throw ShapeError("mul: shape mismatch: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
        auto out = make_out(a->shape, {a, b});
        for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
        detail::check_finite(*out, "mul");
        if (out->requires_grad)
            record([a, b, out] {
                if (a->requires_grad)
                    for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
                if (b->requires_grad)
                    for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
            });
        return out;
    }

    TensorPtr<T> scale(const TensorPtr<T>& x, T c) {
        auto out = make_out(x->shape, {x});
        for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = c * x->data[i];
        detail::check_finite(*out, "scale");
        if (out->requires_grad)
            record([x, out, c] {
                if (!x->requires_grad) return;
                for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += c * out->grad[i];
            });
        return out;
    }

    // bias broadcast over all leading dimensions; the only broadcast in the engine.
    TensorPtr<T> add_bias(const TensorPtr<T>& x, const TensorPtr<T>& bias) {
        detail::require_rank(bias->shape, 1, "add_bias bias");
        if (x->rank() < 1 || x->shape.back() != bias->shape[0])
            throw ShapeError("add_bias: last dim of " + shape_str(x->shape) + " must match bias " + shape_str(bias->shape));
        const int64_t n = bias->shape[0];
        const int64_t slices = x->numel() / n;
        auto out = make_out(x->shape, {x, bias});
        for (int64_t s = 0; s < slices; ++s)
            for (int64_t j = 0; j < n; ++j) out->data[s * n + j] = x->data[s * n + j] + bias->data[j];
        detail::check_finite(*out, "add_bias");
        if (out->requires_grad)
            record([x, bias, out, slices, n] {
                if (x->requires_grad)
                    for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
                if (bias->requires_grad)
                    for (int64_t s = 0; s < slices; ++s)
                        for (int64_t j = 0; j < n; ++j) bias->grad[j] += out->grad[s * n + j];
            });
        return out;
    }

    TensorPtr<T> relu(const TensorPtr<T>& x) {
        auto out = make_out(x->shape, {x});
        for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
        if (out->requires_grad)
            record([x, out] {
                if (!x->requires_grad) return;
                for (size_t i = 0; i < out->grad.size(); ++i)
                    if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
            });
        return out;
    }

    TensorPtr<T> sigmoid(const TensorPtr<T>& x) {
        auto out = make_out(x->shape, {x});
        for (size_t i = 0; i < out->data.size(); ++i) {
            const T v = x->data[i];
            out->data[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
        }
        detail::check_finite(*out, "sigmoid");
        if (out->requires_grad)
            record([x, out] {
                if (!x->requires_grad) return;
                for (size_t i = 0; i < out->grad.size(); ++i) {
                    const T s = out->data[i];
                    x->grad[i] += out->grad[i] * s * (T(1) - s);
                }
            });
        return out;
    }

    // Exact erf-based GELU: x * Phi(x). Derivative Phi(x) + x * phi(x).
    TensorPtr<T> gelu(const TensorPtr<T>& x) {
        constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
        auto out = make_out(x->shape, {x});
        for (size_t i = 0; i < out->data.size(); ++i) {
            const T v = x->data[i];
            out->data[i] = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
        }
        detail::check_finite(*out, "gelu");
        if (out->requires_grad)
            record([x, out] {
                if (!x->requires_grad) return;
                constexpr T inv_sqrt2b = T(1) / std::numbers::sqrt2_v<T>;
                const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
                for (size_t i = 0; i < out->grad.size(); ++i) {
                    const T v = x->data[i];
                    const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2b));
                    const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
                    x->grad[i] += out->grad[i] * (cdf + v * pdf);
                }
            });
        return out;
    }

    // Max-subtracted softmax over the last dimension.
    TensorPtr<T> softmax_lastdim(const TensorPtr<T>& x) {
        if (x->rank() < 1) throw ShapeError("softmax_lastdim: rank-0 input");
        const int64_t n = x->shape.back();
        const int64_t slices = x->numel() / n;
        auto out = make_out(x->shape, {x});
        for (int64_t s = 0; s < slices; ++s) {
            const T* xs = x->data.data() + s * n;
            T* os = out->data.data() + s * n;
            T mx = xs[0];
            for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xs[j]);
            T sum = T(0);
            for (int64_t j = 0; j < n; ++j) {
                os[j] = std::exp(xs[j] - mx);
                sum += os[j];
            }
            for (int64_t j = 0; j < n; ++j) os[j] /= sum;
        }
        detail::check_finite(*out, "softmax_lastdim");
        if (out->requires_grad)
            record([x, out, slices, n] {
                if (!x->requires_grad) return;
                for (int64_t s = 0; s < slices; ++s) {
                    const T* os = out->data.data() + s * n;
                    const T* gs = out->grad.data() + s * n;
                    T dot = T(0);
                    for (int64_t j = 0; j < n; ++j) dot += gs[j] * os[j];
                    for (int64_t j = 0; j < n; ++j) x->grad[s * n + j] += os[j] * (gs[j] - dot);
                }
            });
        return out;
    }

    TensorPtr<T> log_softmax_lastdim(const TensorPtr<T>& x) {
        if (x->rank() < 1) throw ShapeError("log_softmax_lastdim: rank-0 input");
        const int64_t n = x->shape.back();
        const int64_t slices = x->numel() / n;
        auto out = make_out(x->shape, {x});
        for (int64_t s = 0; s < slices; ++s) {
            const T* xs = x->data.data() + s * n;
            T* os = out->data.data() + s * n;
            T mx = xs[0];
            for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xs[j]);
            T sum = T(0);
            for (int64_t j = 0; j < n; ++j) sum += std::exp(xs[j] - mx);
            const T lse = mx + std::log(sum);
            for (int64_t j = 0; j < n; ++j) os[j] = xs[j] - lse;
        }
        if (out->requires_grad)
            record([x, out, slices, n] {
                if (!x->requires_grad) return;
                for (int64_t s = 0; s < slices; ++s) {
                    const T* os = out->data.data() + s * n;
                    const T* gs = out->grad.data() + s * n;
                    T gsum = T(0);
                    for (int64_t j = 0; j < n; ++j) gsum += gs[j];
                    for (int64_t j = 0; j < n; ++j) x->grad[s * n + j] += gs[j] - std::exp(os[j]) * gsum;
                }
            });
        return out;
    }

    // Per-slice standardisation over the last dimension, then gain/bias.
    TensorPtr<T> layer_norm(const TensorPtr<T>& x, const TensorPtr<T>& gain, const TensorPtr<T>& bias, T eps) {
        detail::require_rank(gain->shape, 1, "layer_norm gain");
        detail::require_rank(bias->shape, 1, "layer_norm bias");
        const int64_t n = x->shape.back();
        if (gain->shape[0] != n || bias->shape[0] != n)
            throw ShapeError("layer_norm: gain/bias " + shape_str(gain->shape) + " must match last dim of " + shape_str(x->shape));
        if (n < 2) throw ShapeError("layer_norm: last dimension must be >= 2");
        const int64_t slices = x->numel() / n;
        auto out = make_out(x->shape, {x, gain, bias});
        auto xhat = std::make_shared<std::vector<T>>(x->data.size());
        auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(slices));
        for (int64_t s = 0; s < slices; ++s) {
            const T* xs = x->data.data() + s * n;
            T mean = T(0);
            for (int64_t j = 0; j < n; ++j) mean += xs[j];
            mean /= T(n);
            T var = T(0);
            for (int64_t j = 0; j < n; ++j) var += (xs[j] - mean) * (xs[j] - mean);
            var /= T(n);
            const T istd = T(1) / std::sqrt(var + eps);
            (*inv_std)[static_cast<size_t>(s)] = istd;
            for (int64_t j = 0; j < n; ++j) {
                const T xh = (xs[j] - mean) * istd;
                (*xhat)[static_cast<size_t>(s * n + j)] = xh;
                out->data[s * n + j] = gain->data[j] * xh + bias->data[j];
            }
        }
        detail::check_finite(*out, "layer_norm");
        if (out->requires_grad)
            record([x, gain, bias, out, xhat, inv_std, slices, n] {
                for (int64_t s = 0; s < slices; ++s) {
                    const T* gs = out->grad.data() + s * n;
                    const T* xh = xhat->data() + s * n;
                    if (gain->requires_grad || bias->requires_grad)
                        for (int64_t j = 0; j < n; ++j) {
                            if (gain->requires_grad) gain->grad[j] += gs[j] * xh[j];
                            if (bias->requires_grad) bias->grad[j] += gs[j];
                        }
                    if (x->requires_grad) {
                        T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
                        for (int64_t j = 0; j < n; ++j) {
                            const T dxh = gs[j] * gain->data[j];
                            mean_dxhat += dxh;
                            mean_dxhat_xhat += dxh * xh[j];
                        }
                        mean_dxhat /= T(n);
                        mean_dxhat_xhat /= T(n);
                        const T istd = (*inv_std)[static_cast<size_t>(s)];
                        for (int64_t j = 0; j < n; ++j) {
                            const T dxh = gs[j] * gain->data[j];
                            x->grad[s * n + j] += istd * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
                        }
                    }
                }
            });
        return out;
    }

    TensorPtr<T> slice_rows(const TensorPtr<T>& x, int64_t begin, int64_t count) {
        detail::require_rank(x->shape, 2, "slice_rows");
        if (begin < 0 || count <= 0 || begin + count > x->rows())
            throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of " + shape_str(x->shape));
        const int64_t c = x->cols();
        auto out = make_out({count, c}, {x});
        std::copy_n(x->data.data() + begin * c, count * c, out->data.data());
        if (out->requires_grad)
            record([x, out, begin, count, c] {
                if (!x->requires_grad) return;
                for (int64_t i = 0; i < count * c; ++i) x->grad[begin * c + i] += out->grad[i];
            });
        return out;
    }

    TensorPtr<T> slice_cols(const TensorPtr<T>& x, int64_t begin, int64_t count) {
        detail::require_rank(x->shape, 2, "slice_cols");
        if (begin < 0 || count <= 0 || begin + count > x->cols())
            throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of " + shape_str(x->shape));
        const int64_t r = x->rows(), c = x->cols();
        auto out = make_out({r, count}, {x});
        for (int64_t i = 0; i < r; ++i)
            std::copy_n(x->data.data() + i * c + begin, count, out->data.data() + i * count);
        if (out->requires_grad)
            record([x, out, begin, count, r, c] {
                if (!x->requires_grad) return;
                for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < count; ++j) x->grad[i * c + begin + j] += out->grad[i * count + j];
            });
        return out;
    }

    TensorPtr<T> concat_rows(const std::vector<TensorPtr<T>>& parts) {
        if (parts.empty()) throw ShapeError("concat_rows: no inputs");
        const int64_t c = parts[0]->cols();
        int64_t total = 0;
        for (const auto& p : parts) {
            detail::require_rank(p->shape, 2, "concat_rows part");
            if (p->cols() != c)
                throw ShapeError("concat_rows: column mismatch: " + shape_str(parts[0]->shape) + " vs " + shape_str(p->shape));
            total += p->rows();
        }
        auto out = make_out_n({total, c}, parts);
        int64_t off = 0;
        for (const auto& p : parts) {
            std::copy_n(p->data.data(), p->numel(), out->data.data() + off);
            off += p->numel();
        }
        if (out->requires_grad)
            record([parts, out] {
                int64_t o = 0;
                for (const auto& p : parts) {
                    if (p->requires_grad)
                        for (int64_t i = 0; i < p->numel(); ++i) p->grad[i] += out->grad[o + i];
                    o += p->numel();
                }
            });
        return out;
    }

    TensorPtr<T> concat_cols(const std::vector<TensorPtr<T>>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no inputs");
        const int64_t r = parts[0]->rows();
        int64_t total = 0;
        for (const auto& p : parts) {
            detail::require_rank(p->shape, 2, "concat_cols part");
            if (p->rows() != r)
                throw ShapeError("concat_cols: row mismatch: " + shape_str(parts[0]->shape) + " vs " + shape_str(p->shape));
            total += p->cols();
        }
        auto out = make_out_n({r, total}, parts);
        int64_t off = 0;
        for (const auto& p : parts) {
            const int64_t pc = p->cols();
            for (int64_t i = 0; i < r; ++i)
                std::copy_n(p->data.data() + i * pc, pc, out->data.data() + i * total + off);
            off += pc;
        }
        if (out->requires_grad)
            record([parts, out, r, total] {
                int64_t o = 0;
                for (const auto& p : parts) {
                    const int64_t pc = p->cols();
                    if (p->requires_grad)
                        for (int64_t i = 0; i < r; ++i)
                            for (int64_t j = 0; j < pc; ++j) p->grad[i * pc + j] += out->grad[i * total + o + j];
                    o += pc;
                }
            });
        return out;
    }

    TensorPtr<T> reshape(const TensorPtr<T>& x, std::vector<int64_t> new_shape) {
        if (Tensor<T>::shape_numel(new_shape) != x->numel())
            throw ShapeError("reshape: " + shape_str(x->shape) + " cannot become " + shape_str(new_shape));
        auto out = make_out(std::move(new_shape), {x});
        out->data = x->data;
        if (out->requires_grad)
            record([x, out] {
                if (!x->requires_grad) return;
                for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
            });
        return out;
    }

    // out.flat[i] = x.flat[index[i]]; pure index gather, backward scatters.
    TensorPtr<T> gather(const TensorPtr<T>& x, std::vector<int64_t> index, std::vector<int64_t> out_shape) {
        auto idx = std::make_shared<std::vector<int64_t>>(std::move(index));
        if (static_cast<int64_t>(idx->size()) != Tensor<T>::shape_numel(out_shape))
            throw ShapeError("gather: index count does not fill " + shape_str(out_shape));
        for (int64_t i : *idx)
            if (i < 0 || i >= x->numel()) throw ShapeError("gather: index out of range of " + shape_str(x->shape));
        auto out = make_out(std::move(out_shape), {x});
        for (size_t i = 0; i < idx->size(); ++i) out->data[i] = x->data[static_cast<size_t>((*idx)[i])];
        if (out->requires_grad)
            record([x, out, idx] {
                if (!x->requires_grad) return;
                for (size_t i = 0; i < idx->size(); ++i) x->grad[static_cast<size_t>((*idx)[i])] += out->grad[i];
            });
        return out;
    }

    TensorPtr<T> sum(const TensorPtr<T>& x) {
        auto out = make_out({1}, {x});
        T s = T(0);
        for (T v : x->data) s += v;
        out->data[0] = s;
        detail::check_finite(*out, "sum");
        if (out->requires_grad)
            record([x, out] {
                if (!x->requires_grad) return;
                for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[0];
            });
        return out;
    }

private:
    TensorPtr<T> make_out(std::vector<int64_t> shape, std::initializer_list<TensorPtr<T>> inputs) {
        bool req = false;
        if (recording_)
            for (const auto& in : inputs) req = req || in->requires_grad;
        return Tensor<T>::zeros(std::move(shape), req);
    }

    TensorPtr<T> make_out_n(std::vector<int64_t> shape, const std::vector<TensorPtr<T>>& inputs) {
        bool req = false;
        if (recording_)
            for (const auto& in : inputs) req = req || in->requires_grad;
        return Tensor<T>::zeros(std::move(shape), req);
    }

    void record(std::function<void()> backprop) { records_.push_back(std::move(backprop)); }

    std::vector<std::function<void()>> records_;
    bool recording_ = true;
    bool backward_done_ = false;
};

}  // namespace vitse
