#pragma once

#include <algorithm>
#include <optional>
#include <type_traits>
#include <utility>

#include "vitse/data.hpp"
#include "vitse/model.hpp"

namespace vitse {

// Mean over the batch of -sum(target * log softmax(logits)). Soft target
// rows (Mixup) are supported; every row must be a distribution.
template <typename T>
TensorPtr<T> cross_entropy(Tape<T>& tape, const TensorPtr<T>& logits, const TensorPtr<T>& targets) {
    if (logits->rank() != 2 || logits->shape != targets->shape)
        throw ShapeError("cross_entropy: logits " + shape_str(logits->shape) + " vs targets " +
                         shape_str(targets->shape));
    const int64_t batch = targets->rows(), k = targets->cols();
    for (int64_t r = 0; r < batch; ++r) {
        T sum = T(0);
        for (int64_t j = 0; j < k; ++j) {
            const T v = (*targets)(r, j);
            if (v < T(0)) throw ContractError("cross_entropy: negative entry in target row " + std::to_string(r));
            sum += v;
        }
        if (std::abs(sum - T(1)) > T(1e-6))
            throw ContractError("cross_entropy: target row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
    auto lsm = tape.log_softmax_lastdim(logits);
    return tape.scale(tape.sum(tape.mul(targets, lsm)), T(-1) / static_cast<T>(batch));
}

// Convex combination of two samples and their labels.
template <typename T>
std::pair<TensorPtr<T>, TensorPtr<T>> mixup(const TensorPtr<T>& x1, const TensorPtr<T>& y1, const TensorPtr<T>& x2,
                                            const TensorPtr<T>& y2, T lambda) {
    if (x1->shape != x2->shape)
        throw ShapeError("mixup: image shapes disagree: " + shape_str(x1->shape) + " vs " + shape_str(x2->shape));
    if (y1->shape != y2->shape)
        throw ShapeError("mixup: label shapes disagree: " + shape_str(y1->shape) + " vs " + shape_str(y2->shape));
    if (lambda < T(0) || lambda > T(1)) throw ContractError("mixup: lambda outside [0, 1]");
    auto xm = Tensor<T>::zeros(x1->shape);
    for (size_t i = 0; i < xm->data.size(); ++i) xm->data[i] = lambda * x1->data[i] + (T(1) - lambda) * x2->data[i];
    auto ym = Tensor<T>::zeros(y1->shape);
    for (size_t i = 0; i < ym->data.size(); ++i) ym->data[i] = lambda * y1->data[i] + (T(1) - lambda) * y2->data[i];
    return {xm, ym};
}

// size x size window centered at (center_row, center_col), clipped to the
// image, set to fill on every channel.
template <typename T>
TensorPtr<T> cutout(const TensorPtr<T>& image, int64_t center_row, int64_t center_col, int64_t size, T fill) {
    if (image->rank() != 3) throw ShapeError("cutout: expected C x H x W image, got " + shape_str(image->shape));
    if (size < 0) throw ContractError("cutout: negative size");
    auto out = Tensor<T>::from(image->shape, image->data);
    const int64_t C = image->shape[0], H = image->shape[1], W = image->shape[2];
    const int64_t r0 = std::max<int64_t>(0, center_row - size / 2);
    const int64_t c0 = std::max<int64_t>(0, center_col - size / 2);
    const int64_t r1 = std::min(H, center_row - size / 2 + size);
    const int64_t c1 = std::min(W, center_col - size / 2 + size);
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = r0; y < r1; ++y)
            for (int64_t x = c0; x < c1; ++x) out->data[(c * H + y) * W + x] = fill;
    return out;
}

// First/second moment buffers mirroring the parameter list, plus the shared
// step counter.
template <typename T>
struct OptimizerState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    int64_t step = 0;

    static OptimizerState<T> for_params(const std::vector<std::pair<std::string, TensorPtr<T>>>& params) {
        OptimizerState<T> s;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const auto& [name, p] : params) {
            s.m.emplace_back(p->data.size(), T(0));
            s.v.emplace_back(p->data.size(), T(0));
        }
        return s;
    }
};

// Decoupled-weight-decay Adam: the decay multiplies the pre-update weights
// by (1 - lr*wd), separately from the bias-corrected moment update.
template <typename T>
void adamw_step(const std::vector<std::pair<std::string, TensorPtr<T>>>& params, OptimizerState<T>& state,
                const TrainConfig& cfg) {
    if (state.m.size() != params.size())
        throw ShapeError("adamw_step: optimizer state built for " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
    state.step += 1;
    const T lr = static_cast<T>(cfg.learning_rate);
    const T beta1 = static_cast<T>(cfg.adam_beta1);
    const T beta2 = static_cast<T>(cfg.adam_beta2);
    const T eps = static_cast<T>(cfg.adam_eps);
    const T decay = T(1) - lr * static_cast<T>(cfg.weight_decay);
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(state.step));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(state.step));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi].second;
        if (p.grad.size() != p.data.size())
            throw ShapeError("adamw_step: parameter " + params[pi].first + " carries no gradient");
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const T g = p.grad[i];
            m[i] = beta1 * m[i] + (T(1) - beta1) * g;
            v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            p.data[i] = p.data[i] * decay - lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template <typename T>
TensorPtr<T> one_hot(int64_t label, int64_t k) {
    auto t = Tensor<T>::zeros({1, k});
    t->data[static_cast<size_t>(label)] = T(1);
    return t;
}

inline NormStats norm_of(const TrainConfig& cfg) { return NormStats{cfg.norm_mean, cfg.norm_std}; }

inline AugmentConfig augment_of(const TrainConfig& cfg) {
    return AugmentConfig{cfg.flip_prob, cfg.grayscale_prob, cfg.jitter_enabled, cfg.jitter_min, cfg.jitter_max};
}

template <typename T>
TensorPtr<T> to_precision(const TensorPtr<float>& x) {
    if constexpr (std::is_same_v<T, float>) {
        return x;
    } else {
        auto out = Tensor<T>::zeros(x->shape);
        for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = static_cast<T>(x->data[i]);
        return out;
    }
}

struct EpochResult {
    double mean_loss = 0;
    int64_t steps = 0;
};

// One pass over the seeded-shuffled train split: augment, preprocess,
// cutout, mixup, forward, cross-entropy, backward, AdamW, per batch.
// step_budget > 0 caps the number of optimizer steps this epoch.
template <typename T>
EpochResult train_epoch(Model<T>& model, const Dataset& data, const TrainConfig& cfg, OptimizerState<T>& opt,
                        Rng& rng, int64_t step_budget = 0) {
    auto order = data.indices(Split::Train);
    if (order.empty()) throw ContractError("train_epoch: no training samples");
    rng.shuffle(order.begin(), order.end());

    auto params = model.params.named_parameters();
    const auto norm = norm_of(cfg);
    const auto aug = augment_of(cfg);
    const int64_t k = model.cfg.num_classes;
    const int64_t img = model.cfg.image_size;
    const int64_t cut = resolve_cutout_size(cfg, img);
    const float fill = 0.0f;  // post-normalization mean

    double loss_sum = 0;
    int64_t seen = 0, steps = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
        if (step_budget > 0 && steps >= step_budget) break;
        const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
        const int64_t b = static_cast<int64_t>(end - start);

        const T lambda = cfg.mixup_enabled ? static_cast<T>(rng.beta_symmetric(cfg.mixup_alpha)) : T(1);
        std::vector<TensorPtr<float>> images(static_cast<size_t>(b));
        std::vector<TensorPtr<float>> labels(static_cast<size_t>(b));
        for (int64_t i = 0; i < b; ++i) {
            const Sample& s = data.samples[order[start + static_cast<size_t>(i)]];
            auto x = augment(s.image, rng, aug);
            x = preprocess(x, img, norm);
            if (cfg.cutout_enabled && cut > 0) {
                const int64_t cr = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(img)));
                const int64_t cc = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(img)));
                x = cutout(x, cr, cc, cut, fill);
            }
            images[static_cast<size_t>(i)] = x;
            labels[static_cast<size_t>(i)] = one_hot<float>(s.label, k);
        }

        Tape<T> tape;
        std::vector<TensorPtr<T>> logit_rows(static_cast<size_t>(b));
        auto targets = Tensor<T>::zeros({b, k});
        for (int64_t i = 0; i < b; ++i) {
            const int64_t j = (i + 1) % b;  // rolled in-batch pairing
            auto xi = to_precision<T>(images[static_cast<size_t>(i)]);
            auto yi = to_precision<T>(labels[static_cast<size_t>(i)]);
            if (cfg.mixup_enabled && lambda < T(1)) {
                auto xj = to_precision<T>(images[static_cast<size_t>(j)]);
                auto yj = to_precision<T>(labels[static_cast<size_t>(j)]);
                std::tie(xi, yi) = mixup(xi, yi, xj, yj, lambda);
            }
            auto logits = forward_logits(tape, model, xi);
            logit_rows[static_cast<size_t>(i)] = tape.reshape(logits, {1, k});
            for (int64_t c = 0; c < k; ++c) (*targets)(i, c) = yi->data[static_cast<size_t>(c)];
        }
        auto batch_logits = b == 1 ? logit_rows[0] : tape.concat_rows(logit_rows);
        auto loss = cross_entropy(tape, batch_logits, targets);

        model.params.zero_grads();
        tape.backward(loss);
        adamw_step(params, opt, cfg);

        loss_sum += static_cast<double>(loss->data[0]) * static_cast<double>(b);
        seen += b;
        steps += 1;
    }
    return EpochResult{seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0, steps};
}

struct EvalReport {
    double accuracy = 0;
    std::vector<std::vector<int64_t>> confusion;  // rows true class, columns predicted
    std::vector<double> per_class_accuracy;
    int64_t count = 0;
};

// Argmax evaluation without augmentation; ties break toward the lowest
// class index. Counts land in a K x K confusion matrix.
template <typename T>
EvalReport evaluate(const Model<T>& model, const Dataset& data, const NormStats& norm,
                    std::optional<Split> split = std::nullopt) {
    const int64_t k = model.cfg.num_classes;
    EvalReport report;
    report.confusion.assign(static_cast<size_t>(k), std::vector<int64_t>(static_cast<size_t>(k), 0));
    int64_t correct = 0;
    for (const Sample& s : data.samples) {
        if (split && s.split != *split) continue;
        auto x = to_precision<T>(preprocess(s.image, model.cfg.image_size, norm));
        Tape<T> tape(false);
        auto logits = forward_logits(tape, model, x);
        int64_t pred = 0;
        for (int64_t j = 1; j < k; ++j)
            if (logits->data[static_cast<size_t>(j)] > logits->data[static_cast<size_t>(pred)]) pred = j;
        report.confusion[static_cast<size_t>(s.label)][static_cast<size_t>(pred)] += 1;
        if (pred == s.label) correct += 1;
        report.count += 1;
    }
    if (report.count == 0) throw ContractError("evaluate: no samples in the requested split");
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.count);
    report.per_class_accuracy.assign(static_cast<size_t>(k), 0.0);
    for (int64_t c = 0; c < k; ++c) {
        int64_t row = 0;
        for (int64_t j = 0; j < k; ++j) row += report.confusion[static_cast<size_t>(c)][static_cast<size_t>(j)];
        if (row > 0)
            report.per_class_accuracy[static_cast<size_t>(c)] =
                static_cast<double>(report.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)]) /
                static_cast<double>(row);
    }
    return report;
}

}  // namespace vitse
