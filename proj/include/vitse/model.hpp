#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vitse/config.hpp"
#include "vitse/rng.hpp"
#include "vitse/se.hpp"
#include "vitse/tensor.hpp"

namespace vitse {

template <typename T>
struct EncoderBlockParams {
    TensorPtr<T> w_q, b_q;  // query/key/value projections fused across heads,
    TensorPtr<T> w_k, b_k;  // each embed_dim x embed_dim; head i owns the
    TensorPtr<T> w_v, b_v;  // contiguous column band [i*head_dim, (i+1)*head_dim)
    TensorPtr<T> w_out, b_out;
    TensorPtr<T> ln1_gain, ln1_bias;
    TensorPtr<T> ln2_gain, ln2_bias;
    TensorPtr<T> w_fc1, b_fc1;
    TensorPtr<T> w_fc2, b_fc2;
};

template <typename T>
struct ModelParams {
    TensorPtr<T> w_patch, b_patch;  // (C*h^2) x embed_dim
    TensorPtr<T> cls_token;         // embed_dim
    TensorPtr<T> positions;         // (L+1) x embed_dim
    std::vector<EncoderBlockParams<T>> blocks;
    TensorPtr<T> final_ln_gain, final_ln_bias;
    std::optional<SEWeights<T>> se;
    TensorPtr<T> w_head, b_head;  // embed_dim x num_classes

    std::vector<std::pair<std::string, TensorPtr<T>>> named_parameters() const {
        std::vector<std::pair<std::string, TensorPtr<T>>> out;
        out.emplace_back("patch.weight", w_patch);
        out.emplace_back("patch.bias", b_patch);
        out.emplace_back("cls_token", cls_token);
        out.emplace_back("pos_embed", positions);
        for (size_t i = 0; i < blocks.size(); ++i) {
            const std::string p = "blocks." + std::to_string(i) + ".";
            const auto& b = blocks[i];
            out.emplace_back(p + "attn.q.weight", b.w_q);
            out.emplace_back(p + "attn.q.bias", b.b_q);
            out.emplace_back(p + "attn.k.weight", b.w_k);
            out.emplace_back(p + "attn.k.bias", b.b_k);
            out.emplace_back(p + "attn.v.weight", b.w_v);
            out.emplace_back(p + "attn.v.bias", b.b_v);
            out.emplace_back(p + "attn.out.weight", b.w_out);
            out.emplace_back(p + "attn.out.bias", b.b_out);
            out.emplace_back(p + "ln1.gain", b.ln1_gain);
            out.emplace_back(p + "ln1.bias", b.ln1_bias);
            out.emplace_back(p + "ln2.gain", b.ln2_gain);
            out.emplace_back(p + "ln2.bias", b.ln2_bias);
            out.emplace_back(p + "mlp.fc1.weight", b.w_fc1);
            out.emplace_back(p + "mlp.fc1.bias", b.b_fc1);
            out.emplace_back(p + "mlp.fc2.weight", b.w_fc2);
            out.emplace_back(p + "mlp.fc2.bias", b.b_fc2);
        }
        out.emplace_back("final_ln.gain", final_ln_gain);
        out.emplace_back("final_ln.bias", final_ln_bias);
        if (se) {
            out.emplace_back("se.reduce.weight", se->w_reduce);
            out.emplace_back("se.reduce.bias", se->b_reduce);
            out.emplace_back("se.expand.weight", se->w_expand);
            out.emplace_back("se.expand.bias", se->b_expand);
        }
        out.emplace_back("head.weight", w_head);
        out.emplace_back("head.bias", b_head);
        return out;
    }

    int64_t parameter_count() const {
        int64_t n = 0;
        for (const auto& [name, t] : named_parameters()) n += t->numel();
        return n;
    }

    void zero_grads() {
        for (auto& [name, t] : named_parameters()) t->zero_grad();
    }
};

// Closed-form inventory size; the constructed model asserts against this.
inline int64_t expected_param_count(const ViTConfig& cfg, bool se_enabled) {
    const int64_t g = cfg.embed_dim, p = cfg.patch_dim(), m = cfg.mlp_hidden();
    const int64_t tokens = cfg.num_patches() + 1;
    int64_t n = p * g + g;       // patch projection
    n += g;                      // cls token
    n += tokens * g;             // positions
    n += cfg.depth * (4 * (g * g + g) + 4 * g + (g * m + m) + (m * g + g));
    n += 2 * g;                  // final layer norm
    if (se_enabled) {
        const int64_t b = cfg.se_bottleneck();
        n += g * b + b + b * g + g;
    }
    n += g * cfg.num_classes + cfg.num_classes;  // head
    return n;
}

namespace detail {

// rng == nullptr builds the all-zero skeleton used by checkpoint loading.
template <typename T>
ModelParams<T> build_params(const ViTConfig& cfg, bool se_enabled, Rng* rng) {
    cfg.validate();
    auto weight = [rng](std::vector<int64_t> shape) {
        auto t = Tensor<T>::zeros(std::move(shape), true);
        if (rng)
            for (auto& v : t->data) v = static_cast<T>(rng->truncated_normal(0.02, 0.04));
        return t;
    };
    auto zeros = [](std::vector<int64_t> shape) { return Tensor<T>::zeros(std::move(shape), true); };
    auto ones = [](std::vector<int64_t> shape) { return Tensor<T>::full(std::move(shape), T(1), true); };

    const int64_t g = cfg.embed_dim, m = cfg.mlp_hidden();
    ModelParams<T> mp;
    mp.w_patch = weight({cfg.patch_dim(), g});
    mp.b_patch = zeros({g});
    mp.cls_token = weight({g});
    mp.positions = weight({cfg.num_patches() + 1, g});
    mp.blocks.reserve(static_cast<size_t>(cfg.depth));
    for (int64_t i = 0; i < cfg.depth; ++i) {
        EncoderBlockParams<T> b;
        b.w_q = weight({g, g});
        b.b_q = zeros({g});
        b.w_k = weight({g, g});
        b.b_k = zeros({g});
        b.w_v = weight({g, g});
        b.b_v = zeros({g});
        b.w_out = weight({g, g});
        b.b_out = zeros({g});
        b.ln1_gain = ones({g});
        b.ln1_bias = zeros({g});
        b.ln2_gain = ones({g});
        b.ln2_bias = zeros({g});
        b.w_fc1 = weight({g, m});
        b.b_fc1 = zeros({m});
        b.w_fc2 = weight({m, g});
        b.b_fc2 = zeros({g});
        mp.blocks.push_back(std::move(b));
    }
    mp.final_ln_gain = ones({g});
    mp.final_ln_bias = zeros({g});
    mp.w_head = weight({g, cfg.num_classes});
    mp.b_head = zeros({cfg.num_classes});
    if (se_enabled) {
        const int64_t bt = cfg.se_bottleneck();
        SEWeights<T> se;
        se.w_reduce = weight({g, bt});
        se.b_reduce = zeros({bt});
        se.w_expand = weight({bt, g});
        se.b_expand = zeros({g});
        mp.se = std::move(se);
    }
    return mp;
}

}  // namespace detail

// Truncated-normal(0.02) projections and embeddings, zero biases, unit
// layer-norm gains. SE weights are drawn last so toggling se_enabled leaves
// every other tensor identical under the same seed.
template <typename T>
ModelParams<T> init_model(const ViTConfig& cfg, bool se_enabled, Rng& rng) {
    return detail::build_params<T>(cfg, se_enabled, &rng);
}

template <typename T>
ModelParams<T> zero_model(const ViTConfig& cfg, bool se_enabled) {
    return detail::build_params<T>(cfg, se_enabled, nullptr);
}

// Splits a C x H x W image into L rows of flattened h x h patches. Patch
// index runs row-major over the patch grid; within a patch the layout is
// channel-major, then row-major. patchify/unpatchify are bijections.
template <typename T>
TensorPtr<T> patchify(Tape<T>& tape, const TensorPtr<T>& image, int64_t h) {
    if (image->rank() != 3) throw ShapeError("patchify: expected C x H x W image, got " + shape_str(image->shape));
    const int64_t C = image->shape[0], H = image->shape[1], W = image->shape[2];
    if (h <= 0 || H % h != 0 || W % h != 0)
        throw ShapeError("patchify: image " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible into patches of size " + std::to_string(h));
    const int64_t gy = H / h, gx = W / h, L = gy * gx, pd = C * h * h;
    std::vector<int64_t> index(static_cast<size_t>(L * pd));
    for (int64_t py = 0; py < gy; ++py)
        for (int64_t px = 0; px < gx; ++px) {
            const int64_t r = py * gx + px;
            for (int64_t c = 0; c < C; ++c)
                for (int64_t y = 0; y < h; ++y)
                    for (int64_t x = 0; x < h; ++x)
                        index[static_cast<size_t>(r * pd + c * h * h + y * h + x)] =
                            (c * H + py * h + y) * W + px * h + x;
        }
    return tape.gather(image, std::move(index), {L, pd});
}

// Inverse of patchify; used to verify the bijection and to rebuild images.
template <typename T>
TensorPtr<T> unpatchify(const TensorPtr<T>& patches, int64_t channels, int64_t height, int64_t width, int64_t h) {
    const int64_t gy = height / h, gx = width / h, pd = channels * h * h;
    if (patches->rank() != 2 || patches->rows() != gy * gx || patches->cols() != pd)
        throw ShapeError("unpatchify: patches " + shape_str(patches->shape) + " do not match " +
                         std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width));
    auto image = Tensor<T>::zeros({channels, height, width});
    for (int64_t py = 0; py < gy; ++py)
        for (int64_t px = 0; px < gx; ++px) {
            const int64_t r = py * gx + px;
            for (int64_t c = 0; c < channels; ++c)
                for (int64_t y = 0; y < h; ++y)
                    for (int64_t x = 0; x < h; ++x)
                        image->data[(c * height + py * h + y) * width + px * h + x] =
                            patches->data[r * pd + c * h * h + y * h + x];
        }
    return image;
}

// cls row plus projected patches, with the learned position table added.
template <typename T>
TensorPtr<T> embed_tokens(Tape<T>& tape, const TensorPtr<T>& patches, const ModelParams<T>& params) {
    if (patches->rank() != 2 || patches->cols() != params.w_patch->rows())
        throw ShapeError("embed_tokens: patch width " + shape_str(patches->shape) + " does not match projection " +
                         shape_str(params.w_patch->shape));
    const int64_t g = params.w_patch->cols();
    auto projected = tape.add_bias(tape.matmul(patches, params.w_patch), params.b_patch);
    auto cls_row = tape.reshape(params.cls_token, {1, g});
    auto seq = tape.concat_rows({cls_row, projected});
    return tape.add(seq, params.positions);
}

// softmax(Q K^T / sqrt(d_k)) V for one head. attn_out, when given, receives
// the row-stochastic attention matrix.
template <typename T>
TensorPtr<T> attention_head(Tape<T>& tape, const TensorPtr<T>& q, const TensorPtr<T>& k, const TensorPtr<T>& v,
                            TensorPtr<T>* attn_out = nullptr) {
    if (q->rank() != 2 || q->shape != k->shape || k->shape != v->shape)
        throw ShapeError("attention_head: Q/K/V shapes disagree: " + shape_str(q->shape) + ", " + shape_str(k->shape) +
                         ", " + shape_str(v->shape));
    const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(q->cols()));
    auto scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dk);
    auto attn = tape.softmax_lastdim(scores);
    if (attn_out) *attn_out = attn;
    return tape.matmul(attn, v);
}

// z parallel heads on contiguous column bands, concatenated and projected by
// the output matrix. head_attn, when given, collects one attention matrix
// per head.
template <typename T>
TensorPtr<T> multi_head_attention(Tape<T>& tape, const TensorPtr<T>& x, const EncoderBlockParams<T>& block,
                                  int64_t heads, std::vector<TensorPtr<T>>* head_attn = nullptr) {
    const int64_t g = x->cols();
    if (g % heads != 0)
        throw ShapeError("multi_head_attention: width " + std::to_string(g) + " not divisible by " +
                         std::to_string(heads) + " heads");
    const int64_t dk = g / heads;
    auto q = tape.add_bias(tape.matmul(x, block.w_q), block.b_q);
    auto k = tape.add_bias(tape.matmul(x, block.w_k), block.b_k);
    auto v = tape.add_bias(tape.matmul(x, block.w_v), block.b_v);
    std::vector<TensorPtr<T>> outputs;
    outputs.reserve(static_cast<size_t>(heads));
    for (int64_t i = 0; i < heads; ++i) {
        auto qi = tape.slice_cols(q, i * dk, dk);
        auto ki = tape.slice_cols(k, i * dk, dk);
        auto vi = tape.slice_cols(v, i * dk, dk);
        TensorPtr<T> attn;
        outputs.push_back(attention_head(tape, qi, ki, vi, head_attn ? &attn : nullptr));
        if (head_attn) head_attn->push_back(attn);
    }
    auto merged = heads == 1 ? outputs[0] : tape.concat_cols(outputs);
    return tape.add_bias(tape.matmul(merged, block.w_out), block.b_out);
}

// Pre-norm block: x + MHA(LN(x)), then + MLP(LN(.)).
template <typename T>
TensorPtr<T> encoder_block(Tape<T>& tape, const TensorPtr<T>& x, const EncoderBlockParams<T>& block, int64_t heads,
                           T ln_eps, std::vector<TensorPtr<T>>* head_attn = nullptr) {
    auto attn_in = tape.layer_norm(x, block.ln1_gain, block.ln1_bias, ln_eps);
    auto after_attn = tape.add(x, multi_head_attention(tape, attn_in, block, heads, head_attn));
    auto mlp_in = tape.layer_norm(after_attn, block.ln2_gain, block.ln2_bias, ln_eps);
    auto hidden = tape.gelu(tape.add_bias(tape.matmul(mlp_in, block.w_fc1), block.b_fc1));
    auto mlp_out = tape.add_bias(tape.matmul(hidden, block.w_fc2), block.b_fc2);
    return tape.add(after_attn, mlp_out);
}

// Per-layer, per-head attention matrices gathered during a forward pass.
template <typename T>
struct AttentionTrace {
    std::vector<std::vector<TensorPtr<T>>> layers;
};

// Runs tokenization, N encoder blocks and the final layer norm; returns the
// classification-token feature vector of length embed_dim.
template <typename T>
TensorPtr<T> forward_features(Tape<T>& tape, const TensorPtr<T>& image, const ModelParams<T>& params,
                              const ViTConfig& cfg, AttentionTrace<T>* trace = nullptr) {
    if (image->rank() != 3 || image->shape[0] != cfg.channels || image->shape[1] != cfg.image_size ||
        image->shape[2] != cfg.image_size)
        throw ShapeError("forward_features: image " + shape_str(image->shape) + " does not match configured " +
                         std::to_string(cfg.channels) + "x" + std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_size));
    auto patches = patchify(tape, image, cfg.patch_size);
    auto x = embed_tokens(tape, patches, params);
    if (trace) trace->layers.assign(static_cast<size_t>(cfg.depth), {});
    for (int64_t i = 0; i < cfg.depth; ++i)
        x = encoder_block(tape, x, params.blocks[static_cast<size_t>(i)], cfg.heads, static_cast<T>(cfg.layer_norm_eps),
                          trace ? &trace->layers[static_cast<size_t>(i)] : nullptr);
    auto cls_row = tape.slice_rows(x, 0, 1);
    auto cls = tape.layer_norm(cls_row, params.final_ln_gain, params.final_ln_bias, static_cast<T>(cfg.layer_norm_eps));
    return tape.reshape(cls, {cfg.embed_dim});
}

// Model bundle as used by training, evaluation and the CLI.
template <typename T>
struct Model {
    ViTConfig cfg;
    bool se_enabled = true;
    ModelParams<T> params;
};

template <typename T>
Model<T> build_model(const ViTConfig& cfg, bool se_enabled, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1717));
    return Model<T>{cfg, se_enabled, init_model<T>(cfg, se_enabled, rng)};
}

template <typename T>
TensorPtr<T> forward_logits(Tape<T>& tape, const Model<T>& model, const TensorPtr<T>& image,
                            AttentionTrace<T>* trace = nullptr) {
    auto features = forward_features(tape, image, model.params, model.cfg, trace);
    return classify(tape, features, model.params.se ? &*model.params.se : nullptr, model.se_enabled,
                    model.params.w_head, model.params.b_head);
}

}  // namespace vitse
