#pragma once

#include <cstdint>
#include <string>

#include "vitse/errors.hpp"

namespace vitse {

// Architecture hyperparameters. Defaults are the full-size preset
// (vit-b16-224); toy_config() and gradcheck_config() are the small presets
// used for fast runs and numeric verification.
struct ViTConfig {
    int64_t image_size = 224;
    int64_t patch_size = 16;
    int64_t channels = 3;
    int64_t embed_dim = 768;
    int64_t depth = 12;
    int64_t heads = 12;
    int64_t mlp_ratio = 4;
    int64_t num_classes = 7;
    double layer_norm_eps = 1e-6;
    int64_t se_reduction = 4;

    int64_t grid() const { return image_size / patch_size; }
    int64_t num_patches() const { return grid() * grid(); }
    int64_t patch_dim() const { return channels * patch_size * patch_size; }
    int64_t head_dim() const { return embed_dim / heads; }
    int64_t mlp_hidden() const { return mlp_ratio * embed_dim; }
    int64_t se_bottleneck() const { return embed_dim / se_reduction; }

    void validate() const {
        if (image_size <= 0 || patch_size <= 0 || channels <= 0 || embed_dim <= 0 || depth < 0 || heads <= 0 ||
            mlp_ratio <= 0 || se_reduction <= 0)
            throw ConfigError("all architecture extents must be positive");
        if (image_size % patch_size != 0)
            throw ConfigError("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
                              std::to_string(patch_size));
        if (embed_dim % heads != 0)
            throw ConfigError("embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
                              std::to_string(heads));
        if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
        if (se_bottleneck() < 1) throw ConfigError("SE bottleneck embed_dim/se_reduction must be >= 1");
        if (layer_norm_eps <= 0) throw ConfigError("layer_norm_eps must be positive");
    }
};

inline ViTConfig vit_b16_224() { return ViTConfig{}; }

inline ViTConfig toy_config() {
    ViTConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 4;
    cfg.channels = 3;
    cfg.embed_dim = 32;
    cfg.depth = 2;
    cfg.heads = 4;
    cfg.mlp_ratio = 4;
    cfg.num_classes = 3;
    return cfg;
}

// Small enough for central-difference checking of every parameter: a 2x2
// patch grid (4 patch tokens plus cls) at width 16.
inline ViTConfig gradcheck_config() {
    ViTConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.channels = 3;
    cfg.embed_dim = 16;
    cfg.depth = 2;
    cfg.heads = 4;
    cfg.mlp_ratio = 4;
    cfg.num_classes = 3;
    return cfg;
}

// Training recipe. Defaults follow the published schedule: lr 1.6e-4,
// batch 16, 10 epochs (8 when pretrain_mode), AdamW, Mixup + Cutout, the
// flip/grayscale/jitter augmentations, and 0.5/0.5 input normalization.
struct TrainConfig {
    double learning_rate = 1.6e-4;
    int64_t batch_size = 16;
    int64_t epochs = 10;
    bool pretrain_mode = false;  // pretrain stage runs 8 epochs instead of 10
    double weight_decay = 0.05;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool mixup_enabled = true;
    double mixup_alpha = 0.2;
    bool cutout_enabled = true;
    int64_t cutout_size = 0;  // 0 = resolve to image_size / 4 at run setup
    double flip_prob = 0.5;
    double grayscale_prob = 0.2;
    bool jitter_enabled = true;
    double jitter_min = 0.6;
    double jitter_max = 1.4;
    double norm_mean = 0.5;
    double norm_std = 0.5;
    uint64_t rng_seed = 0;
    bool se_enabled = true;
    int64_t max_steps = 0;  // 0 = no cap on optimizer steps

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (mixup_alpha < 0) throw ConfigError("mixup_alpha must be >= 0");
        if (cutout_size < 0) throw ConfigError("cutout_size must be >= 0");
        if (norm_std == 0) throw ConfigError("norm_std must be nonzero");
        if (jitter_min > jitter_max) throw ConfigError("jitter_min must be <= jitter_max");
        if (flip_prob < 0 || flip_prob > 1 || grayscale_prob < 0 || grayscale_prob > 1)
            throw ConfigError("augmentation probabilities must lie in [0, 1]");
    }
};

// Training overrides for the toy preset: fast deterministic convergence on
// the synthetic corpus, augmentation and regularisers off.
inline TrainConfig toy_train_config() {
    TrainConfig t;
    t.learning_rate = 2e-3;
    t.mixup_enabled = false;
    t.cutout_enabled = false;
    t.flip_prob = 0.0;
    t.grayscale_prob = 0.0;
    t.jitter_enabled = false;
    return t;
}

// Effective epoch count: an explicit epochs value wins; otherwise the
// pretrain stage default is 8 and the fine-tune default 10.
inline int64_t resolve_pretrain_epochs(bool pretrain_mode) { return pretrain_mode ? 8 : 10; }

inline int64_t resolve_cutout_size(const TrainConfig& t, int64_t image_size) {
    return t.cutout_size > 0 ? t.cutout_size : image_size / 4;
}

}  // namespace vitse
