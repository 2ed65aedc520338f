#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitse/config.hpp"
#include "vitse/model.hpp"

namespace vitse {

// One serialized tensor: name, dtype tag (0 = f32, 1 = f64), extents and the
// raw little-endian payload.
struct NamedTensor {
    std::string name;
    uint8_t dtype = 0;
    std::vector<int64_t> shape;
    std::vector<uint8_t> payload;
};

// Versioned binary model snapshot: magic `VSE1`, format version, both
// configs, rng seed, step counter and the named tensor table. Everything on
// the wire is little-endian; save(load(x)) reproduces x byte for byte.
struct Checkpoint {
    ViTConfig vit;
    TrainConfig train;
    uint64_t rng_seed = 0;
    uint64_t step = 0;
    std::vector<NamedTensor> tensors;
};

std::vector<uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_of(const Model<float>& model, const TrainConfig& train, uint64_t step);

// Rebuilds the model, validating the tensor table for completeness against
// the checkpoint's configs: every expected tensor present with the right
// shape, nothing extra.
Model<float> model_of(const Checkpoint& ck);

}  // namespace vitse
