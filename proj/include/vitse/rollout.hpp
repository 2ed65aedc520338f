#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitse/model.hpp"

namespace vitse {

// Patch-relevance maps extracted from a traced forward pass. layer_maps[l]
// holds the cls-row patch scores of layer l's head-averaged attention;
// rollout holds the residual-aware product over all layers. Every map is
// normalized so its maximum patch score is 1 (all-zero maps stay zero).
struct AttentionMaps {
    int64_t grid = 0;
    std::vector<std::vector<float>> layer_maps;
    std::vector<float> rollout;
};

// Rollout recurrence: R_0 = I, R_l = (0.5 * mean_heads(A_l) + 0.5 * I) R_{l-1};
// the map is the cls row of R_N restricted to patch columns.
AttentionMaps attention_rollout(const AttentionTrace<float>& trace, int64_t grid);

// Nearest-neighbor upscale of a grid x grid score map to out_size pixels,
// 255 = score 1.
std::vector<uint8_t> scores_to_pixels(const std::vector<float>& scores, int64_t grid, int64_t out_size);

// Writes layer_01.pgm ... layer_NN.pgm and rollout.pgm under dir.
void write_attention_maps(const AttentionMaps& maps, int64_t image_size, const std::string& dir);

}  // namespace vitse
