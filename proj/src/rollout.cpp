#include "vitse/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "vitse/pgm.hpp"

namespace vitse {

namespace {

std::vector<float> head_average(const std::vector<TensorPtr<float>>& heads, int64_t tokens) {
    std::vector<float> avg(static_cast<size_t>(tokens * tokens), 0.0f);
    for (const auto& a : heads) {
        if (a->rank() != 2 || a->rows() != tokens || a->cols() != tokens)
            throw ShapeError("attention_rollout: attention matrix " + shape_str(a->shape) + " is not " +
                             std::to_string(tokens) + "x" + std::to_string(tokens));
        for (size_t i = 0; i < avg.size(); ++i) avg[i] += a->data[i];
    }
    for (auto& v : avg) v /= static_cast<float>(heads.size());
    return avg;
}

void normalize_max(std::vector<float>& scores) {
    float mx = 0.0f;
    for (float v : scores) mx = std::max(mx, v);
    if (mx > 0.0f)
        for (auto& v : scores) v /= mx;
}

std::vector<float> cls_patch_row(const std::vector<float>& matrix, int64_t tokens) {
    std::vector<float> scores(static_cast<size_t>(tokens - 1));
    for (int64_t j = 1; j < tokens; ++j) scores[static_cast<size_t>(j - 1)] = matrix[static_cast<size_t>(j)];
    normalize_max(scores);
    return scores;
}

}  // namespace

AttentionMaps attention_rollout(const AttentionTrace<float>& trace, int64_t grid) {
    const int64_t tokens = grid * grid + 1;
    AttentionMaps maps;
    maps.grid = grid;

    // running product R, row-major tokens x tokens, starting at identity
    std::vector<float> product(static_cast<size_t>(tokens * tokens), 0.0f);
    for (int64_t i = 0; i < tokens; ++i) product[static_cast<size_t>(i * tokens + i)] = 1.0f;

    for (const auto& heads : trace.layers) {
        if (heads.empty()) throw ShapeError("attention_rollout: layer without attention matrices");
        auto avg = head_average(heads, tokens);
        maps.layer_maps.push_back(cls_patch_row(avg, tokens));

        std::vector<float> mixed(avg.size());
        for (int64_t i = 0; i < tokens; ++i)
            for (int64_t j = 0; j < tokens; ++j)
                mixed[static_cast<size_t>(i * tokens + j)] =
                    0.5f * avg[static_cast<size_t>(i * tokens + j)] + (i == j ? 0.5f : 0.0f);

        std::vector<float> next(product.size(), 0.0f);
        for (int64_t i = 0; i < tokens; ++i)
            for (int64_t k = 0; k < tokens; ++k) {
                const float m = mixed[static_cast<size_t>(i * tokens + k)];
                for (int64_t j = 0; j < tokens; ++j)
                    next[static_cast<size_t>(i * tokens + j)] += m * product[static_cast<size_t>(k * tokens + j)];
            }
        product = std::move(next);
    }
    maps.rollout = cls_patch_row(product, tokens);
    return maps;
}

std::vector<uint8_t> scores_to_pixels(const std::vector<float>& scores, int64_t grid, int64_t out_size) {
    if (static_cast<int64_t>(scores.size()) != grid * grid)
        throw ShapeError("scores_to_pixels: expected " + std::to_string(grid * grid) + " scores, got " +
                         std::to_string(scores.size()));
    std::vector<uint8_t> px(static_cast<size_t>(out_size * out_size));
    for (int64_t y = 0; y < out_size; ++y)
        for (int64_t x = 0; x < out_size; ++x) {
            const int64_t gy = y * grid / out_size;
            const int64_t gx = x * grid / out_size;
            const float v = std::clamp(scores[static_cast<size_t>(gy * grid + gx)], 0.0f, 1.0f);
            px[static_cast<size_t>(y * out_size + x)] = static_cast<uint8_t>(std::lround(v * 255.0f));
        }
    return px;
}

void write_attention_maps(const AttentionMaps& maps, int64_t image_size, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto dirp = std::filesystem::path(dir);
    for (size_t l = 0; l < maps.layer_maps.size(); ++l) {
        char name[32];
        std::snprintf(name, sizeof(name), "layer_%02zu.pgm", l + 1);
        write_pgm((dirp / name).string(), scores_to_pixels(maps.layer_maps[l], maps.grid, image_size), image_size,
                  image_size);
    }
    write_pgm((dirp / "rollout.pgm").string(), scores_to_pixels(maps.rollout, maps.grid, image_size), image_size,
              image_size);
}

}  // namespace vitse
