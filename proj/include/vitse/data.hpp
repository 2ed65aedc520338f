#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vitse/rng.hpp"
#include "vitse/tensor.hpp"

namespace vitse {

enum class Split { Train, Valid, Test };

std::string split_name(Split s);

// One labeled image, C x H x W with values in [0,1] (pre-normalization).
struct Sample {
    TensorPtr<float> image;
    int64_t label = 0;
    Split split = Split::Train;
};

struct Dataset {
    std::vector<Sample> samples;
    int64_t num_classes = 0;

    std::vector<size_t> indices(Split s) const;
    bool empty() const { return samples.empty(); }
};

// The seven basic expression names in label order when k == 7, otherwise
// generic class_<i> names.
std::vector<std::string> class_names(int64_t k);

// FER-2013 CSV: header `emotion,pixels,Usage`, rows of an emotion index in
// 0..6, 2304 space-separated gray pixels (48x48, 0..255) and a usage tag.
// Malformed rows raise ParseError carrying the 1-based line number.
Dataset parse_fer2013_csv(std::istream& in);
Dataset load_fer2013_csv(const std::string& path);

// Procedural face-like corpus: class k controls mouth-arc curvature while
// blob placement, face position and global gain jitter per sample. Exactly
// classes * per_class samples, balanced, all tagged train, bit-identical for
// a fixed seed.
Dataset synth_dataset(int64_t classes, int64_t per_class, int64_t image_size, uint64_t seed);

// Writes every sample as <class>_<index>.pgm under dir.
void export_dataset_pgm(const Dataset& data, const std::string& dir);

struct NormStats {
    double mean = 0.5;
    double std = 0.5;
};

// Channel replication to 3, bilinear resize with half-pixel centers, then
// (x - mean) / std per channel.
TensorPtr<float> preprocess(const TensorPtr<float>& image, int64_t target_size, const NormStats& norm);

struct AugmentConfig {
    double flip_prob = 0.5;
    double grayscale_prob = 0.2;
    bool jitter_enabled = true;
    double jitter_min = 0.6;
    double jitter_max = 1.4;
};

// Random horizontal flip, random grayscale conversion and
// brightness/contrast/saturation jitter, in the [0,1] domain, clamped after
// every transform.
TensorPtr<float> augment(const TensorPtr<float>& image, Rng& rng, const AugmentConfig& cfg);

// Exact column reversal; an involution.
TensorPtr<float> hflip(const TensorPtr<float>& image);

}  // namespace vitse
