#include "vitse/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

#include "vitse/pgm.hpp"

namespace vitse {

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "?";
}

std::vector<size_t> Dataset::indices(Split s) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == s) out.push_back(i);
    return out;
}

std::vector<std::string> class_names(int64_t k) {
    if (k == 7) return {"Angry", "Disgust", "Fear", "Happy", "Sad", "Surprise", "Neutral"};
    std::vector<std::string> names;
    names.reserve(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; ++i) names.push_back("class_" + std::to_string(i));
    return names;
}

namespace {

constexpr int64_t kFerSide = 48;
constexpr int64_t kFerPixels = kFerSide * kFerSide;

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Strict non-negative integer parse; rejects empty, signs and trailing junk.
bool parse_uint(const std::string& tok, int64_t& out) {
    if (tok.empty() || tok.size() > 10) return false;
    int64_t v = 0;
    for (char c : tok) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace

Dataset parse_fer2013_csv(std::istream& in) {
    Dataset ds;
    ds.num_classes = 7;
    std::string line;
    int64_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    ++line_no;
    strip_cr(line);
    if (line != "emotion,pixels,Usage")
        throw ParseError(line_no, "expected header 'emotion,pixels,Usage', got '" + line + "'");
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const size_t first = line.find(',');
        const size_t last = line.rfind(',');
        if (first == std::string::npos || last == first)
            throw ParseError(line_no, "expected 3 comma-separated fields");
        const std::string emotion_tok = line.substr(0, first);
        const std::string pixels_tok = line.substr(first + 1, last - first - 1);
        const std::string usage_tok = line.substr(last + 1);

        int64_t emotion = -1;
        if (!parse_uint(emotion_tok, emotion) || emotion > 6)
            throw ParseError(line_no, "emotion '" + emotion_tok + "' not an index in 0..6");

        Sample s;
        s.label = emotion;
        s.image = Tensor<float>::zeros({1, kFerSide, kFerSide});
        std::istringstream px(pixels_tok);
        std::string tok;
        int64_t count = 0;
        while (px >> tok) {
            int64_t v = -1;
            if (!parse_uint(tok, v) || v > 255)
                throw ParseError(line_no, "pixel '" + tok + "' not an integer in 0..255");
            if (count >= kFerPixels) {
                ++count;
                break;
            }
            s.image->data[static_cast<size_t>(count)] = static_cast<float>(v) / 255.0f;
            ++count;
        }
        if (count != kFerPixels)
            throw ParseError(line_no, "expected " + std::to_string(kFerPixels) + " pixels, got " +
                                          std::to_string(count) + (count > kFerPixels ? " or more" : ""));

        if (usage_tok == "Training")
            s.split = Split::Train;
        else if (usage_tok == "PublicTest")
            s.split = Split::Valid;
        else if (usage_tok == "PrivateTest")
            s.split = Split::Test;
        else
            throw ParseError(line_no, "unknown usage tag '" + usage_tok + "'");
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset load_fer2013_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return parse_fer2013_csv(in);
}

namespace {

void stamp_blob(Tensor<float>& img, int64_t size, double cy, double cx, double sigma, double gain) {
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(cy - 3 * sigma));
    const int64_t y1 = std::min(size - 1, static_cast<int64_t>(cy + 3 * sigma) + 1);
    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(cx - 3 * sigma));
    const int64_t x1 = std::min(size - 1, static_cast<int64_t>(cx + 3 * sigma) + 1);
    for (int64_t y = y0; y <= y1; ++y)
        for (int64_t x = x0; x <= x1; ++x) {
            const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            img.data[static_cast<size_t>(y * size + x)] +=
                static_cast<float>(gain * std::exp(-d2 / (2 * sigma * sigma)));
        }
}

}  // namespace

Dataset synth_dataset(int64_t classes, int64_t per_class, int64_t image_size, uint64_t seed) {
    if (classes < 2) throw ContractError("synth_dataset: need at least 2 classes");
    if (per_class < 1 || image_size < 8) throw ContractError("synth_dataset: per_class >= 1 and image_size >= 8");
    Rng rng(derive_seed(seed, 0x5D47));
    Dataset ds;
    ds.num_classes = classes;
    const double s = static_cast<double>(image_size);
    for (int64_t k = 0; k < classes; ++k) {
        // Mouth curvature is the class signature, from full frown to full smile.
        const double class_curve = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(classes - 1);
        for (int64_t j = 0; j < per_class; ++j) {
            auto img = Tensor<float>::zeros({1, image_size, image_size});
            for (auto& v : img->data) v = 0.15f;

            const double cx = s / 2 + rng.uniform(-0.05, 0.05) * s;
            const double cy = s / 2 + rng.uniform(-0.05, 0.05) * s;
            const double gain = rng.uniform(0.8, 1.2);

            // face outline
            const double rx = 0.42 * s, ry = 0.46 * s;
            for (int64_t y = 0; y < image_size; ++y)
                for (int64_t x = 0; x < image_size; ++x) {
                    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
                    const double d = std::sqrt(dx * dx + dy * dy);
                    if (std::abs(d - 1.0) < 0.09)
                        img->data[static_cast<size_t>(y * image_size + x)] += 0.30f;
                }

            // eyes
            const double eye_dx = 0.18 * s * (1.0 + rng.uniform(-0.15, 0.15));
            const double eye_dy = 0.17 * s * (1.0 + rng.uniform(-0.15, 0.15));
            const double eye_sigma = 0.045 * s * (1.0 + rng.uniform(-0.15, 0.15));
            stamp_blob(*img, image_size, cy - eye_dy, cx - eye_dx, eye_sigma, 0.65);
            stamp_blob(*img, image_size, cy - eye_dy, cx + eye_dx, eye_sigma, 0.65);

            // mouth arc
            const double curve = class_curve + rng.uniform(-0.08, 0.08);
            const double mouth_w = 0.30 * s * (1.0 + rng.uniform(-0.1, 0.1));
            const double mouth_y = cy + 0.20 * s + rng.uniform(-0.03, 0.03) * s;
            const double depth = 0.16 * s;
            const int steps = static_cast<int>(6 * mouth_w) + 1;
            for (int t = 0; t <= steps; ++t) {
                const double u = -1.0 + 2.0 * t / steps;
                const double px = cx + u * mouth_w;
                const double py = mouth_y + curve * depth * (u * u - 0.5);
                stamp_blob(*img, image_size, py, px, 0.30 + 0.010 * s, 0.45);
            }

            for (auto& v : img->data) {
                const double noisy = v * gain + rng.uniform(-0.04, 0.04);
                v = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
            }
            ds.samples.push_back(Sample{img, k, Split::Train});
        }
    }
    return ds;
}

void export_dataset_pgm(const Dataset& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<int64_t> counters(static_cast<size_t>(data.num_classes), 0);
    for (const Sample& s : data.samples) {
        const int64_t idx = counters[static_cast<size_t>(s.label)]++;
        const std::string path =
            (std::filesystem::path(dir) / (std::to_string(s.label) + "_" + std::to_string(idx) + ".pgm")).string();
        write_pgm_image(path, s.image);
    }
}

TensorPtr<float> preprocess(const TensorPtr<float>& image, int64_t target_size, const NormStats& norm) {
    if (image->rank() != 3 || (image->shape[0] != 1 && image->shape[0] != 3))
        throw ShapeError("preprocess: expected 1- or 3-channel C x H x W image, got " + shape_str(image->shape));
    const int64_t C = image->shape[0], H = image->shape[1], W = image->shape[2];
    if (H < 1 || W < 1 || target_size < 1) throw ShapeError("preprocess: zero-size input or target");

    auto out = Tensor<float>::zeros({3, target_size, target_size});
    const double sy = static_cast<double>(H) / static_cast<double>(target_size);
    const double sx = static_cast<double>(W) / static_cast<double>(target_size);
    const float inv_std = static_cast<float>(1.0 / norm.std);
    const float mean = static_cast<float>(norm.mean);
    for (int64_t c = 0; c < 3; ++c) {
        const int64_t src_c = C == 1 ? 0 : c;
        const float* src = image->data.data() + src_c * H * W;
        float* dst = out->data.data() + c * target_size * target_size;
        for (int64_t y = 0; y < target_size; ++y) {
            double fy = (y + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
            const int64_t y0 = static_cast<int64_t>(fy);
            const int64_t y1 = std::min(y0 + 1, H - 1);
            const double wy = fy - static_cast<double>(y0);
            for (int64_t x = 0; x < target_size; ++x) {
                double fx = (x + 0.5) * sx - 0.5;
                fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
                const int64_t x0 = static_cast<int64_t>(fx);
                const int64_t x1 = std::min(x0 + 1, W - 1);
                const double wx = fx - static_cast<double>(x0);
                const double top = (1.0 - wx) * src[y0 * W + x0] + wx * src[y0 * W + x1];
                const double bot = (1.0 - wx) * src[y1 * W + x0] + wx * src[y1 * W + x1];
                const double v = (1.0 - wy) * top + wy * bot;
                dst[y * target_size + x] = (static_cast<float>(v) - mean) * inv_std;
            }
        }
    }
    return out;
}

TensorPtr<float> hflip(const TensorPtr<float>& image) {
    if (image->rank() != 3) throw ShapeError("hflip: expected C x H x W image, got " + shape_str(image->shape));
    const int64_t C = image->shape[0], H = image->shape[1], W = image->shape[2];
    auto out = Tensor<float>::zeros(image->shape);
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                out->data[(c * H + y) * W + x] = image->data[(c * H + y) * W + (W - 1 - x)];
    return out;
}

namespace {

void clamp01(Tensor<float>& t) {
    for (auto& v : t.data) v = std::clamp(v, 0.0f, 1.0f);
}

// Per-pixel channel mean; the grayscale image all jitter blends against.
std::vector<float> channel_mean(const Tensor<float>& img) {
    const int64_t C = img.shape[0], HW = img.shape[1] * img.shape[2];
    std::vector<float> gray(static_cast<size_t>(HW), 0.0f);
    for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < HW; ++i) gray[static_cast<size_t>(i)] += img.data[c * HW + i];
    for (auto& v : gray) v /= static_cast<float>(C);
    return gray;
}

}  // namespace

TensorPtr<float> augment(const TensorPtr<float>& image, Rng& rng, const AugmentConfig& cfg) {
    auto out = Tensor<float>::from(image->shape, image->data);
    const int64_t C = out->shape[0], HW = out->shape[1] * out->shape[2];

    if (cfg.flip_prob > 0 && rng.bernoulli(cfg.flip_prob)) out = hflip(out);

    if (cfg.grayscale_prob > 0 && rng.bernoulli(cfg.grayscale_prob)) {
        const auto gray = channel_mean(*out);
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < HW; ++i) out->data[c * HW + i] = gray[static_cast<size_t>(i)];
    }

    if (cfg.jitter_enabled) {
        const float brightness = static_cast<float>(rng.uniform(cfg.jitter_min, cfg.jitter_max));
        for (auto& v : out->data) v *= brightness;
        clamp01(*out);

        const float contrast = static_cast<float>(rng.uniform(cfg.jitter_min, cfg.jitter_max));
        double mean = 0;
        for (float v : out->data) mean += v;
        mean /= static_cast<double>(out->numel());
        for (auto& v : out->data) v = static_cast<float>(mean + contrast * (v - mean));
        clamp01(*out);

        const float saturation = static_cast<float>(rng.uniform(cfg.jitter_min, cfg.jitter_max));
        const auto gray = channel_mean(*out);
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < HW; ++i) {
                const float g = gray[static_cast<size_t>(i)];
                out->data[c * HW + i] = g + saturation * (out->data[c * HW + i] - g);
            }
        clamp01(*out);
    }
    return out;
}

}  // namespace vitse
