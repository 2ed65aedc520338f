#include "vitse/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace vitse {

void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int64_t width, int64_t height) {
    if (static_cast<int64_t>(pixels.size()) != width * height)
        throw ShapeError("write_pgm: pixel count does not match " + std::to_string(width) + "x" +
                         std::to_string(height));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw ParseError("write failed for '" + path + "'");
}

void write_pgm_image(const std::string& path, const TensorPtr<float>& image) {
    if (image->rank() != 3) throw ShapeError("write_pgm_image: expected C x H x W, got " + shape_str(image->shape));
    const int64_t C = image->shape[0], H = image->shape[1], W = image->shape[2];
    std::vector<uint8_t> px(static_cast<size_t>(H * W));
    for (int64_t i = 0; i < H * W; ++i) {
        float v = 0;
        for (int64_t c = 0; c < C; ++c) v += image->data[c * H * W + i];
        v /= static_cast<float>(C);
        px[static_cast<size_t>(i)] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
    write_pgm(path, px, W, H);
}

namespace {

// Next whitespace-delimited token, skipping '#' comments per the PNM family.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

TensorPtr<float> read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    if (next_token(in) != "P5") throw ParseError("'" + path + "' is not a binary P5 PGM");
    int64_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoll(next_token(in));
        h = std::stoll(next_token(in));
        maxval = std::stoll(next_token(in));
    } catch (const std::exception&) {
        throw ParseError("'" + path + "': malformed PGM header");
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw ParseError("'" + path + "': unsupported PGM dimensions or maxval");
    std::vector<uint8_t> px(static_cast<size_t>(w * h));
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (in.gcount() != static_cast<std::streamsize>(px.size())) throw ParseError("'" + path + "': truncated PGM payload");
    auto img = Tensor<float>::zeros({1, h, w});
    for (size_t i = 0; i < px.size(); ++i) img->data[i] = static_cast<float>(px[i]) / static_cast<float>(maxval);
    return img;
}

}  // namespace vitse
