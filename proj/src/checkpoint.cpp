#include "vitse/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace vitse {

namespace {

constexpr uint32_t kVersion = 1;
const char kMagic[4] = {'V', 'S', 'E', '1'};

struct Writer {
    std::vector<uint8_t> buf;

    void u8(uint8_t v) { buf.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf.insert(buf.end(), s.begin(), s.end());
    }
    void bytes(const std::vector<uint8_t>& b) { buf.insert(buf.end(), b.begin(), b.end()); }
};

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size())
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  "checkpoint truncated at byte " + std::to_string(pos));
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
    std::vector<uint8_t> bytes(size_t n) {
        need(n);
        std::vector<uint8_t> b(buf.begin() + static_cast<ptrdiff_t>(pos),
                               buf.begin() + static_cast<ptrdiff_t>(pos + n));
        pos += n;
        return b;
    }
};

void write_vit(Writer& w, const ViTConfig& c) {
    w.i64(c.image_size);
    w.i64(c.patch_size);
    w.i64(c.channels);
    w.i64(c.embed_dim);
    w.i64(c.depth);
    w.i64(c.heads);
    w.i64(c.mlp_ratio);
    w.i64(c.num_classes);
    w.f64(c.layer_norm_eps);
    w.i64(c.se_reduction);
}

ViTConfig read_vit(Reader& r) {
    ViTConfig c;
    c.image_size = r.i64();
    c.patch_size = r.i64();
    c.channels = r.i64();
    c.embed_dim = r.i64();
    c.depth = r.i64();
    c.heads = r.i64();
    c.mlp_ratio = r.i64();
    c.num_classes = r.i64();
    c.layer_norm_eps = r.f64();
    c.se_reduction = r.i64();
    return c;
}

void write_train(Writer& w, const TrainConfig& t) {
    w.f64(t.learning_rate);
    w.i64(t.batch_size);
    w.i64(t.epochs);
    w.u8(t.pretrain_mode ? 1 : 0);
    w.f64(t.weight_decay);
    w.f64(t.adam_beta1);
    w.f64(t.adam_beta2);
    w.f64(t.adam_eps);
    w.u8(t.mixup_enabled ? 1 : 0);
    w.f64(t.mixup_alpha);
    w.u8(t.cutout_enabled ? 1 : 0);
    w.i64(t.cutout_size);
    w.f64(t.flip_prob);
    w.f64(t.grayscale_prob);
    w.u8(t.jitter_enabled ? 1 : 0);
    w.f64(t.jitter_min);
    w.f64(t.jitter_max);
    w.f64(t.norm_mean);
    w.f64(t.norm_std);
    w.u64(t.rng_seed);
    w.u8(t.se_enabled ? 1 : 0);
    w.i64(t.max_steps);
}

TrainConfig read_train(Reader& r) {
    TrainConfig t;
    t.learning_rate = r.f64();
    t.batch_size = r.i64();
    t.epochs = r.i64();
    t.pretrain_mode = r.u8() != 0;
    t.weight_decay = r.f64();
    t.adam_beta1 = r.f64();
    t.adam_beta2 = r.f64();
    t.adam_eps = r.f64();
    t.mixup_enabled = r.u8() != 0;
    t.mixup_alpha = r.f64();
    t.cutout_enabled = r.u8() != 0;
    t.cutout_size = r.i64();
    t.flip_prob = r.f64();
    t.grayscale_prob = r.f64();
    t.jitter_enabled = r.u8() != 0;
    t.jitter_min = r.f64();
    t.jitter_max = r.f64();
    t.norm_mean = r.f64();
    t.norm_std = r.f64();
    t.rng_seed = r.u64();
    t.se_enabled = r.u8() != 0;
    t.max_steps = r.i64();
    return t;
}

size_t dtype_size(uint8_t code) {
    if (code == 0) return 4;
    if (code == 1) return 8;
    throw CheckpointError(CheckpointError::Kind::BadDtype, "unknown dtype code " + std::to_string(code));
}

}  // namespace

std::vector<uint8_t> encode_checkpoint(const Checkpoint& ck) {
    Writer w;
    w.buf.insert(w.buf.end(), kMagic, kMagic + 4);
    w.u32(kVersion);
    write_vit(w, ck.vit);
    write_train(w, ck.train);
    w.u64(ck.rng_seed);
    w.u64(ck.step);
    w.u32(static_cast<uint32_t>(ck.tensors.size()));
    for (const auto& t : ck.tensors) {
        w.str(t.name);
        w.u8(t.dtype);
        w.u32(static_cast<uint32_t>(t.shape.size()));
        for (int64_t e : t.shape) w.i64(e);
        int64_t n = 1;
        for (int64_t e : t.shape) n *= e;
        if (t.payload.size() != static_cast<size_t>(n) * dtype_size(t.dtype))
            throw CheckpointError(CheckpointError::Kind::BadShape,
                                  "tensor '" + t.name + "' payload does not match its shape");
        w.bytes(t.payload);
    }
    return w.buf;
}

Checkpoint decode_checkpoint(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CheckpointError(CheckpointError::Kind::BadMagic, "not a checkpoint file (bad magic)");
    r.pos = 4;
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.vit = read_vit(r);
    ck.train = read_train(r);
    ck.rng_seed = r.u64();
    ck.step = r.u64();
    const uint32_t count = r.u32();
    ck.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = r.str();
        t.dtype = r.u8();
        const uint32_t rank = r.u32();
        t.shape.reserve(rank);
        int64_t n = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            const int64_t e = r.i64();
            if (e <= 0)
                throw CheckpointError(CheckpointError::Kind::BadShape,
                                      "tensor '" + t.name + "' has non-positive extent");
            t.shape.push_back(e);
            n *= e;
        }
        t.payload = r.bytes(static_cast<size_t>(n) * dtype_size(t.dtype));
        ck.tensors.push_back(std::move(t));
    }
    if (r.pos != bytes.size())
        throw CheckpointError(CheckpointError::Kind::Truncated,
                              "checkpoint has " + std::to_string(bytes.size() - r.pos) + " trailing bytes");
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const auto bytes = encode_checkpoint(ck);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError(CheckpointError::Kind::Truncated, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::Truncated, "write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::Truncated, "cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

Checkpoint checkpoint_of(const Model<float>& model, const TrainConfig& train, uint64_t step) {
    Checkpoint ck;
    ck.vit = model.cfg;
    ck.train = train;
    ck.train.se_enabled = model.se_enabled;
    ck.rng_seed = train.rng_seed;
    ck.step = step;
    for (const auto& [name, p] : model.params.named_parameters()) {
        NamedTensor t;
        t.name = name;
        t.dtype = 0;
        t.shape = p->shape;
        t.payload.resize(p->data.size() * 4);
        for (size_t i = 0; i < p->data.size(); ++i) {
            const uint32_t bits = std::bit_cast<uint32_t>(p->data[i]);
            for (int byte = 0; byte < 4; ++byte)
                t.payload[i * 4 + static_cast<size_t>(byte)] = static_cast<uint8_t>(bits >> (8 * byte));
        }
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

Model<float> model_of(const Checkpoint& ck) {
    ck.vit.validate();
    Model<float> model{ck.vit, ck.train.se_enabled, zero_model<float>(ck.vit, ck.train.se_enabled)};

    std::unordered_map<std::string, const NamedTensor*> table;
    for (const auto& t : ck.tensors) table[t.name] = &t;

    for (auto& [name, p] : model.params.named_parameters()) {
        const auto it = table.find(name);
        if (it == table.end())
            throw CheckpointError(CheckpointError::Kind::MissingTensor, "missing tensor '" + name + "'");
        const NamedTensor& t = *it->second;
        if (t.shape != p->shape)
            throw CheckpointError(CheckpointError::Kind::BadShape, "tensor '" + name + "' has shape " +
                                                                       shape_str(t.shape) + ", expected " +
                                                                       shape_str(p->shape));
        const size_t width = dtype_size(t.dtype);
        for (size_t i = 0; i < p->data.size(); ++i) {
            if (width == 4) {
                uint32_t bits = 0;
                for (int byte = 0; byte < 4; ++byte)
                    bits |= static_cast<uint32_t>(t.payload[i * 4 + static_cast<size_t>(byte)]) << (8 * byte);
                p->data[i] = std::bit_cast<float>(bits);
            } else {
                uint64_t bits = 0;
                for (int byte = 0; byte < 8; ++byte)
                    bits |= static_cast<uint64_t>(t.payload[i * 8 + static_cast<size_t>(byte)]) << (8 * byte);
                p->data[i] = static_cast<float>(std::bit_cast<double>(bits));
            }
        }
        table.erase(it);
    }
    if (!table.empty())
        throw CheckpointError(CheckpointError::Kind::UnexpectedTensor,
                              "unexpected tensor '" + table.begin()->first + "' in checkpoint");
    return model;
}

}  // namespace vitse
