#include "vitse/runconfig.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace vitse {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected on/off, got '" + v + "'");
}

int64_t parse_i64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int64_t r = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t r = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

struct ApplyState {
    RunConfig* cfg;
    bool epochs_explicit = false;
    bool pretrain_requested = false;
};

using Setter = std::function<void(ApplyState&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"image_size", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.image_size = parse_i64(k, v); }},
        {"patch_size", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.patch_size = parse_i64(k, v); }},
        {"channels", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.channels = parse_i64(k, v); }},
        {"embed_dim", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.embed_dim = parse_i64(k, v); }},
        {"depth", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.depth = parse_i64(k, v); }},
        {"heads", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.heads = parse_i64(k, v); }},
        {"mlp_ratio", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.mlp_ratio = parse_i64(k, v); }},
        {"num_classes", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.num_classes = parse_i64(k, v); }},
        {"layer_norm_eps", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.layer_norm_eps = parse_f64(k, v); }},
        {"se_reduction", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->vit.se_reduction = parse_i64(k, v); }},

        {"lr", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.learning_rate = parse_f64(k, v); }},
        {"batch_size", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.batch_size = parse_i64(k, v); }},
        {"epochs",
         [](ApplyState& s, const std::string& k, const std::string& v) {
             s.cfg->train.epochs = parse_i64(k, v);
             s.epochs_explicit = true;
         }},
        {"pretrain",
         [](ApplyState& s, const std::string& k, const std::string& v) {
             s.cfg->train.pretrain_mode = parse_bool(k, v);
             s.pretrain_requested = s.cfg->train.pretrain_mode;
         }},
        {"weight_decay", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.weight_decay = parse_f64(k, v); }},
        {"beta1", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.adam_beta1 = parse_f64(k, v); }},
        {"beta2", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.adam_beta2 = parse_f64(k, v); }},
        {"adam_eps", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.adam_eps = parse_f64(k, v); }},
        {"mixup", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.mixup_enabled = parse_bool(k, v); }},
        {"mixup_alpha", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.mixup_alpha = parse_f64(k, v); }},
        {"cutout", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.cutout_enabled = parse_bool(k, v); }},
        {"cutout_size", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.cutout_size = parse_i64(k, v); }},
        {"flip_prob", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.flip_prob = parse_f64(k, v); }},
        {"grayscale_prob", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.grayscale_prob = parse_f64(k, v); }},
        {"jitter", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.jitter_enabled = parse_bool(k, v); }},
        {"jitter_min", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.jitter_min = parse_f64(k, v); }},
        {"jitter_max", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.jitter_max = parse_f64(k, v); }},
        {"norm_mean", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.norm_mean = parse_f64(k, v); }},
        {"norm_std", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.norm_std = parse_f64(k, v); }},
        {"seed", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.rng_seed = parse_u64(k, v); }},
        {"se", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.se_enabled = parse_bool(k, v); }},
        {"max_steps", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->train.max_steps = parse_i64(k, v); }},

        {"data", [](ApplyState& s, const std::string&, const std::string& v) { s.cfg->data = v; }},
        {"synth_classes", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->synth_classes = parse_i64(k, v); }},
        {"synth_per_class", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->synth_per_class = parse_i64(k, v); }},
        {"synth_image_size", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->synth_image_size = parse_i64(k, v); }},
        {"synth_seed", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->synth_seed = parse_u64(k, v); }},
        {"synth_export", [](ApplyState& s, const std::string&, const std::string& v) { s.cfg->synth_export = v; }},
        {"out_dir", [](ApplyState& s, const std::string&, const std::string& v) { s.cfg->out_dir = v; }},
        {"init", [](ApplyState& s, const std::string&, const std::string& v) { s.cfg->init_checkpoint = v; }},
        {"image", [](ApplyState& s, const std::string&, const std::string& v) { s.cfg->image_path = v; }},
        {"eval_split",
         [](ApplyState& s, const std::string& k, const std::string& v) {
             if (v != "all" && v != "train" && v != "valid" && v != "test")
                 throw ConfigError(k + ": expected all/train/valid/test, got '" + v + "'");
             s.cfg->eval_split = v;
         }},
        {"gradcheck_eps", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->gradcheck_eps = parse_f64(k, v); }},
        {"gradcheck_tolerance", [](ApplyState& s, const std::string& k, const std::string& v) { s.cfg->gradcheck_tolerance = parse_f64(k, v); }},
    };
    return table;
}

void apply_preset_to(RunConfig& cfg, const std::string& name) {
    if (name == "vit-b16-224") {
        cfg.vit = vit_b16_224();
    } else if (name == "toy") {
        cfg.vit = toy_config();
        const uint64_t seed = cfg.train.rng_seed;
        cfg.train = toy_train_config();
        cfg.train.rng_seed = seed;
    } else if (name == "gradcheck") {
        cfg.vit = gradcheck_config();
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected toy, gradcheck or vit-b16-224)");
    }
}

}  // namespace

const std::vector<std::string>& ConfigBuilder::known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        k.push_back("preset");
        for (const auto& [key, fn] : setters()) k.push_back(key);
        std::sort(k.begin(), k.end());
        return k;
    }();
    return keys;
}

void ConfigBuilder::set_preset(const std::string& name) { preset_ = name; }

void ConfigBuilder::set(const std::string& key, const std::string& value, bool from_cli) {
    if (key == "preset") {
        set_preset(value);
        return;
    }
    if (setters().find(key) == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    (from_cli ? cli_kvs_ : file_kvs_).emplace_back(key, value);
}

void ConfigBuilder::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key or value");
        set(key, value, false);
    }
}

RunConfig ConfigBuilder::build() const {
    RunConfig cfg;
    if (!preset_.empty()) apply_preset_to(cfg, preset_);
    ApplyState state{&cfg};
    for (const auto& [k, v] : file_kvs_) setters().at(k)(state, k, v);
    for (const auto& [k, v] : cli_kvs_) setters().at(k)(state, k, v);
    if (state.pretrain_requested && !state.epochs_explicit)
        cfg.train.epochs = resolve_pretrain_epochs(true);
    cfg.vit.validate();
    cfg.train.validate();
    return cfg;
}

void echo_config(std::ostream& os, const RunConfig& cfg) {
    const auto b = [](bool v) { return v ? "on" : "off"; };
    os << "image_size = " << cfg.vit.image_size << "\n"
       << "patch_size = " << cfg.vit.patch_size << "\n"
       << "channels = " << cfg.vit.channels << "\n"
       << "embed_dim = " << cfg.vit.embed_dim << "\n"
       << "depth = " << cfg.vit.depth << "\n"
       << "heads = " << cfg.vit.heads << "\n"
       << "mlp_ratio = " << cfg.vit.mlp_ratio << "\n"
       << "num_classes = " << cfg.vit.num_classes << "\n"
       << "layer_norm_eps = " << cfg.vit.layer_norm_eps << "\n"
       << "se_reduction = " << cfg.vit.se_reduction << "\n"
       << "lr = " << cfg.train.learning_rate << "\n"
       << "batch_size = " << cfg.train.batch_size << "\n"
       << "epochs = " << cfg.train.epochs << "\n"
       << "pretrain = " << b(cfg.train.pretrain_mode) << "\n"
       << "weight_decay = " << cfg.train.weight_decay << "\n"
       << "beta1 = " << cfg.train.adam_beta1 << "\n"
       << "beta2 = " << cfg.train.adam_beta2 << "\n"
       << "adam_eps = " << cfg.train.adam_eps << "\n"
       << "mixup = " << b(cfg.train.mixup_enabled) << "\n"
       << "mixup_alpha = " << cfg.train.mixup_alpha << "\n"
       << "cutout = " << b(cfg.train.cutout_enabled) << "\n"
       << "cutout_size = " << cfg.train.cutout_size << "\n"
       << "flip_prob = " << cfg.train.flip_prob << "\n"
       << "grayscale_prob = " << cfg.train.grayscale_prob << "\n"
       << "jitter = " << b(cfg.train.jitter_enabled) << "\n"
       << "jitter_min = " << cfg.train.jitter_min << "\n"
       << "jitter_max = " << cfg.train.jitter_max << "\n"
       << "norm_mean = " << cfg.train.norm_mean << "\n"
       << "norm_std = " << cfg.train.norm_std << "\n"
       << "seed = " << cfg.train.rng_seed << "\n"
       << "se = " << b(cfg.train.se_enabled) << "\n"
       << "max_steps = " << cfg.train.max_steps << "\n"
       << "data = " << cfg.data << "\n"
       << "synth_classes = " << cfg.synth_classes << "\n"
       << "synth_per_class = " << cfg.synth_per_class << "\n"
       << "synth_image_size = " << cfg.synth_image_size << "\n"
       << "synth_seed = " << cfg.synth_seed << "\n"
       << "out_dir = " << cfg.out_dir << "\n"
       << "eval_split = " << cfg.eval_split << "\n"
       << "gradcheck_eps = " << cfg.gradcheck_eps << "\n"
       << "gradcheck_tolerance = " << cfg.gradcheck_tolerance << "\n";
    if (!cfg.synth_export.empty()) os << "synth_export = " << cfg.synth_export << "\n";
    if (!cfg.init_checkpoint.empty()) os << "init = " << cfg.init_checkpoint << "\n";
    if (!cfg.image_path.empty()) os << "image = " << cfg.image_path << "\n";
}

}  // namespace vitse
