#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vitse/config.hpp"

namespace vitse {

// Everything a subcommand needs: architecture, training recipe, data source
// and output locations. Populated from defaults, an optional preset, a
// key=value config file and CLI overrides, in that precedence order.
struct RunConfig {
    ViTConfig vit;
    TrainConfig train;

    std::string data = "synth";  // "synth" or a FER-2013 CSV path
    int64_t synth_classes = 3;
    int64_t synth_per_class = 100;
    int64_t synth_image_size = 0;  // 0 = follow vit.image_size
    uint64_t synth_seed = 1234;
    std::string synth_export;  // when set, dump the synthetic corpus as PGMs

    std::string out_dir = "run";
    std::string init_checkpoint;
    std::string image_path;        // attnmap input
    std::string eval_split = "all";  // all | train | valid | test
    double gradcheck_eps = 1e-5;
    double gradcheck_tolerance = 1e-4;
};

// Builds a RunConfig in layers. Unknown keys and malformed values raise
// ConfigError. `preset` may name toy, gradcheck or vit-b16-224.
class ConfigBuilder {
public:
    void set_preset(const std::string& name);

    // One `key = value` assignment; later sources win.
    void set(const std::string& key, const std::string& value, bool from_cli);

    // Parses a config file: one key = value per line, '#' comments.
    void load_file(const std::string& path);

    RunConfig build() const;

    static const std::vector<std::string>& known_keys();

private:
    std::string preset_;
    std::vector<std::pair<std::string, std::string>> file_kvs_;
    std::vector<std::pair<std::string, std::string>> cli_kvs_;
};

// Writes the fully resolved configuration, one key = value per line.
void echo_config(std::ostream& os, const RunConfig& cfg);

}  // namespace vitse
