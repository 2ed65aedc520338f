#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vitse/commands.hpp"
#include "vitse/runconfig.hpp"

namespace {

struct CommonFlags {
    std::string config_file;
    std::string seed;
    std::string se;
    std::string init;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_file, "key = value config file");
    sub->add_option("--seed", flags.seed, "rng seed (u64)");
    sub->add_option("--se", flags.se, "squeeze-excitation gate on|off")->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--init", flags.init, "checkpoint to start from");
}

vitse::RunConfig build_config(const CommonFlags& common,
                              const std::vector<std::pair<std::string, std::string>>& extra,
                              const std::string& default_preset) {
    vitse::ConfigBuilder builder;
    if (!default_preset.empty()) builder.set_preset(default_preset);
    if (!common.config_file.empty()) builder.load_file(common.config_file);
    if (!common.seed.empty()) builder.set("seed", common.seed, true);
    if (!common.se.empty()) builder.set("se", common.se, true);
    if (!common.init.empty()) builder.set("init", common.init, true);
    for (const auto& [k, v] : extra)
        if (!v.empty()) builder.set(k, v, true);
    return builder.build();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vision-Transformer-with-SE expression classifier"};
    app.require_subcommand(1);

    CommonFlags train_flags, eval_flags, attn_flags, grad_flags;
    std::string train_preset, train_data, train_out, train_epochs, train_max_steps;
    std::string eval_data, eval_out, eval_split;
    std::string attn_image, attn_out;
    std::string grad_eps;

    auto* train = app.add_subcommand("train", "train a model and write checkpoints + metrics");
    add_common(train, train_flags);
    train->add_option("--preset", train_preset, "architecture preset: toy, gradcheck, vit-b16-224");
    train->add_option("--data", train_data, "FER-2013 csv path or 'synth'");
    train->add_option("--out", train_out, "output directory");
    train->add_option("--epochs", train_epochs, "epoch count");
    train->add_option("--max-steps", train_max_steps, "cap on total optimizer steps");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint; prints accuracy, writes confusion csv");
    add_common(eval, eval_flags);
    eval->add_option("--data", eval_data, "FER-2013 csv path or 'synth'");
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--split", eval_split, "all|train|valid|test");

    auto* attn = app.add_subcommand("attnmap", "write per-layer and rollout attention maps as PGM");
    add_common(attn, attn_flags);
    attn->add_option("--image", attn_image, "input image (P5 PGM)");
    attn->add_option("--out", attn_out, "output directory");

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of all parameter gradients");
    add_common(grad, grad_flags);
    grad->add_option("--eps", grad_eps, "central-difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : vitse::kExitConfig;
    }

    try {
        if (train->parsed()) {
            auto cfg = build_config(train_flags,
                                    {{"preset", train_preset},
                                     {"data", train_data},
                                     {"out_dir", train_out},
                                     {"epochs", train_epochs},
                                     {"max_steps", train_max_steps}},
                                    "");
            return vitse::run_command("train", cfg, std::cout);
        }
        if (eval->parsed()) {
            auto cfg = build_config(eval_flags,
                                    {{"data", eval_data}, {"out_dir", eval_out}, {"eval_split", eval_split}}, "");
            return vitse::run_command("eval", cfg, std::cout);
        }
        if (attn->parsed()) {
            auto cfg = build_config(attn_flags, {{"image", attn_image}, {"out_dir", attn_out}}, "");
            return vitse::run_command("attnmap", cfg, std::cout);
        }
        auto cfg = build_config(grad_flags, {{"gradcheck_eps", grad_eps}}, "gradcheck");
        return vitse::run_command("gradcheck", cfg, std::cout);
    } catch (const vitse::ConfigError& e) {
        std::cout << "config error: " << e.what() << "\n";
        return vitse::kExitConfig;
    } catch (const std::exception& e) {
        std::cout << "error: " << e.what() << "\n";
        return vitse::kExitData;
    }
}
