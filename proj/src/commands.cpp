#include "vitse/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "vitse/checkpoint.hpp"
#include "vitse/data.hpp"
#include "vitse/gradcheck.hpp"
#include "vitse/pgm.hpp"
#include "vitse/rollout.hpp"
#include "vitse/train.hpp"

namespace vitse {

namespace {

namespace fs = std::filesystem;

Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.data == "synth") {
        const int64_t size = cfg.synth_image_size > 0 ? cfg.synth_image_size : cfg.vit.image_size;
        auto ds = synth_dataset(cfg.synth_classes, cfg.synth_per_class, size, cfg.synth_seed);
        if (!cfg.synth_export.empty()) export_dataset_pgm(ds, cfg.synth_export);
        return ds;
    }
    return load_fer2013_csv(cfg.data);
}

void check_labels(const Dataset& ds, const ViTConfig& vit) {
    if (ds.num_classes != vit.num_classes)
        throw ConfigError("dataset has " + std::to_string(ds.num_classes) + " classes but the model expects " +
                          std::to_string(vit.num_classes));
}

Model<float> model_from_config(const RunConfig& cfg) {
    if (!cfg.init_checkpoint.empty()) {
        auto ck = load_checkpoint(cfg.init_checkpoint);
        if (ck.vit.image_size != cfg.vit.image_size || ck.vit.patch_size != cfg.vit.patch_size ||
            ck.vit.channels != cfg.vit.channels || ck.vit.embed_dim != cfg.vit.embed_dim ||
            ck.vit.depth != cfg.vit.depth || ck.vit.heads != cfg.vit.heads ||
            ck.vit.mlp_ratio != cfg.vit.mlp_ratio || ck.vit.num_classes != cfg.vit.num_classes ||
            ck.vit.se_reduction != cfg.vit.se_reduction)
            throw ConfigError("checkpoint architecture does not match the requested configuration");
        if (ck.train.se_enabled != cfg.train.se_enabled)
            throw ConfigError("checkpoint was saved with se " + std::string(ck.train.se_enabled ? "on" : "off") +
                              " but the run requests se " + std::string(cfg.train.se_enabled ? "on" : "off"));
        return model_of(ck);
    }
    return build_model<float>(cfg.vit, cfg.train.se_enabled, cfg.train.rng_seed);
}

std::string format_loss(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string format_acc(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string epoch_checkpoint_name(int64_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "epoch_%03lld.ckpt", static_cast<long long>(epoch));
    return buf;
}

void write_confusion_csv(const std::string& path, const EvalReport& report, int64_t k) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    const auto names = class_names(k);
    for (int64_t j = 0; j < k; ++j) out << (j ? "," : "") << names[static_cast<size_t>(j)];
    out << "\n";
    for (int64_t i = 0; i < k; ++i) {
        for (int64_t j = 0; j < k; ++j)
            out << (j ? "," : "") << report.confusion[static_cast<size_t>(i)][static_cast<size_t>(j)];
        out << "\n";
    }
}

}  // namespace

int cmd_train(const RunConfig& cfg, std::ostream& log) {
    auto data = load_dataset(cfg);
    check_labels(data, cfg.vit);

    log << "resolved configuration:\n";
    echo_config(log, cfg);

    auto model = model_from_config(cfg);
    auto params = model.params.named_parameters();
    auto opt = OptimizerState<float>::for_params(params);
    Rng train_rng(derive_seed(cfg.train.rng_seed, 0x7A17));

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    std::ofstream metrics((out / "metrics.csv").string());
    if (!metrics) throw ParseError("cannot open metrics csv under '" + cfg.out_dir + "'");
    metrics << "epoch,train_loss,valid_accuracy\n";
    metrics.flush();

    const bool has_valid = !data.indices(Split::Valid).empty();
    int64_t total_steps = 0;
    for (int64_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        int64_t budget = 0;
        if (cfg.train.max_steps > 0) {
            budget = cfg.train.max_steps - total_steps;
            if (budget <= 0) break;
        }
        const auto result = train_epoch(model, data, cfg.train, opt, train_rng, budget);
        total_steps += result.steps;
        const auto report = evaluate(model, data, norm_of(cfg.train), has_valid ? Split::Valid : Split::Train);
        metrics << epoch << "," << format_loss(result.mean_loss) << "," << format_acc(report.accuracy) << "\n";
        metrics.flush();
        log << "epoch " << epoch << ": loss " << format_loss(result.mean_loss) << ", "
            << (has_valid ? "valid" : "train") << " accuracy " << format_acc(report.accuracy) << "\n";
        save_checkpoint((out / epoch_checkpoint_name(epoch)).string(),
                        checkpoint_of(model, cfg.train, static_cast<uint64_t>(total_steps)));
    }
    save_checkpoint((out / "final.ckpt").string(), checkpoint_of(model, cfg.train, static_cast<uint64_t>(total_steps)));
    log << "wrote " << (out / "final.ckpt").string() << " after " << total_steps << " steps\n";
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& log) {
    if (cfg.init_checkpoint.empty()) throw ConfigError("eval requires --init <checkpoint>");
    auto ck = load_checkpoint(cfg.init_checkpoint);
    auto model = model_of(ck);
    auto data = load_dataset(cfg);
    check_labels(data, model.cfg);

    std::optional<Split> split;
    if (cfg.eval_split == "train") split = Split::Train;
    else if (cfg.eval_split == "valid") split = Split::Valid;
    else if (cfg.eval_split == "test") split = Split::Test;

    const auto report = evaluate(model, data, NormStats{ck.train.norm_mean, ck.train.norm_std}, split);
    log << "samples: " << report.count << "\n";
    log << "accuracy: " << format_acc(report.accuracy) << "\n";
    const auto names = class_names(model.cfg.num_classes);
    for (int64_t c = 0; c < model.cfg.num_classes; ++c)
        log << names[static_cast<size_t>(c)] << ": " << format_acc(report.per_class_accuracy[static_cast<size_t>(c)])
            << "\n";

    fs::create_directories(cfg.out_dir);
    const std::string csv = (fs::path(cfg.out_dir) / "confusion.csv").string();
    write_confusion_csv(csv, report, model.cfg.num_classes);
    log << "wrote " << csv << "\n";
    return kExitOk;
}

int cmd_attnmap(const RunConfig& cfg, std::ostream& log) {
    if (cfg.init_checkpoint.empty()) throw ConfigError("attnmap requires --init <checkpoint>");
    if (cfg.image_path.empty()) throw ConfigError("attnmap requires --image <pgm>");
    auto ck = load_checkpoint(cfg.init_checkpoint);
    auto model = model_of(ck);

    auto image = read_pgm(cfg.image_path);
    auto input = preprocess(image, model.cfg.image_size, NormStats{ck.train.norm_mean, ck.train.norm_std});

    Tape<float> tape(false);
    AttentionTrace<float> trace;
    forward_logits(tape, model, input, &trace);

    const auto maps = attention_rollout(trace, model.cfg.grid());
    write_attention_maps(maps, model.cfg.image_size, cfg.out_dir);
    log << "wrote " << maps.layer_maps.size() << " layer maps and rollout.pgm under " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& log) {
    cfg.vit.validate();
    if (cfg.vit.num_patches() > 4 || cfg.vit.embed_dim > 16)
        throw ConfigError("gradcheck needs a toy-size config (at most 4 patches, embed_dim <= 16); got " +
                          std::to_string(cfg.vit.num_patches()) + " patches at width " +
                          std::to_string(cfg.vit.embed_dim));

    const auto t0 = std::chrono::steady_clock::now();
    auto model = build_model<double>(cfg.vit, cfg.train.se_enabled, cfg.train.rng_seed);
    Rng rng(derive_seed(cfg.train.rng_seed, 0x6C41));
    auto image = Tensor<double>::zeros({cfg.vit.channels, cfg.vit.image_size, cfg.vit.image_size});
    for (auto& v : image->data) v = rng.uniform(-1.0, 1.0);
    auto target = one_hot<double>(1 % cfg.vit.num_classes, cfg.vit.num_classes);

    const auto loss_value = [&]() {
        Tape<double> tape(false);
        auto logits = forward_logits(tape, model, image);
        return cross_entropy(tape, tape.reshape(logits, {1, cfg.vit.num_classes}), target)->data[0];
    };

    {
        Tape<double> tape;
        auto logits = forward_logits(tape, model, image);
        auto loss = cross_entropy(tape, tape.reshape(logits, {1, cfg.vit.num_classes}), target);
        model.params.zero_grads();
        tape.backward(loss);
    }

    const double eps = cfg.gradcheck_eps;
    double worst = 0.0;
    std::string worst_name;
    bool ok = true;
    for (const auto& [name, p] : model.params.named_parameters()) {
        const double err = finite_diff_check<double>(loss_value, p, eps);
        log << name << ": max relative error " << std::scientific << std::setprecision(3) << err
            << std::defaultfloat << "\n";
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
        if (!(err < cfg.gradcheck_tolerance)) ok = false;
    }
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    log << "worst group: " << worst_name << " at " << std::scientific << std::setprecision(3) << worst
        << std::defaultfloat << " (tolerance " << cfg.gradcheck_tolerance << ", " << elapsed << " ms)\n";
    log << (ok ? "gradcheck PASS\n" : "gradcheck FAIL\n");
    return ok ? kExitOk : kExitNumeric;
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
    try {
        if (name == "train") return cmd_train(cfg, log);
        if (name == "eval") return cmd_eval(cfg, log);
        if (name == "attnmap") return cmd_attnmap(cfg, log);
        if (name == "gradcheck") return cmd_gradcheck(cfg, log);
        log << "error: unknown command '" << name << "'\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        log << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const CheckpointError& e) {
        log << "checkpoint error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        log << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace vitse
