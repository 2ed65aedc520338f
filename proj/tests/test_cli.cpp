#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "vitse/checkpoint.hpp"
#include "vitse/commands.hpp"
#include "vitse/pgm.hpp"
#include "vitse/rollout.hpp"
#include "vitse/runconfig.hpp"
#include "vitse/train.hpp"

using namespace vitse;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(VITSE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

}  // namespace

TEST_CASE("config builder precedence: preset, file, flags") {
    TempDir dir("vitse_cfgbuild_test");
    write_file(dir.path / "run.cfg",
               "# comment line\n"
               "preset = toy\n"
               "epochs = 2   # trailing comment\n"
               "lr = 0.001\n");
    ConfigBuilder b;
    b.load_file((dir.path / "run.cfg").string());
    b.set("lr", "0.002", true);  // CLI override wins
    auto cfg = b.build();
    CHECK(cfg.vit.image_size == 16);  // from the toy preset
    CHECK(cfg.train.epochs == 2);     // file beats preset
    CHECK(cfg.train.learning_rate == 0.002);
    CHECK_FALSE(cfg.train.mixup_enabled);  // toy preset turns regularisers off
}

TEST_CASE("config builder rejects unknown keys and bad values") {
    ConfigBuilder b;
    CHECK_THROWS_AS(b.set("learning_rate_typo", "1", false), ConfigError);
    b.set("epochs", "eight", false);
    CHECK_THROWS_AS(b.build(), ConfigError);

    ConfigBuilder c;
    c.set("se", "maybe", false);
    CHECK_THROWS_AS(c.build(), ConfigError);

    ConfigBuilder d;
    d.set_preset("huge");
    CHECK_THROWS_AS(d.build(), ConfigError);
}

TEST_CASE("pretrain mode defaults to 8 epochs unless epochs is explicit") {
    ConfigBuilder a;
    a.set("pretrain", "on", false);
    CHECK(a.build().train.epochs == 8);

    ConfigBuilder b;
    b.set("pretrain", "on", false);
    b.set("epochs", "3", true);
    CHECK(b.build().train.epochs == 3);

    ConfigBuilder c;
    CHECK(c.build().train.epochs == 10);
}

TEST_CASE("invalid architecture is rejected before any compute") {
    ConfigBuilder b;
    b.set_preset("gradcheck");
    b.set("heads", "3", false);  // 16 not divisible by 3
    CHECK_THROWS_AS(b.build(), ConfigError);
}

TEST_CASE("config echo is itself parseable") {
    ConfigBuilder b;
    b.set_preset("toy");
    auto cfg = b.build();
    std::ostringstream os;
    echo_config(os, cfg);
    TempDir dir("vitse_echo_test");
    write_file(dir.path / "echo.cfg", os.str());
    ConfigBuilder reparse;
    reparse.load_file((dir.path / "echo.cfg").string());
    auto cfg2 = reparse.build();
    CHECK(cfg2.vit.embed_dim == cfg.vit.embed_dim);
    CHECK(cfg2.train.learning_rate == cfg.train.learning_rate);
    CHECK(cfg2.train.mixup_enabled == cfg.train.mixup_enabled);
}

TEST_CASE("cli: usage and config errors exit 1") {
    TempDir dir("vitse_cli1_test");
    CHECK(run_cli("notacommand", dir.path / "log.txt") == 1);
    CHECK(run_cli("", dir.path / "log2.txt") == 1);

    write_file(dir.path / "bad.cfg", "unknown_key = 5\n");
    CHECK(run_cli("gradcheck --config " + (dir.path / "bad.cfg").string(), dir.path / "log3.txt") == 1);

    write_file(dir.path / "indivisible.cfg", "preset = gradcheck\nheads = 3\n");
    const int rc = run_cli("gradcheck --config " + (dir.path / "indivisible.cfg").string(), dir.path / "log4.txt");
    CHECK(rc == 1);
    CHECK(slurp(dir.path / "log4.txt").find("divisible") != std::string::npos);
}

TEST_CASE("cli: missing inputs exit 2") {
    TempDir dir("vitse_cli2_test");
    CHECK(run_cli("eval --init " + (dir.path / "absent.ckpt").string() + " --data synth", dir.path / "log.txt") == 2);
    CHECK(run_cli("train --preset toy --data " + (dir.path / "absent.csv").string() + " --out " +
                      (dir.path / "out").string(),
                  dir.path / "log2.txt") == 2);
}

TEST_CASE("cli: train with zero epochs writes the initial checkpoint only") {
    TempDir dir("vitse_cli0_test");
    const auto out = dir.path / "run";
    const int rc = run_cli("train --preset toy --seed 3 --data synth --out " + out.string() +
                               " --epochs 0 --max-steps 0",
                           dir.path / "log.txt");
    CHECK(rc == 0);
    CHECK(fs::exists(out / "final.ckpt"));
    CHECK_FALSE(fs::exists(out / "epoch_001.ckpt"));
    CHECK(slurp(out / "metrics.csv") == "epoch,train_loss,valid_accuracy\n");

    auto ck = load_checkpoint((out / "final.ckpt").string());
    CHECK(ck.step == 0);
    CHECK(ck.train.rng_seed == 3);
}

TEST_CASE("cli: short train run, eval and attnmap round trip") {
    TempDir dir("vitse_cli_train_test");
    const auto out = dir.path / "run";
    const auto pgms = dir.path / "pgms";
    write_file(dir.path / "tiny.cfg",
               "preset = toy\n"
               "synth_per_class = 8\n"
               "epochs = 2\n"
               "synth_export = " + pgms.string() + "\n");
    const int rc = run_cli("train --config " + (dir.path / "tiny.cfg").string() + " --seed 11 --data synth --out " +
                               out.string(),
                           dir.path / "log.txt");
    CHECK(rc == 0);
    CHECK(fs::exists(out / "final.ckpt"));
    CHECK(fs::exists(out / "epoch_001.ckpt"));
    CHECK(fs::exists(out / "epoch_002.ckpt"));

    const auto metrics = slurp(out / "metrics.csv");
    CHECK(metrics.rfind("epoch,train_loss,valid_accuracy\n", 0) == 0);
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);

    // evaluation prints accuracy and writes the confusion csv
    const int rc_eval = run_cli("eval --init " + (out / "final.ckpt").string() +
                                    " --data synth --split train --out " + (dir.path / "evalout").string() +
                                    " --config " + (dir.path / "tiny.cfg").string(),
                                dir.path / "eval_log.txt");
    CHECK(rc_eval == 0);
    const auto confusion = slurp(dir.path / "evalout" / "confusion.csv");
    CHECK(std::count(confusion.begin(), confusion.end(), '\n') == 4);  // header + 3 classes
    CHECK(confusion.rfind("class_0,class_1,class_2\n", 0) == 0);
    CHECK(slurp(dir.path / "eval_log.txt").find("accuracy:") != std::string::npos);

    // attention maps from an exported synthetic image
    const int rc_map = run_cli("attnmap --init " + (out / "final.ckpt").string() + " --image " +
                                   (pgms / "0_0.pgm").string() + " --out " + (dir.path / "maps").string(),
                               dir.path / "map_log.txt");
    CHECK(rc_map == 0);
    CHECK(fs::exists(dir.path / "maps" / "layer_01.pgm"));
    CHECK(fs::exists(dir.path / "maps" / "layer_02.pgm"));
    CHECK(fs::exists(dir.path / "maps" / "rollout.pgm"));

    // the written rollout map matches an in-process recomputation pixel for pixel
    {
        auto ck = load_checkpoint((out / "final.ckpt").string());
        auto model = model_of(ck);
        auto image = read_pgm((pgms / "0_0.pgm").string());
        auto input = preprocess(image, model.cfg.image_size, NormStats{ck.train.norm_mean, ck.train.norm_std});
        Tape<float> tape(false);
        AttentionTrace<float> trace;
        forward_logits(tape, model, input, &trace);
        auto maps = attention_rollout(trace, model.cfg.grid());
        auto expect = scores_to_pixels(maps.rollout, maps.grid, model.cfg.image_size);
        auto written = read_pgm((dir.path / "maps" / "rollout.pgm").string());
        REQUIRE(written->numel() == static_cast<int64_t>(expect.size()));
        for (size_t i = 0; i < expect.size(); ++i)
            CHECK(static_cast<int>(std::lround(written->data[i] * 255.0f)) == static_cast<int>(expect[i]));
    }

    // rerunning the identical train command reproduces artifacts byte for byte
    const auto out2 = dir.path / "run2";
    run_cli("train --config " + (dir.path / "tiny.cfg").string() + " --seed 11 --data synth --out " + out2.string(),
            dir.path / "log2.txt");
    CHECK(slurp(out / "final.ckpt") == slurp(out2 / "final.ckpt"));
    CHECK(slurp(out / "metrics.csv") == slurp(out2 / "metrics.csv"));
}

TEST_CASE("cli: se flag changes only the SE tensors in the checkpoint") {
    TempDir dir("vitse_cli_se_test");
    const auto on = dir.path / "se_on";
    const auto off = dir.path / "se_off";
    run_cli("train --preset toy --seed 5 --data synth --out " + on.string() + " --epochs 0 --se on",
            dir.path / "log1.txt");
    run_cli("train --preset toy --seed 5 --data synth --out " + off.string() + " --epochs 0 --se off",
            dir.path / "log2.txt");

    auto ck_on = load_checkpoint((on / "final.ckpt").string());
    auto ck_off = load_checkpoint((off / "final.ckpt").string());
    CHECK(ck_on.tensors.size() == ck_off.tensors.size() + 4);

    size_t j = 0;
    for (const auto& t : ck_on.tensors) {
        if (t.name.rfind("se.", 0) == 0) continue;
        CHECK(t.name == ck_off.tensors[j].name);
        CHECK(t.payload == ck_off.tensors[j].payload);
        ++j;
    }
}

TEST_CASE("cli: fine-tuning resumes from an --init checkpoint") {
    TempDir dir("vitse_init_test");
    const auto stage1 = dir.path / "stage1";
    const auto stage2 = dir.path / "stage2";
    write_file(dir.path / "t.cfg", "preset = toy\nsynth_per_class = 4\nepochs = 1\n");
    REQUIRE(run_cli("train --config " + (dir.path / "t.cfg").string() + " --seed 21 --data synth --out " +
                        stage1.string(),
                    dir.path / "log1.txt") == 0);
    REQUIRE(run_cli("train --config " + (dir.path / "t.cfg").string() + " --seed 22 --data synth --out " +
                        stage2.string() + " --init " + (stage1 / "final.ckpt").string(),
                    dir.path / "log2.txt") == 0);

    // stage 2 continued from stage-1 weights rather than re-initializing
    auto ck1 = load_checkpoint((stage1 / "final.ckpt").string());
    auto ck2 = load_checkpoint((stage2 / "final.ckpt").string());
    CHECK(ck1.tensors[0].payload != ck2.tensors[0].payload);
    CHECK(ck2.step == 1);

    // an architecture mismatch is rejected up front
    write_file(dir.path / "wide.cfg", "preset = toy\nembed_dim = 64\nheads = 4\n");
    CHECK(run_cli("train --config " + (dir.path / "wide.cfg").string() + " --data synth --out " +
                      (dir.path / "bad").string() + " --init " + (stage1 / "final.ckpt").string(),
                  dir.path / "log3.txt") == 1);
}

TEST_CASE("cli: gradcheck exits 3 when the tolerance cannot be met") {
    TempDir dir("vitse_cli3_test");
    write_file(dir.path / "strict.cfg", "preset = gradcheck\ngradcheck_tolerance = 1e-18\n");
    const int rc = run_cli("gradcheck --config " + (dir.path / "strict.cfg").string() + " --seed 1",
                           dir.path / "log.txt");
    CHECK(rc == 3);
    CHECK(slurp(dir.path / "log.txt").find("gradcheck FAIL") != std::string::npos);
}

TEST_CASE("cli: train echoes the resolved configuration to the run log") {
    TempDir dir("vitse_echo_log_test");
    run_cli("train --preset toy --seed 2 --data synth --out " + (dir.path / "run").string() + " --epochs 0",
            dir.path / "log.txt");
    const auto log = slurp(dir.path / "log.txt");
    CHECK(log.find("embed_dim = 32") != std::string::npos);
    CHECK(log.find("lr = 0.002") != std::string::npos);
    CHECK(log.find("seed = 2") != std::string::npos);
}

TEST_CASE("cli: evaluating a fully overfit model prints accuracy 1 and a diagonal csv") {
    TempDir dir("vitse_overfit_test");
    write_file(dir.path / "ovf.cfg", "preset = toy\nsynth_per_class = 8\nepochs = 100\n");
    const auto out = dir.path / "run";
    const int rc = run_cli("train --config " + (dir.path / "ovf.cfg").string() + " --seed 13 --data synth --out " +
                               out.string(),
                           dir.path / "train.log");
    REQUIRE(rc == 0);

    const int rc_eval = run_cli("eval --init " + (out / "final.ckpt").string() +
                                    " --config " + (dir.path / "ovf.cfg").string() +
                                    " --data synth --split train --out " + (dir.path / "evalout").string(),
                                dir.path / "eval.log");
    CHECK(rc_eval == 0);
    CHECK(slurp(dir.path / "eval.log").find("accuracy: 1.000000") != std::string::npos);

    // strictly diagonal confusion matrix: 8 per class
    std::ifstream csv(dir.path / "evalout" / "confusion.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "class_0,class_1,class_2");
    for (int i = 0; i < 3; ++i) {
        std::string row;
        REQUIRE(std::getline(csv, row));
        std::string expect;
        for (int j = 0; j < 3; ++j) expect += (j ? "," : "") + std::string(i == j ? "8" : "0");
        CHECK(row == expect);
    }
}

TEST_CASE("in-process command dispatch maps error types to exit codes") {
    std::ostringstream log;
    RunConfig cfg;
    cfg.vit = gradcheck_config();
    cfg.vit.embed_dim = 128;  // violates the gradcheck size contract
    CHECK(run_command("gradcheck", cfg, log) == kExitConfig);

    RunConfig eval_cfg;
    eval_cfg.vit = toy_config();
    eval_cfg.init_checkpoint = "/nonexistent/path.ckpt";
    CHECK(run_command("eval", eval_cfg, log) == kExitData);

    CHECK(run_command("bogus", RunConfig{}, log) == kExitConfig);
}
