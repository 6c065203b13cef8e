// Drives the installed binary end to end on a miniature corpus.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#ifndef RED_CLI_PATH
#define RED_CLI_PATH "red"
#endif

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(RED_CLI_PATH) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "red_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_tiny_config(const fs::path& path) {
  std::ofstream out(path);
  out << R"({
  "synth": {"duration_sec": 60},
  "model": {"T": 1600, "N_f": 2, "N_s": 4, "N_1": 3, "N_2": 4},
  "train": {"M": 4, "alpha": 0.002, "I_lr": 10, "N_lr": 0, "val_check_every": 5}
})";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("bad invocations exit with code 2, missing files with 1") {
  CHECK(run("frobnicate") == 2);
  CHECK(run("synth --no-such-flag") == 2);
  CHECK(run("eval --truth missing.csv --pred missing.csv --out /tmp/red_cli_x") ==
        1);
}

TEST_CASE("synth is byte deterministic and the full pipeline runs") {
  const fs::path dir = fresh_dir("pipeline");
  const fs::path cfg = dir / "cfg.json";
  write_tiny_config(cfg);

  const std::string base =
      " --seed 7 --n-train 2 --n-val 1 --n-test 1 --config " + cfg.string();
  REQUIRE(run("synth --out " + (dir / "corpus_a").string() + base) == 0);
  REQUIRE(run("synth --out " + (dir / "corpus_b").string() + base) == 0);
  for (const auto& entry : fs::directory_iterator(dir / "corpus_a")) {
    const auto name = entry.path().filename();
    CAPTURE(name.string());
    CHECK(file_bytes(entry.path()) == file_bytes(dir / "corpus_b" / name));
  }

  const std::string corpus = (dir / "corpus_a" / "corpus.json").string();
  REQUIRE(run("train --corpus " + corpus +
              " --event spindle --variant time --out " +
              (dir / "model").string() + " --seed 3 --config " +
              cfg.string()) == 0);
  CHECK(fs::exists(dir / "model" / "checkpoint.redckpt"));
  CHECK(fs::exists(dir / "model" / "train_log.csv"));
  CHECK(fs::exists(dir / "model" / "model_meta.json"));

  REQUIRE(run("tune --corpus " + corpus + " --model " +
              (dir / "model").string() + " --out " + (dir / "model").string() +
              " --set val") == 0);
  CHECK(fs::exists(dir / "model" / "threshold.json"));

  REQUIRE(run("detect --model " + (dir / "model").string() + " --corpus " +
              corpus + " --split test --threshold-file " +
              (dir / "model" / "threshold.json").string() + " --out " +
              (dir / "pred").string() + " --dump-probs") == 0);
  CHECK(fs::exists(dir / "pred" / "pred_rec03_spindle.csv"));
  CHECK(fs::exists(dir / "pred" / "pred_rec03_spindle_probs.f32"));

  REQUIRE(run("eval --corpus " + corpus +
              " --split test --event spindle --pred-dir " +
              (dir / "pred").string() + " --out " + (dir / "eval").string() +
              " --iou 0.2") == 0);
  CHECK(fs::exists(dir / "eval" / "report.json"));
  CHECK(fs::exists(dir / "eval" / "f1_curve.csv"));

  // Rerunning detection with identical inputs reproduces identical bytes.
  REQUIRE(run("detect --model " + (dir / "model").string() + " --corpus " +
              corpus + " --split test --threshold-file " +
              (dir / "model" / "threshold.json").string() + " --out " +
              (dir / "pred2").string()) == 0);
  CHECK(file_bytes(dir / "pred" / "pred_rec03_spindle.csv") ==
        file_bytes(dir / "pred2" / "pred_rec03_spindle.csv"));
}

TEST_CASE("eval on identical event files reports perfect scores") {
  const fs::path dir = fresh_dir("eval_pair");
  {
    std::ofstream out(dir / "events.csv");
    out << "start_sec,end_sec\n1.000000,1.500000\n3.000000,3.700000\n";
  }
  REQUIRE(run("eval --truth " + (dir / "events.csv").string() + " --pred " +
              (dir / "events.csv").string() + " --out " + dir.string() +
              " --iou 0.2") == 0);
  const auto report = nlohmann::json::parse(file_bytes(dir / "report.json"));
  CHECK(report["headline"]["f1"].get<double>() == 1.0);
  CHECK(report["af1"].get<double>() == 1.0);
}

TEST_CASE("cwt and split subcommands emit their artifacts") {
  const fs::path dir = fresh_dir("aux");
  const fs::path cfg = dir / "cfg.json";
  write_tiny_config(cfg);
  REQUIRE(run("synth --out " + (dir / "corpus").string() +
              " --seed 5 --n-train 1 --n-val 1 --n-test 1 --config " +
              cfg.string()) == 0);

  REQUIRE(run("cwt --signal " + (dir / "corpus" / "rec00.sig").string() +
              " --out " + (dir / "spec").string()) == 0);
  CHECK(fs::exists(dir / "spec" / "spectrogram.json"));
  CHECK(fs::exists(dir / "spec" / "spectrogram.planes"));

  REQUIRE(run("split --corpus " + (dir / "corpus" / "corpus.json").string() +
              " --out " + (dir / "split").string()) == 0);
  CHECK(fs::exists(dir / "split" / "features.csv"));
  CHECK(fs::exists(dir / "split" / "projections.csv"));
  CHECK(fs::exists(dir / "split" / "gaussians.json"));
}

}  // TEST_SUITE
