// red: sleep-EEG event detection pipeline.
//
// Subcommands: synth (generate a corpus), train, tune (output threshold),
// detect, eval, split (band-power projections), cwt (spectrogram export).

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "red/cwt.hpp"
#include "red/detector.hpp"
#include "red/evalkit.hpp"
#include "red/model.hpp"
#include "red/pipeline.hpp"
#include "red/postproc.hpp"
#include "red/sigio.hpp"
#include "red/splitkit.hpp"
#include "red/synthgen.hpp"
#include "red/threading.hpp"
#include "red/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw red::Error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw red::Error(path.string() + ": " + e.what());
  }
  return j;
}

// Config files may carry sections ("model", "train", "synth", "eval") or be
// a flat object used by every consumer.
json config_section(const std::optional<fs::path>& config,
                    const std::string& section) {
  if (!config) return json::object();
  json j = load_json_file(*config);
  if (j.contains(section) && j[section].is_object()) return j[section];
  return j;
}

red::synth::SynthConfig synth_config_from_json(const json& j) {
  red::synth::SynthConfig cfg;
  cfg.fs = j.value("fs", cfg.fs);
  cfg.duration_sec = j.value("duration_sec", cfg.duration_sec);
  cfg.background_pink = j.value("background_pink", cfg.background_pink);
  cfg.theta_amp = j.value("theta_amp", cfg.theta_amp);
  cfg.min_gap_sec = j.value("min_gap_sec", cfg.min_gap_sec);
  auto event = [&j](const char* key, red::synth::EventModel& model) {
    if (!j.contains(key)) return;
    const json& e = j[key];
    model.rate_per_min = e.value("rate_per_min", model.rate_per_min);
    model.freq_lo_hz = e.value("freq_lo", model.freq_lo_hz);
    model.freq_hi_hz = e.value("freq_hi", model.freq_hi_hz);
    model.dur_lo_sec = e.value("dur_lo", model.dur_lo_sec);
    model.dur_hi_sec = e.value("dur_hi", model.dur_hi_sec);
    model.amp_lo = e.value("amp_lo", model.amp_lo);
    model.amp_hi = e.value("amp_hi", model.amp_hi);
  };
  event("spindle", cfg.spindle);
  event("kcomplex", cfg.kcomplex);
  return cfg;
}

red::eval::EvalConfig eval_config_from_json(const json& j) {
  red::eval::EvalConfig cfg = red::eval::EvalConfig::defaults();
  cfg.iou_threshold = j.value("iou_threshold", cfg.iou_threshold);
  cfg.tune_step = j.value("tune_step", cfg.tune_step);
  if (j.contains("af1_grid")) {
    cfg.af1_grid = j["af1_grid"].get<std::vector<double>>();
  }
  return cfg;
}

struct LoadedCorpus {
  red::synth::Corpus corpus;
  fs::path manifest_path;

  std::vector<red::Recording> load_split(const std::string& split) const {
    std::vector<red::Recording> out;
    for (const auto& entry : corpus.entries) {
      if (split == "all" || entry.split == split) {
        out.push_back(red::synth::load_recording(manifest_path, entry));
      }
    }
    if (out.empty()) {
      throw red::Error("corpus has no recordings in split '" + split + "'");
    }
    return out;
  }
};

LoadedCorpus load_corpus(const fs::path& manifest_path) {
  return {red::synth::read_corpus_manifest(manifest_path), manifest_path};
}

// Model directory layout written by `train`.
struct ModelDir {
  red::model::ModelConfig config;
  std::string event_type;
  double global_std{1.0};
  red::pipeline::PreprocessConfig prep;
  fs::path checkpoint;
};

ModelDir read_model_dir(const fs::path& dir) {
  const json meta = load_json_file(dir / "model_meta.json");
  ModelDir out;
  out.config = red::model::model_config_from_json(meta.at("model").dump());
  out.event_type = meta.at("event").get<std::string>();
  out.global_std = meta.at("global_std").get<double>();
  out.prep.band_lo_hz = meta.value("band_lo", out.prep.band_lo_hz);
  out.prep.band_hi_hz = meta.value("band_hi", out.prep.band_hi_hz);
  out.prep.target_fs = out.config.fs;
  out.checkpoint = dir / "checkpoint.redckpt";
  return out;
}

json model_config_to_json(const red::model::ModelConfig& cfg) {
  return json{{"variant", red::model::to_string(cfg.variant)},
              {"T", cfg.t_samples},
              {"T_B", cfg.border},
              {"C", cfg.channels},
              {"N_f", cfg.n_filters},
              {"N_s", cfg.n_scales},
              {"beta_init", cfg.beta_init},
              {"eta", cfg.eta},
              {"N_1", cfg.lstm_units},
              {"N_2", cfg.classifier_hidden},
              {"rho_1", cfg.drop1},
              {"rho_2", cfg.drop2},
              {"pooling", cfg.pooling == red::ad::PoolKind::avg ? "avg" : "max"},
              {"fs", cfg.fs},
              {"f_min", cfg.f_min_hz},
              {"f_max", cfg.f_max_hz}};
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw red::Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// ------------------------------------------------------------------ synth

int cmd_synth(const fs::path& out_dir, uint64_t seed,
              const std::optional<fs::path>& config, int n_train, int n_val,
              int n_test) {
  red::synth::CorpusSpec spec;
  spec.base = synth_config_from_json(config_section(config, "synth"));
  spec.base.seed = seed;
  spec.n_train = n_train;
  spec.n_val = n_val;
  spec.n_test = n_test;
  const auto corpus = red::synth::write_corpus(out_dir, spec);
  std::printf("wrote %zu recordings to %s\n", corpus.entries.size(),
              out_dir.string().c_str());
  return 0;
}

// ------------------------------------------------------------------ train

int cmd_train(const fs::path& corpus_path, const std::string& event_type,
              const std::string& variant_name, const fs::path& out_dir,
              uint64_t seed, const std::optional<fs::path>& config) {
  const LoadedCorpus corpus = load_corpus(corpus_path);
  auto train_recs = corpus.load_split("train");
  auto val_recs = corpus.load_split("val");

  json model_json = config_section(config, "model");
  model_json["variant"] = variant_name;
  red::model::ModelConfig mcfg =
      red::model::model_config_from_json(model_json.dump());

  red::train::TrainConfig tcfg = red::train::train_config_from_json(
      config_section(config, "train").dump());
  tcfg.seed = seed;

  red::pipeline::PreprocessConfig prep;
  prep.target_fs = mcfg.fs;

  // Normalization statistic over the entire non-testing set (train + val).
  std::vector<red::Recording> nontesting = train_recs;
  nontesting.insert(nontesting.end(), val_recs.begin(), val_recs.end());
  const double global_std =
      red::pipeline::compute_global_std(nontesting, prep);
  std::printf("global std over %zu non-testing recordings: %.6f\n",
              nontesting.size(), global_std);

  auto prepare_all = [&](std::vector<red::Recording>& recs) {
    for (red::Recording& rec : recs) {
      rec = red::pipeline::prepare(rec, prep, global_std).rec;
    }
  };
  prepare_all(train_recs);
  prepare_all(val_recs);

  red::model::Network net(mcfg, seed);
  const auto result =
      red::train::train(net, train_recs, val_recs, event_type, tcfg);
  std::printf("trained %d iterations, %d halvings, best val loss %.6f\n",
              result.iterations, result.halvings, result.best_val_loss);

  fs::create_directories(out_dir);
  net.save(out_dir / "checkpoint.redckpt", result.iterations);
  red::train::write_train_log_csv(out_dir / "train_log.csv", result.log);
  json meta;
  meta["model"] = model_config_to_json(mcfg);
  meta["event"] = event_type;
  meta["global_std"] = global_std;
  meta["band_lo"] = prep.band_lo_hz;
  meta["band_hi"] = prep.band_hi_hz;
  meta["seed"] = seed;
  meta["train"] = {{"M", tcfg.batch},
                   {"alpha", tcfg.lr},
                   {"I_lr", tcfg.patience},
                   {"N_lr", tcfg.max_halvings},
                   {"g_max", tcfg.g_max},
                   {"val_check_every", tcfg.val_check_every}};
  meta["best_val_loss"] = result.best_val_loss;
  meta["initial_val_loss"] = result.initial_val_loss;
  meta["iterations"] = result.iterations;
  meta["halvings"] = result.halvings;
  write_json_file(out_dir / "model_meta.json", meta);
  return 0;
}

// ------------------------------------------------------------------- tune

int cmd_tune(const fs::path& corpus_path, const fs::path& model_dir,
             const fs::path& out_dir, const std::string& set_name,
             const std::optional<fs::path>& config) {
  const ModelDir md = read_model_dir(model_dir);
  const LoadedCorpus corpus = load_corpus(corpus_path);

  std::vector<red::Recording> raw;
  if (set_name == "nontesting") {
    raw = corpus.load_split("train");
    auto val = corpus.load_split("val");
    raw.insert(raw.end(), val.begin(), val.end());
  } else {
    raw = corpus.load_split(set_name);
  }

  std::vector<red::pipeline::Prepared> prepared;
  prepared.reserve(raw.size());
  for (const red::Recording& rec : raw) {
    prepared.push_back(red::pipeline::prepare(rec, md.prep, md.global_std));
  }

  red::model::Network net(md.config, 0);
  net.load(md.checkpoint);
  const auto eval_cfg = eval_config_from_json(config_section(config, "eval"));
  const auto result =
      red::detect::tune_threshold(net, prepared, md.event_type, eval_cfg);
  std::printf("tuned threshold mu=%.2f (mean AF1 %.4f over %zu recordings)\n",
              result.mu, result.mean_af1, prepared.size());

  fs::create_directories(out_dir);
  json j;
  j["mu"] = result.mu;
  j["mean_af1"] = result.mean_af1;
  j["set"] = set_name;
  json grid = json::array();
  for (const auto& p : result.grid) {
    grid.push_back({{"mu", p.mu}, {"af1", p.mean_af1}});
  }
  j["grid"] = grid;
  write_json_file(out_dir / "threshold.json", j);
  return 0;
}

// ----------------------------------------------------------------- detect

void dump_probs_f32(const fs::path& path,
                    const std::vector<double>& per_sample) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw red::Error("cannot write " + path.string());
  std::vector<float> buf(per_sample.begin(), per_sample.end());
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

int cmd_detect(const fs::path& model_dir, const fs::path& out_dir,
               const std::optional<fs::path>& corpus_path,
               const std::string& split,
               const std::optional<fs::path>& recording_manifest,
               std::optional<double> threshold,
               const std::optional<fs::path>& threshold_file,
               bool dump_probs) {
  const ModelDir md = read_model_dir(model_dir);
  double mu = 0.5;
  if (threshold) {
    mu = *threshold;
  } else if (threshold_file) {
    mu = load_json_file(*threshold_file).at("mu").get<double>();
  } else {
    throw red::Error("detect needs --threshold or --threshold-file");
  }

  std::vector<red::Recording> raw;
  if (recording_manifest) {
    raw.push_back(red::sigio::read_recording(*recording_manifest));
    if (raw.back().id.empty()) raw.back().id = "recording";
  } else if (corpus_path) {
    raw = load_corpus(*corpus_path).load_split(split);
  } else {
    throw red::Error("detect needs --recording or --corpus");
  }

  red::model::Network net(md.config, 0);
  net.load(md.checkpoint);
  fs::create_directories(out_dir);
  for (const red::Recording& rec : raw) {
    const auto prepared = red::pipeline::prepare(rec, md.prep, md.global_std);
    const auto coarse =
        red::detect::predict_recording(net, prepared.rec.signal);
    const auto per_sample = red::detect::upsample_probs(coarse, 8);
    const auto events = red::postproc::apply(
        md.event_type,
        red::detect::threshold_events(per_sample, mu, prepared.rec.signal.fs),
        prepared.physical);
    const std::string base = "pred_" + rec.id + "_" + md.event_type;
    red::sigio::write_events(out_dir / (base + ".csv"), events);
    if (dump_probs) {
      dump_probs_f32(out_dir / (base + "_probs.f32"), per_sample);
    }
    std::printf("%s: %zu events\n", rec.id.c_str(), events.size());
  }
  return 0;
}

// ------------------------------------------------------------------- eval

int cmd_eval(const std::optional<fs::path>& truth_path,
             const std::optional<fs::path>& pred_path,
             const std::optional<fs::path>& corpus_path,
             const std::string& split, const std::string& event_type,
             const fs::path& pred_dir, const fs::path& out_dir, double iou_thr,
             const std::optional<fs::path>& config) {
  red::eval::EvalConfig cfg =
      eval_config_from_json(config_section(config, "eval"));
  cfg.iou_threshold = iou_thr;

  std::vector<std::string> ids;
  std::vector<red::EventList> truths, preds;
  if (truth_path && pred_path) {
    ids.push_back("pair");
    truths.push_back(red::sigio::read_events(*truth_path));
    preds.push_back(red::sigio::read_events(*pred_path));
  } else if (corpus_path) {
    if (event_type.empty()) {
      throw red::Error("corpus evaluation needs --event");
    }
    const LoadedCorpus corpus = load_corpus(*corpus_path);
    for (const auto& entry : corpus.corpus.entries) {
      if (entry.split != split && split != "all") continue;
      const red::Recording rec =
          red::synth::load_recording(corpus.manifest_path, entry);
      const auto it = rec.annotations.find(event_type);
      if (it == rec.annotations.end()) {
        throw red::Error("recording '" + entry.id + "' lacks '" + event_type +
                         "' annotations");
      }
      const fs::path pred_file =
          pred_dir / ("pred_" + entry.id + "_" + event_type + ".csv");
      ids.push_back(entry.id);
      truths.push_back(it->second);
      preds.push_back(red::sigio::read_events(pred_file));
    }
    if (ids.empty()) {
      throw red::Error("no recordings matched split '" + split + "'");
    }
  } else {
    throw red::Error("eval needs either --truth and --pred, or --corpus");
  }

  const auto report = red::eval::evaluate_set(ids, truths, preds, cfg);
  std::printf("F1@%.2f = %.4f  recall = %.4f  precision = %.4f  AF1 = %.4f\n",
              report.iou_threshold, report.headline.f1, report.headline.recall,
              report.headline.precision, report.af1);
  fs::create_directories(out_dir);
  red::eval::write_report_json(out_dir / "report.json", report);
  red::eval::write_f1_curve_csv(out_dir / "f1_curve.csv", report);
  return 0;
}

// ------------------------------------------------------------------ split

int cmd_split(const fs::path& corpus_path, const fs::path& out_dir,
              double gamma) {
  const LoadedCorpus corpus = load_corpus(corpus_path);
  std::vector<std::array<double, 5>> rows;
  std::vector<std::pair<std::string, int>> row_ids;
  std::map<std::string, std::vector<size_t>> by_recording;

  for (const auto& entry : corpus.corpus.entries) {
    const red::Recording rec =
        red::synth::load_recording(corpus.manifest_path, entry);
    for (size_t e = 0; e < rec.epochs.size(); ++e) {
      const auto i0 =
          static_cast<size_t>(rec.epochs[e].start_sec * rec.signal.fs);
      const auto i1 =
          static_cast<size_t>(rec.epochs[e].end_sec * rec.signal.fs);
      red::Signal epoch;
      epoch.fs = rec.signal.fs;
      epoch.samples.assign(rec.signal.samples.begin() + i0,
                           rec.signal.samples.begin() + i1);
      by_recording[entry.id].push_back(rows.size());
      rows.push_back(red::split::band_powers(epoch));
      row_ids.emplace_back(entry.id, static_cast<int>(e));
    }
  }

  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "features.csv", std::ios::binary);
    out << "recording,epoch,b1,b2,b3,b4,b5\n";
    char line[256];
    for (size_t i = 0; i < rows.size(); ++i) {
      std::snprintf(line, sizeof(line), "%s,%d,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                    row_ids[i].first.c_str(), row_ids[i].second, rows[i][0],
                    rows[i][1], rows[i][2], rows[i][3], rows[i][4]);
      out << line;
    }
  }

  red::split::standardize(rows);
  const auto projection = red::split::kpca_project(rows, gamma);
  {
    std::ofstream out(out_dir / "projections.csv", std::ios::binary);
    out << "recording,epoch,x,y\n";
    char line[160];
    for (size_t i = 0; i < projection.points.size(); ++i) {
      std::snprintf(line, sizeof(line), "%s,%d,%.9g,%.9g\n",
                    row_ids[i].first.c_str(), row_ids[i].second,
                    projection.points[i][0], projection.points[i][1]);
      out << line;
    }
  }

  json gs = json::object();
  for (const auto& [id, indices] : by_recording) {
    std::vector<std::array<double, 2>> pts;
    pts.reserve(indices.size());
    for (size_t i : indices) pts.push_back(projection.points[i]);
    const auto g = red::split::fit_gaussian(pts);
    const auto e = red::split::ellipse_95(g);
    gs[id] = {{"mean", {g.mean[0], g.mean[1]}},
              {"cov",
               {{g.cov[0][0], g.cov[0][1]}, {g.cov[1][0], g.cov[1][1]}}},
              {"ellipse",
               {{"center", {e.center[0], e.center[1]}},
                {"semi_axes", {e.semi_axes[0], e.semi_axes[1]}},
                {"rotation_rad", e.rotation_rad}}}};
  }
  json j;
  j["gamma"] = gamma;
  j["eigenvalues"] = {projection.eigenvalues[0], projection.eigenvalues[1]};
  j["recordings"] = gs;
  write_json_file(out_dir / "gaussians.json", j);
  std::printf("split analysis over %zu epochs from %zu recordings\n",
              rows.size(), by_recording.size());
  return 0;
}

// -------------------------------------------------------------------- cwt

int cmd_cwt(const fs::path& signal_path, const fs::path& out_dir,
            const std::optional<fs::path>& config) {
  const json j = config_section(config, "cwt");
  red::cwt::CwtConfig cfg;
  cfg.f_min_hz = j.value("f_min", cfg.f_min_hz);
  cfg.f_max_hz = j.value("f_max", cfg.f_max_hz);
  cfg.n_scales = j.value("N_s", cfg.n_scales);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.eta = j.value("eta", cfg.eta);
  cfg.border = j.value("T_B", cfg.border);

  const red::Signal sig = red::sigio::read_signal(signal_path);
  // Zero padding keeps the export the same length as the input.
  red::Signal padded;
  padded.fs = sig.fs;
  padded.samples.assign(static_cast<size_t>(cfg.border), 0.0);
  padded.samples.insert(padded.samples.end(), sig.samples.begin(),
                        sig.samples.end());
  padded.samples.insert(padded.samples.end(),
                        static_cast<size_t>(cfg.border), 0.0);
  const auto spec = red::cwt::transform(padded, cfg);
  fs::create_directories(out_dir);
  red::cwt::write_spectrogram(out_dir / "spectrogram.json", spec);
  std::printf("wrote %zu x %zu spectrogram\n", spec.n_scales(),
              spec.n_samples);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::setNbThreads(red::worker_threads());

  CLI::App app{"Sleep-EEG event detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::optional<fs::path> config;
  app.add_option("--config", config, "JSON config file")->expected(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  fs::path synth_out;
  uint64_t synth_seed = 0;
  int n_train = 8, n_val = 3, n_test = 4;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "corpus seed");
  synth->add_option("--n-train", n_train, "training recordings");
  synth->add_option("--n-val", n_val, "validation recordings");
  synth->add_option("--n-test", n_test, "test recordings");

  // train
  auto* train = app.add_subcommand("train", "train a detector");
  fs::path train_corpus, train_out;
  std::string train_event = "spindle", train_variant = "time";
  uint64_t train_seed = 0;
  train->add_option("--corpus", train_corpus, "corpus manifest")->required();
  train->add_option("--event", train_event, "spindle|kcomplex");
  train->add_option("--variant", train_variant, "time|cwt");
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--seed", train_seed, "training seed");

  // tune
  auto* tune = app.add_subcommand("tune", "grid-search the output threshold");
  fs::path tune_corpus, tune_model, tune_out;
  std::string tune_set = "nontesting";
  tune->add_option("--corpus", tune_corpus, "corpus manifest")->required();
  tune->add_option("--model", tune_model, "trained model directory")
      ->required();
  tune->add_option("--out", tune_out, "output directory")->required();
  tune->add_option("--set", tune_set, "nontesting|train|val|test");

  // detect
  auto* detect = app.add_subcommand("detect", "detect events in recordings");
  fs::path detect_model, detect_out;
  std::optional<fs::path> detect_corpus, detect_recording, threshold_file;
  std::string detect_split = "test";
  std::optional<double> detect_threshold;
  bool detect_dump_probs = false;
  detect->add_option("--model", detect_model, "trained model directory")
      ->required();
  detect->add_option("--out", detect_out, "output directory")->required();
  detect->add_option("--corpus", detect_corpus, "corpus manifest");
  detect->add_option("--split", detect_split, "corpus split to detect on");
  detect->add_option("--recording", detect_recording,
                     "single recording manifest");
  detect->add_option("--threshold", detect_threshold, "output threshold mu");
  detect->add_option("--threshold-file", threshold_file,
                     "threshold.json from tune");
  detect->add_flag("--dump-probs", detect_dump_probs,
                   "also write per-sample probabilities (float32)");

  // eval
  auto* eval = app.add_subcommand("eval", "score predictions against truth");
  std::optional<fs::path> eval_truth, eval_pred, eval_corpus;
  std::string eval_split = "test", eval_event;
  fs::path eval_pred_dir = ".", eval_out;
  double eval_iou = 0.2;
  eval->add_option("--truth", eval_truth, "truth event CSV");
  eval->add_option("--pred", eval_pred, "prediction event CSV");
  eval->add_option("--corpus", eval_corpus, "corpus manifest");
  eval->add_option("--split", eval_split, "corpus split");
  eval->add_option("--event", eval_event, "event type for corpus mode");
  eval->add_option("--pred-dir", eval_pred_dir,
                   "directory holding pred_<id>_<event>.csv");
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--iou", eval_iou, "headline IoU threshold");

  // split
  auto* split = app.add_subcommand("split", "band-power split analysis");
  fs::path split_corpus, split_out;
  double split_gamma = red::split::kDefaultGamma;
  split->add_option("--corpus", split_corpus, "corpus manifest")->required();
  split->add_option("--out", split_out, "output directory")->required();
  split->add_option("--gamma", split_gamma, "RBF kernel coefficient");

  // cwt
  auto* cwt = app.add_subcommand("cwt", "export a spectrogram");
  fs::path cwt_signal, cwt_out;
  cwt->add_option("--signal", cwt_signal, "signal file")->required();
  cwt->add_option("--out", cwt_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_out, synth_seed, config, n_train, n_val, n_test);
    }
    if (train->parsed()) {
      return cmd_train(train_corpus, train_event, train_variant, train_out,
                       train_seed, config);
    }
    if (tune->parsed()) {
      return cmd_tune(tune_corpus, tune_model, tune_out, tune_set, config);
    }
    if (detect->parsed()) {
      return cmd_detect(detect_model, detect_out, detect_corpus, detect_split,
                        detect_recording, detect_threshold, threshold_file,
                        detect_dump_probs);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_truth, eval_pred, eval_corpus, eval_split,
                      eval_event, eval_pred_dir, eval_out, eval_iou, config);
    }
    if (split->parsed()) {
      return cmd_split(split_corpus, split_out, split_gamma);
    }
    if (cwt->parsed()) {
      return cmd_cwt(cwt_signal, cwt_out, config);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
