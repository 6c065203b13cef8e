#include "red/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "red/layers.hpp"
#include "red/optim.hpp"

namespace red::train {

void TrainConfig::validate() const {
  if (batch <= 0 || batch % 2 != 0) {
    throw Error("train: batch size must be positive and even, got " +
                std::to_string(batch));
  }
  if (!(lr > 0.0)) throw Error("train: learning rate must be positive");
  if (patience <= 0) throw Error("train: patience must be positive");
  if (max_halvings < 0) throw Error("train: halving budget must be >= 0");
  if (!(g_max > 0.0)) throw Error("train: g_max must be positive");
  if (val_check_every <= 0) {
    throw Error("train: validation cadence must be positive");
  }
}

TrainConfig train_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("train config: ") + e.what());
  }
  TrainConfig cfg;
  cfg.batch = j.value("M", cfg.batch);
  cfg.lr = j.value("alpha", cfg.lr);
  cfg.patience = j.value("I_lr", cfg.patience);
  cfg.max_halvings = j.value("N_lr", cfg.max_halvings);
  cfg.g_max = j.value("g_max", cfg.g_max);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.val_check_every = j.value("val_check_every", cfg.val_check_every);
  cfg.improve_eps = j.value("improve_eps", cfg.improve_eps);
  cfg.validate();
  return cfg;
}

std::vector<int> label_sequence(const EventList& events, Interval window,
                                double fs, int factor) {
  const int64_t n = std::llround(window.duration() * fs);
  if (factor <= 0 || n % factor != 0) {
    throw Error("label_sequence: window samples (" + std::to_string(n) +
                ") not divisible by factor " + std::to_string(factor));
  }
  std::vector<int> labels(static_cast<size_t>(n / factor), 0);
  size_t ev = 0;
  int count = 0;
  for (int64_t j = 0; j < n; ++j) {
    const double t = window.start_sec + static_cast<double>(j) / fs;
    while (ev < events.events.size() && events.events[ev].end_sec <= t) ++ev;
    const bool inside =
        ev < events.events.size() && events.events[ev].start_sec <= t;
    count += inside ? 1 : 0;
    if ((j + 1) % factor == 0) {
      labels[static_cast<size_t>(j / factor)] = (2 * count >= factor) ? 1 : 0;
      count = 0;
    }
  }
  return labels;
}

namespace {

int64_t count_event_samples(const EventList& events, Interval window,
                            double fs) {
  const int64_t j0 = std::llround(window.start_sec * fs);
  const int64_t j1 = std::llround(window.end_sec * fs);
  int64_t count = 0;
  size_t ev = 0;
  for (int64_t j = j0; j < j1; ++j) {
    const double t = static_cast<double>(j) / fs;
    while (ev < events.events.size() && events.events[ev].end_sec <= t) ++ev;
    if (ev < events.events.size() && events.events[ev].start_sec <= t) ++count;
  }
  return count;
}

}  // namespace

EpochPool build_pool(const std::vector<Recording>& train_set,
                     const std::string& event_type,
                     bool allow_uniform_fallback) {
  if (train_set.empty()) throw Error("build_pool: empty training set");
  EpochPool pool;
  std::vector<int64_t> counts;
  for (size_t r = 0; r < train_set.size(); ++r) {
    const Recording& rec = train_set[r];
    const auto it = rec.annotations.find(event_type);
    if (it == rec.annotations.end()) {
      throw Error("build_pool: recording '" + rec.id +
                  "' has no annotations for '" + event_type + "'");
    }
    for (size_t e = 0; e < rec.epochs.size(); ++e) {
      const int64_t c =
          count_event_samples(it->second, rec.epochs[e], rec.signal.fs);
      pool.epochs.push_back(
          {static_cast<int>(r), static_cast<int>(e), c});
      counts.push_back(c);
    }
  }
  if (counts.empty()) throw Error("build_pool: training set has no epochs");

  std::vector<int64_t> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  const size_t mid = sorted.size() / 2;
  pool.median = (sorted.size() % 2 == 1)
                    ? static_cast<double>(sorted[mid])
                    : 0.5 * (static_cast<double>(sorted[mid - 1]) +
                             static_cast<double>(sorted[mid]));

  for (size_t i = 0; i < pool.epochs.size(); ++i) {
    if (static_cast<double>(pool.epochs[i].event_samples) < pool.median) {
      pool.low.push_back(static_cast<int>(i));
    } else {
      pool.high.push_back(static_cast<int>(i));
    }
  }
  if (pool.low.empty() || pool.high.empty()) {
    if (!allow_uniform_fallback) {
      throw Error(
          "build_pool: every epoch holds the median event count, the "
          "balanced split is empty on one side; rerun with the uniform "
          "sampling fallback");
    }
    pool.degenerate = true;
  }
  return pool;
}

namespace {

// Copies T (+ context) samples around a crop start; context samples beyond
// the recording are zero.
void copy_segment(const Recording& rec, int64_t start, int t_samples,
                  int border, double* dst) {
  const int64_t n = static_cast<int64_t>(rec.signal.samples.size());
  const int total = t_samples + 2 * border;
  for (int i = 0; i < total; ++i) {
    const int64_t src = start - border + i;
    dst[i] = (src >= 0 && src < n) ? rec.signal.samples[static_cast<size_t>(src)]
                                   : 0.0;
  }
}

}  // namespace

Batch sample_batch(const EpochPool& pool,
                   const std::vector<Recording>& train_set,
                   const std::string& event_type,
                   const model::ModelConfig& mcfg, int batch_size, Rng& rng) {
  if (batch_size <= 0 || batch_size % 2 != 0) {
    throw Error("sample_batch: batch size must be positive and even");
  }
  if (!pool.degenerate && (pool.low.empty() || pool.high.empty())) {
    throw Error("sample_batch: a pool side is empty");
  }
  const int t_samples = mcfg.t_samples;
  const int border = mcfg.variant == model::Variant::cwt ? mcfg.border : 0;
  const int input_len = t_samples + 2 * border;
  const double fs = mcfg.fs;

  Batch batch;
  batch.segments = ad::Tensor::zeros({batch_size, input_len, 1});
  batch.labels.reserve(static_cast<size_t>(batch_size) *
                       (t_samples / 8));

  std::vector<int> all_indices;
  if (pool.degenerate) {
    all_indices.resize(pool.epochs.size());
    for (size_t i = 0; i < all_indices.size(); ++i) {
      all_indices[i] = static_cast<int>(i);
    }
  }

  for (int b = 0; b < batch_size; ++b) {
    const std::vector<int>& side =
        pool.degenerate ? all_indices
                        : (b < batch_size / 2 ? pool.low : pool.high);
    const int pick = side[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(side.size()) - 1))];
    const EpochRef& ref = pool.epochs[static_cast<size_t>(pick)];
    const Recording& rec = train_set[static_cast<size_t>(ref.recording)];
    const Interval& epoch = rec.epochs[static_cast<size_t>(ref.epoch_idx)];
    const int64_t n = static_cast<int64_t>(rec.signal.samples.size());
    if (n < t_samples) {
      throw Error("sample_batch: recording '" + rec.id +
                  "' shorter than one segment");
    }
    const double center = rng.uniform(epoch.start_sec, epoch.end_sec);
    int64_t start = std::llround(center * fs) - t_samples / 2;
    start = std::clamp<int64_t>(start, 0, n - t_samples);

    copy_segment(rec, start, t_samples, border,
                 batch.segments.data() +
                     static_cast<size_t>(b) * input_len);
    const Interval window{static_cast<double>(start) / fs,
                          static_cast<double>(start + t_samples) / fs};
    const auto labels =
        label_sequence(rec.annotations.at(event_type), window, fs, 8);
    batch.labels.insert(batch.labels.end(), labels.begin(), labels.end());
  }
  return batch;
}

namespace {

std::vector<std::vector<double>> snapshot_state(model::Network& net) {
  std::vector<std::vector<double>> snap;
  for (auto& [name, tensor] : net.named_state()) {
    snap.push_back(tensor.values());
  }
  return snap;
}

void restore_state(model::Network& net,
                   const std::vector<std::vector<double>>& snap) {
  auto state = net.named_state();
  for (size_t i = 0; i < state.size(); ++i) {
    state[i].tensor.values() = snap[i];
  }
}

struct ValSet {
  std::vector<ad::Tensor> segments;          // chunks of rows
  std::vector<std::vector<int>> labels;      // per chunk
};

ValSet build_val_set(const std::vector<Recording>& val_set,
                     const std::string& event_type,
                     const model::ModelConfig& mcfg) {
  const int t_samples = mcfg.t_samples;
  const int border = mcfg.variant == model::Variant::cwt ? mcfg.border : 0;
  const int input_len = t_samples + 2 * border;
  const double fs = mcfg.fs;
  constexpr int kChunk = 16;

  ValSet out;
  std::vector<std::pair<const Recording*, int64_t>> crops;
  for (const Recording& rec : val_set) {
    const int64_t n = static_cast<int64_t>(rec.signal.samples.size());
    for (int64_t start = 0; start + t_samples <= n; start += t_samples) {
      crops.emplace_back(&rec, start);
    }
  }
  if (crops.empty()) {
    throw Error("train: validation set yields no segments");
  }
  for (size_t c0 = 0; c0 < crops.size(); c0 += kChunk) {
    const int rows = static_cast<int>(std::min<size_t>(kChunk, crops.size() - c0));
    ad::Tensor seg = ad::Tensor::zeros({rows, input_len, 1});
    std::vector<int> labels;
    for (int r = 0; r < rows; ++r) {
      const auto& [rec, start] = crops[c0 + static_cast<size_t>(r)];
      copy_segment(*rec, start, t_samples, border,
                   seg.data() + static_cast<size_t>(r) * input_len);
      const Interval window{static_cast<double>(start) / fs,
                            static_cast<double>(start + t_samples) / fs};
      const auto lab =
          label_sequence(rec->annotations.at(event_type), window, fs, 8);
      labels.insert(labels.end(), lab.begin(), lab.end());
    }
    out.segments.push_back(std::move(seg));
    out.labels.push_back(std::move(labels));
  }
  return out;
}

double val_loss(model::Network& net, const ValSet& vals) {
  ad::NoGradGuard guard;
  double total = 0.0;
  size_t rows = 0;
  for (size_t c = 0; c < vals.segments.size(); ++c) {
    ad::Tensor probs =
        net.forward(vals.segments[c], ad::Mode::infer);
    const ad::Tensor loss = ad::cross_entropy(probs, vals.labels[c]);
    const size_t n = vals.labels[c].size();
    total += loss.item() * static_cast<double>(n);
    rows += n;
  }
  return total / static_cast<double>(rows);
}

}  // namespace

TrainResult train(model::Network& net, const std::vector<Recording>& train_set,
                  const std::vector<Recording>& val_set,
                  const std::string& event_type, const TrainConfig& config) {
  config.validate();
  if (val_set.empty()) throw Error("train: empty validation set");
  const model::ModelConfig& mcfg = net.config();
  for (const auto* set : {&train_set, &val_set}) {
    for (const Recording& rec : *set) {
      if (std::fabs(rec.signal.fs - mcfg.fs) > 1e-9) {
        throw Error("train: recording '" + rec.id + "' at " +
                    std::to_string(rec.signal.fs) + " Hz, model expects " +
                    std::to_string(mcfg.fs));
      }
    }
  }

  EpochPool pool = build_pool(train_set, event_type, true);
  if (pool.degenerate) {
    std::fprintf(stderr,
                 "warning: balanced epoch pools are degenerate (all epochs "
                 "hold the median event count); sampling uniformly\n");
  }
  ValSet vals = build_val_set(val_set, event_type, mcfg);

  Rng rng(config.seed);
  auto params = net.trainable_params();
  ad::Adam adam(params, config.lr);

  TrainResult result;
  double best_val = val_loss(net, vals);
  result.initial_val_loss = best_val;
  auto best_snapshot = snapshot_state(net);
  result.log.push_back({0, std::nan(""), best_val, config.lr});

  int last_improve = 0;
  int halvings = 0;
  double lr = config.lr;

  for (int it = 1;; ++it) {
    Batch batch = sample_batch(pool, train_set, event_type, mcfg,
                               config.batch, rng);
    ad::Tensor probs = net.forward(batch.segments, ad::Mode::train);
    ad::Tensor loss = ad::cross_entropy(probs, batch.labels);
    const double train_loss = loss.item();
    if (!std::isfinite(train_loss)) {
      throw Error("train: non-finite loss at iteration " + std::to_string(it) +
                  "; aborting");
    }
    ad::backward(loss);
    ad::clip_global_norm(params, config.g_max);
    adam.step();
    adam.zero_grad();

    LogRow row{it, train_loss, std::nullopt, lr};
    if (it % config.val_check_every == 0) {
      const double vl = val_loss(net, vals);
      row.val_loss = vl;
      if (vl < best_val - config.improve_eps) {
        best_val = vl;
        best_snapshot = snapshot_state(net);
        last_improve = it;
      } else if (it - last_improve >= config.patience) {
        if (halvings == config.max_halvings) {
          result.log.push_back(row);
          result.iterations = it;
          break;
        }
        lr *= 0.5;
        adam.set_lr(lr);
        ++halvings;
        last_improve = it;
      }
    }
    result.log.push_back(row);
  }

  result.best_val_loss = best_val;
  result.halvings = halvings;
  restore_state(net, best_snapshot);
  return result;
}

void write_train_log_csv(const std::filesystem::path& path,
                         const std::vector<LogRow>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "iteration,train_loss,val_loss,lr\n";
  char train_buf[32], val_buf[32], line[128];
  for (const LogRow& row : log) {
    if (std::isfinite(row.train_loss)) {
      std::snprintf(train_buf, sizeof(train_buf), "%.12g", row.train_loss);
    } else {
      train_buf[0] = '\0';
    }
    if (row.val_loss) {
      std::snprintf(val_buf, sizeof(val_buf), "%.12g", *row.val_loss);
    } else {
      val_buf[0] = '\0';
    }
    std::snprintf(line, sizeof(line), "%d,%s,%s,%.12g\n", row.iteration,
                  train_buf, val_buf, row.lr);
    out << line;
  }
}

}  // namespace red::train
