#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "red/model.hpp"
#include "red/rng.hpp"
#include "red/types.hpp"

// Training loop: balanced random cropping around the per-epoch event-sample
// median, cross-entropy on coarse labels, Adam with global-norm clipping,
// learning-rate halving on validation plateaus.
namespace red::train {

struct TrainConfig {
  int batch{32};            // M, even (the balance rule splits it in half)
  double lr{1e-4};          // initial alpha
  int patience{1000};       // I_lr, iterations without improvement
  int max_halvings{4};      // N_lr
  double g_max{1.0};
  uint64_t seed{0};
  int val_check_every{50};
  double improve_eps{1e-5};  // minimum absolute improvement

  void validate() const;
};

TrainConfig train_config_from_json(const std::string& json_text);

// One coarse label per `factor` samples: 1 when at least half of the
// underlying samples lie inside an annotated event.
std::vector<int> label_sequence(const EventList& events, Interval window,
                                double fs, int factor = 8);

struct EpochRef {
  int recording{0};
  int epoch_idx{0};
  int64_t event_samples{0};
};

struct EpochPool {
  std::vector<EpochRef> epochs;
  double median{0.0};
  std::vector<int> low;   // strictly below the median
  std::vector<int> high;  // at or above the median
  bool degenerate{false};  // a side is empty; sampling falls back to uniform
};

// Counts event samples per training epoch and splits epochs by the median
// count. With allow_uniform_fallback an empty side yields a degenerate pool
// instead of an error.
EpochPool build_pool(const std::vector<Recording>& train_set,
                     const std::string& event_type,
                     bool allow_uniform_fallback = false);

struct Batch {
  ad::Tensor segments;      // (M, input_len, 1)
  std::vector<int> labels;  // M * (T/8)
};

// M/2 segments from each pool, each centered at a uniform instant inside
// its epoch; windows are shifted inward to fit the recording, cwt-variant
// context beyond the bounds is zero-padded.
Batch sample_batch(const EpochPool& pool,
                   const std::vector<Recording>& train_set,
                   const std::string& event_type,
                   const model::ModelConfig& mcfg, int batch_size, Rng& rng);

struct LogRow {
  int iteration{0};
  double train_loss{0.0};
  std::optional<double> val_loss;
  double lr{0.0};
};

struct TrainResult {
  double best_val_loss{0.0};
  double initial_val_loss{0.0};
  int iterations{0};
  int halvings{0};
  std::vector<LogRow> log;
};

// Runs until the validation plateau after the last halving; the network is
// left holding the best-validation parameters. Aborts on non-finite loss.
TrainResult train(model::Network& net, const std::vector<Recording>& train_set,
                  const std::vector<Recording>& val_set,
                  const std::string& event_type, const TrainConfig& config);

void write_train_log_csv(const std::filesystem::path& path,
                         const std::vector<LogRow>& log);

}  // namespace red::train
