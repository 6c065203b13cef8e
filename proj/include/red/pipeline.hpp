#pragma once

#include <vector>

#include "red/types.hpp"

// Preprocessing glue shared by training, tuning and detection: band-pass,
// resample to the working rate, normalize by the non-testing-set standard
// deviation. Keeps the physical (pre-normalization) signal around for
// postprocessing rules that look at the waveform.
namespace red::pipeline {

struct PreprocessConfig {
  double band_lo_hz{0.3};
  double band_hi_hz{35.0};
  double target_fs{200.0};
};

struct Prepared {
  Recording rec;    // normalized signal, original epochs and annotations
  Signal physical;  // band-passed and resampled, before normalization
};

// Band-pass + resample only (the global-std statistic is computed on this).
Signal preprocess_signal(const Signal& raw, const PreprocessConfig& config);

// Std over the concatenated preprocessed non-testing signals.
double compute_global_std(const std::vector<Recording>& recordings,
                          const PreprocessConfig& config);

Prepared prepare(const Recording& raw, const PreprocessConfig& config,
                 double global_std);

}  // namespace red::pipeline
