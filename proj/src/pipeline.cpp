#include "red/pipeline.hpp"

#include "red/sigio.hpp"

namespace red::pipeline {

Signal preprocess_signal(const Signal& raw, const PreprocessConfig& config) {
  Signal out = sigio::bandpass(raw, config.band_lo_hz, config.band_hi_hz);
  return sigio::resample(out, config.target_fs);
}

double compute_global_std(const std::vector<Recording>& recordings,
                          const PreprocessConfig& config) {
  if (recordings.empty()) {
    throw Error("compute_global_std: no recordings");
  }
  std::vector<Signal> processed;
  processed.reserve(recordings.size());
  for (const Recording& rec : recordings) {
    processed.push_back(preprocess_signal(rec.signal, config));
  }
  std::vector<const Signal*> ptrs;
  for (const Signal& s : processed) ptrs.push_back(&s);
  return sigio::global_std(ptrs);
}

Prepared prepare(const Recording& raw, const PreprocessConfig& config,
                 double global_std) {
  Prepared out;
  out.physical = preprocess_signal(raw.signal, config);
  out.rec = raw;
  out.rec.signal = sigio::normalize(out.physical, global_std);
  return out;
}

}  // namespace red::pipeline
