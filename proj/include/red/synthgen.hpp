#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "red/types.hpp"

// Deterministic synthetic EEG with ground-truth spindle and K-complex
// annotations: 1/f background plus a wandering theta component, Gaussian
// windowed sigma-band bursts for spindles, and biphasic (negative lobe,
// positive rebound) templates for K-complexes.
namespace red::synth {

struct EventModel {
  double rate_per_min{0.0};
  double freq_lo_hz{0.0}, freq_hi_hz{0.0};
  double dur_lo_sec{0.0}, dur_hi_sec{0.0};
  double amp_lo{0.0}, amp_hi{0.0};
};

struct SynthConfig {
  double fs{200.0};
  double duration_sec{600.0};
  double background_pink{8.0};  // 1/f noise standard deviation
  double theta_amp{4.0};        // 4-7 Hz background component amplitude
  EventModel spindle{4.0, 11.0, 16.0, 0.5, 2.0, 25.0, 50.0};
  EventModel kcomplex{3.0, 0.5, 2.0, 0.5, 1.5, 40.0, 80.0};
  double min_gap_sec{0.5};
  double epoch_sec{20.0};
  uint64_t seed{0};

  void validate() const;
};

// Event types are annotated under these names.
inline constexpr const char* kSpindle = "spindle";
inline constexpr const char* kKComplex = "kcomplex";

// Same config (and seed) always returns the bit-identical recording.
// Throws when the requested rates cannot be placed without overlap.
Recording generate(const SynthConfig& config);

// The clean K-complex template used by the generator, on its own: amplitude
// `amp`, duration `dur`, placed at `start_sec` into a zero signal of the
// given length. Used to build fusion cases in tests.
void add_kcomplex_template(Signal& signal, double start_sec, double dur,
                           double amp);
void add_spindle_template(Signal& signal, double start_sec, double dur,
                          double freq_hz, double amp, double phase);

// --- Corpus ---------------------------------------------------------------

struct CorpusEntry {
  std::string id;
  std::string split;  // train | val | test
  std::string manifest;  // per-recording manifest path, relative to corpus
};

struct Corpus {
  double fs{200.0};
  std::vector<CorpusEntry> entries;
};

struct CorpusSpec {
  int n_train{8};
  int n_val{3};
  int n_test{4};
  SynthConfig base;  // per-recording seeds derive from base.seed
};

// Writes recordings (signal + event CSVs + per-recording manifests) and a
// corpus manifest "corpus.json" into the directory. Returns the corpus.
Corpus write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec);

Corpus read_corpus_manifest(const std::filesystem::path& path);

// Loads one recording of a corpus rooted at the manifest's directory.
Recording load_recording(const std::filesystem::path& corpus_manifest_path,
                         const CorpusEntry& entry);

}  // namespace red::synth
