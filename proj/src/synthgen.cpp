#include "red/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "red/rng.hpp"
#include "red/sigio.hpp"

namespace red::synth {

namespace {

void check_range(double lo, double hi, double bound_lo, double bound_hi,
                 const std::string& what) {
  if (!(lo < hi)) {
    throw Error("synth: " + what + " range must satisfy lo < hi");
  }
  if (lo < bound_lo || hi > bound_hi) {
    throw Error("synth: " + what + " range [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "] outside [" + std::to_string(bound_lo) +
                ", " + std::to_string(bound_hi) + "]");
  }
}

int64_t poisson_count(double lambda, Rng& rng) {
  // Knuth's method; lambdas here stay small (tens).
  const double limit = std::exp(-lambda);
  int64_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(fs > 0.0)) throw Error("synth: fs must be positive");
  if (!(duration_sec > 0.0)) throw Error("synth: duration must be positive");
  if (background_pink < 0.0 || theta_amp < 0.0) {
    throw Error("synth: background levels must be >= 0");
  }
  if (spindle.rate_per_min < 0.0 || kcomplex.rate_per_min < 0.0) {
    throw Error("synth: event rates must be >= 0");
  }
  check_range(spindle.freq_lo_hz, spindle.freq_hi_hz, 11.0, 16.0,
              "spindle frequency");
  check_range(spindle.dur_lo_sec, spindle.dur_hi_sec, 0.5, 2.0,
              "spindle duration");
  check_range(kcomplex.freq_lo_hz, kcomplex.freq_hi_hz, 0.5, 2.0,
              "kcomplex frequency");
  check_range(kcomplex.dur_lo_sec, kcomplex.dur_hi_sec, 0.5, 1.5,
              "kcomplex duration");
  if (!(spindle.amp_lo < spindle.amp_hi) ||
      !(kcomplex.amp_lo < kcomplex.amp_hi)) {
    throw Error("synth: amplitude ranges must satisfy lo < hi");
  }
  if (min_gap_sec < 0.0) throw Error("synth: min gap must be >= 0");
  if (!(epoch_sec > 0.0)) throw Error("synth: epoch length must be positive");
}

void add_spindle_template(Signal& signal, double start_sec, double dur,
                          double freq_hz, double amp, double phase) {
  const double fs = signal.fs;
  const double center = start_sec + dur / 2.0;
  const double sigma = dur / 6.0;  // +-3 sigma envelope spans the event
  const int64_t lo = std::max<int64_t>(0, std::llround(start_sec * fs));
  const int64_t hi = std::min<int64_t>(
      static_cast<int64_t>(signal.samples.size()), std::llround((start_sec + dur) * fs));
  for (int64_t i = lo; i < hi; ++i) {
    const double t = static_cast<double>(i) / fs - center;
    signal.samples[i] += amp * std::exp(-t * t / (2.0 * sigma * sigma)) *
                         std::sin(2.0 * std::numbers::pi * freq_hz * t + phase);
  }
}

void add_kcomplex_template(Signal& signal, double start_sec, double dur,
                           double amp) {
  // Difference of two Gaussians: a deep negative lobe over roughly the
  // first two thirds, a smaller positive rebound over the last third.
  const double fs = signal.fs;
  const double c_neg = start_sec + 0.33 * dur;
  const double c_pos = start_sec + 0.78 * dur;
  const double s_neg = 0.14 * dur;
  const double s_pos = 0.11 * dur;
  const int64_t lo = std::max<int64_t>(0, std::llround(start_sec * fs));
  const int64_t hi = std::min<int64_t>(
      static_cast<int64_t>(signal.samples.size()), std::llround((start_sec + dur) * fs));
  for (int64_t i = lo; i < hi; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double dn = (t - c_neg) / s_neg;
    const double dp = (t - c_pos) / s_pos;
    signal.samples[i] +=
        amp * (-std::exp(-0.5 * dn * dn) + 0.55 * std::exp(-0.5 * dp * dp));
  }
}

Recording generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const double fs = config.fs;
  const int64_t n = std::llround(config.duration_sec * fs);

  Recording rec;
  rec.signal.fs = fs;
  rec.signal.samples.assign(static_cast<size_t>(n), 0.0);

  // 1/f background: white noise through a 3-state pink filter, then
  // standardized to the requested level.
  {
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    std::vector<double> pink(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      const double white = rng.normal();
      b0 = 0.99765 * b0 + white * 0.0990460;
      b1 = 0.96300 * b1 + white * 0.2965164;
      b2 = 0.57000 * b2 + white * 1.0526913;
      pink[static_cast<size_t>(i)] = b0 + b1 + b2 + white * 0.1848;
    }
    double mean = 0.0;
    for (double v : pink) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : pink) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double scale = config.background_pink / std::sqrt(std::max(var, 1e-30));
    for (int64_t i = 0; i < n; ++i) {
      rec.signal.samples[static_cast<size_t>(i)] =
          (pink[static_cast<size_t>(i)] - mean) * scale;
    }
  }

  // Theta component: sine with a frequency random walk inside 4-7 Hz and a
  // slow amplitude envelope.
  if (config.theta_amp > 0.0) {
    double freq = rng.uniform(4.0, 7.0);
    double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double env_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int64_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      freq += rng.uniform(-1.0, 1.0) * 0.5 / fs;
      freq = std::clamp(freq, 4.0, 7.0);
      phase += 2.0 * std::numbers::pi * freq / fs;
      const double env =
          0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 0.08 * t + env_phase);
      rec.signal.samples[static_cast<size_t>(i)] +=
          config.theta_amp * env * std::sin(phase);
    }
  }

  // Event placement: rejection sampling against all previously placed
  // events (across both types) with the configured minimum gap.
  struct Placed {
    Interval where;
    bool is_spindle;
    double freq, amp, phase;
  };
  std::vector<Placed> placed;
  auto place_events = [&](const EventModel& model, bool is_spindle) {
    const double lambda = model.rate_per_min * config.duration_sec / 60.0;
    if (lambda <= 0.0) return;
    const int64_t count = poisson_count(lambda, rng);
    for (int64_t e = 0; e < count; ++e) {
      const double dur = rng.uniform(model.dur_lo_sec, model.dur_hi_sec);
      const double freq = rng.uniform(model.freq_lo_hz, model.freq_hi_hz);
      const double amp = rng.uniform(model.amp_lo, model.amp_hi);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      bool ok = false;
      for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
        const double start = rng.uniform(0.0, config.duration_sec - dur);
        const Interval candidate{start, start + dur};
        ok = true;
        for (const Placed& p : placed) {
          if (candidate.start_sec < p.where.end_sec + config.min_gap_sec &&
              p.where.start_sec < candidate.end_sec + config.min_gap_sec) {
            ok = false;
            break;
          }
        }
        if (ok) placed.push_back({candidate, is_spindle, freq, amp, phase});
      }
      if (!ok) {
        throw Error(
            "synth: cannot place events without overlap; lower the rates or "
            "the minimum gap");
      }
    }
  };
  place_events(config.spindle, true);
  place_events(config.kcomplex, false);

  EventList spindles, kcomplexes;
  std::sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
    return a.where.start_sec < b.where.start_sec;
  });
  for (const Placed& p : placed) {
    if (p.is_spindle) {
      add_spindle_template(rec.signal, p.where.start_sec, p.where.duration(),
                           p.freq, p.amp, p.phase);
      spindles.events.push_back(p.where);
    } else {
      add_kcomplex_template(rec.signal, p.where.start_sec, p.where.duration(),
                            p.amp);
      kcomplexes.events.push_back(p.where);
    }
  }
  rec.annotations[kSpindle] = std::move(spindles);
  rec.annotations[kKComplex] = std::move(kcomplexes);

  const int64_t n_epochs =
      static_cast<int64_t>(config.duration_sec / config.epoch_sec);
  for (int64_t e = 0; e < n_epochs; ++e) {
    rec.epochs.push_back(
        {static_cast<double>(e) * config.epoch_sec,
         static_cast<double>(e + 1) * config.epoch_sec});
  }

  validate_events(rec.annotations[kSpindle], "synth spindles");
  validate_events(rec.annotations[kKComplex], "synth kcomplexes");
  return rec;
}

Corpus write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec) {
  std::filesystem::create_directories(dir);
  Corpus corpus;
  corpus.fs = spec.base.fs;
  const int total = spec.n_train + spec.n_val + spec.n_test;
  if (total <= 0) throw Error("synth: empty corpus spec");

  for (int i = 0; i < total; ++i) {
    SynthConfig cfg = spec.base;
    cfg.seed = spec.base.seed * 1000003ULL + static_cast<uint64_t>(i);
    Recording rec = generate(cfg);
    char id[32];
    std::snprintf(id, sizeof(id), "rec%02d", i);
    rec.id = id;
    const std::string split = i < spec.n_train                ? "train"
                              : i < spec.n_train + spec.n_val ? "val"
                                                              : "test";

    const std::string signal_file = rec.id + ".sig";
    sigio::write_signal(dir / signal_file, rec.signal);
    std::map<std::string, std::string> ann_files;
    for (const auto& [type, list] : rec.annotations) {
      const std::string f = rec.id + "_" + type + ".csv";
      sigio::write_events(dir / f, list);
      ann_files[type] = f;
    }
    const std::string manifest = rec.id + ".json";
    sigio::write_recording_manifest(dir / manifest, rec, signal_file,
                                    ann_files);
    corpus.entries.push_back({rec.id, split, manifest});
  }

  nlohmann::json j;
  j["fs"] = corpus.fs;
  nlohmann::json entries = nlohmann::json::array();
  for (const CorpusEntry& e : corpus.entries) {
    entries.push_back(
        {{"id", e.id}, {"split", e.split}, {"manifest", e.manifest}});
  }
  j["recordings"] = entries;
  std::ofstream out(dir / "corpus.json", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "corpus.json").string());
  out << j.dump(2) << "\n";
  return corpus;
}

Corpus read_corpus_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  Corpus corpus;
  corpus.fs = j.at("fs").get<double>();
  for (const auto& e : j.at("recordings")) {
    corpus.entries.push_back({e.at("id").get<std::string>(),
                              e.at("split").get<std::string>(),
                              e.at("manifest").get<std::string>()});
  }
  return corpus;
}

Recording load_recording(const std::filesystem::path& corpus_manifest_path,
                         const CorpusEntry& entry) {
  Recording rec =
      sigio::read_recording(corpus_manifest_path.parent_path() / entry.manifest);
  rec.id = entry.id;
  return rec;
}

}  // namespace red::synth
