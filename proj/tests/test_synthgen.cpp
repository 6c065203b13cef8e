#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "red/postproc.hpp"
#include "red/synthgen.hpp"

using namespace red;
namespace fs = std::filesystem;

namespace {

synth::SynthConfig short_config(uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.duration_sec = 120.0;
  cfg.seed = seed;
  return cfg;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("same seed reproduces the recording bit for bit") {
  const Recording a = synth::generate(short_config(7));
  const Recording b = synth::generate(short_config(7));
  CHECK(a.signal.samples == b.signal.samples);
  REQUIRE(a.annotations.size() == b.annotations.size());
  for (const auto& [type, list] : a.annotations) {
    const auto& other = b.annotations.at(type);
    REQUIRE(list.size() == other.size());
    for (size_t i = 0; i < list.size(); ++i) {
      CHECK(list.events[i].start_sec == other.events[i].start_sec);
      CHECK(list.events[i].end_sec == other.events[i].end_sec);
    }
  }
  const Recording c = synth::generate(short_config(8));
  CHECK(a.signal.samples != c.signal.samples);
}

TEST_CASE("zero rates give pure background with empty annotations") {
  synth::SynthConfig cfg = short_config(3);
  cfg.spindle.rate_per_min = 0.0;
  cfg.kcomplex.rate_per_min = 0.0;
  const Recording rec = synth::generate(cfg);
  CHECK(rec.annotations.at(synth::kSpindle).empty());
  CHECK(rec.annotations.at(synth::kKComplex).empty());
  validate_signal(rec.signal, "background");
}

TEST_CASE("annotations are valid and inside the recording, epochs tile it") {
  const Recording rec = synth::generate(short_config(11));
  const double dur = rec.signal.duration();
  for (const auto& [type, list] : rec.annotations) {
    validate_events(list, type);
    for (const Interval& ev : list.events) {
      CHECK(ev.start_sec >= 0.0);
      CHECK(ev.end_sec <= dur);
    }
  }
  REQUIRE(rec.epochs.size() == 6);  // 120 s / 20 s
  for (size_t e = 0; e < rec.epochs.size(); ++e) {
    CHECK(rec.epochs[e].start_sec == doctest::Approx(20.0 * e));
    CHECK(rec.epochs[e].end_sec == doctest::Approx(20.0 * (e + 1)));
  }
}

TEST_CASE("spindle events carry sigma-band power above adjacent background") {
  const synth::SynthConfig cfg = short_config(13);
  const Recording rec = synth::generate(cfg);
  const auto& spindles = rec.annotations.at(synth::kSpindle).events;
  REQUIRE(spindles.size() >= 3);

  auto band_power = [&rec](double t0, double t1) {
    const auto i0 = static_cast<size_t>(t0 * rec.signal.fs);
    const auto i1 = static_cast<size_t>(t1 * rec.signal.fs);
    const std::vector<double> chunk(rec.signal.samples.begin() + i0,
                                    rec.signal.samples.begin() + i1);
    double power = 0.0;
    for (double f = 11.0; f <= 16.0; f += 0.5) {
      power += std::norm(oracle::dft_at(chunk, rec.signal.fs, f));
    }
    return power;
  };

  int evaluated = 0, wins = 0;
  for (const Interval& ev : spindles) {
    const double len = ev.duration();
    const double bg_start = ev.start_sec - len - 0.1;
    if (bg_start < 0) continue;
    // Skip background windows that touch another event.
    bool clean = true;
    for (const auto& [type, list] : rec.annotations) {
      for (const Interval& other : list.events) {
        if (other.start_sec < ev.start_sec - 0.1 &&
            other.end_sec > bg_start) {
          clean = false;
        }
      }
    }
    if (!clean) continue;
    ++evaluated;
    if (band_power(ev.start_sec, ev.end_sec) >
        band_power(bg_start, bg_start + len)) {
      ++wins;
    }
  }
  REQUIRE(evaluated >= 3);
  CHECK(static_cast<double>(wins) >= 0.95 * static_cast<double>(evaluated));
}

TEST_CASE("realized event counts stay within 3 sigma of the Poisson mean") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    synth::SynthConfig cfg;
    cfg.duration_sec = 600.0;
    cfg.seed = seed;
    const Recording rec = synth::generate(cfg);
    const double lambda_sp = cfg.spindle.rate_per_min * 10.0;
    const double lambda_kc = cfg.kcomplex.rate_per_min * 10.0;
    const auto n_sp =
        static_cast<double>(rec.annotations.at(synth::kSpindle).size());
    const auto n_kc =
        static_cast<double>(rec.annotations.at(synth::kKComplex).size());
    CHECK(std::fabs(n_sp - lambda_sp) <= 3.0 * std::sqrt(lambda_sp));
    CHECK(std::fabs(n_kc - lambda_kc) <= 3.0 * std::sqrt(lambda_kc));
  }
}

TEST_CASE("clean kcomplex templates never trigger the split rule") {
  // One negative peak per event means kcomplex_rules leaves them alone.
  Signal sig;
  sig.fs = 200.0;
  sig.samples.assign(200 * 30, 0.0);
  EventList events;
  double t = 1.0;
  for (double dur : {0.5, 0.8, 1.0, 1.2, 1.5}) {
    synth::add_kcomplex_template(sig, t, dur, 60.0);
    events.events.push_back({t, t + dur});
    t += dur + 2.0;
  }
  const EventList out = postproc::kcomplex_rules(events, sig);
  REQUIRE(out.size() == events.size());
  for (size_t i = 0; i < out.size(); ++i) {
    CHECK(out.events[i].start_sec == events.events[i].start_sec);
    CHECK(out.events[i].end_sec == events.events[i].end_sec);
  }
}

TEST_CASE("infeasible densities are rejected") {
  synth::SynthConfig cfg = short_config(17);
  cfg.spindle.rate_per_min = 80.0;  // cannot fit with the 0.5 s gap
  CHECK_THROWS_WITH_AS(synth::generate(cfg), doctest::Contains("place"),
                       Error);
}

TEST_CASE("config validation enforces the descriptive bounds") {
  synth::SynthConfig cfg = short_config(1);
  cfg.spindle.freq_lo_hz = 5.0;  // outside 11-16 Hz
  CHECK_THROWS_AS(synth::generate(cfg), Error);
  cfg = short_config(1);
  cfg.kcomplex.dur_hi_sec = 3.0;  // outside 0.5-1.5 s
  CHECK_THROWS_AS(synth::generate(cfg), Error);
}

TEST_CASE("corpus writing is reproducible byte for byte") {
  const auto base = fs::temp_directory_path() / "red_synth_corpus";
  fs::remove_all(base);
  synth::CorpusSpec spec;
  spec.n_train = 2;
  spec.n_val = 1;
  spec.n_test = 1;
  spec.base = short_config(23);
  const auto corpus_a = synth::write_corpus(base / "a", spec);
  const auto corpus_b = synth::write_corpus(base / "b", spec);
  REQUIRE(corpus_a.entries.size() == 4);
  int trains = 0, vals = 0, tests = 0;
  for (const auto& e : corpus_a.entries) {
    trains += e.split == "train";
    vals += e.split == "val";
    tests += e.split == "test";
  }
  CHECK(trains == 2);
  CHECK(vals == 1);
  CHECK(tests == 1);

  for (const auto& entry : corpus_a.entries) {
    CHECK(file_bytes(base / "a" / entry.manifest) ==
          file_bytes(base / "b" / entry.manifest));
    CHECK(file_bytes(base / "a" / (entry.id + ".sig")) ==
          file_bytes(base / "b" / (entry.id + ".sig")));
  }
  CHECK(file_bytes(base / "a" / "corpus.json") ==
        file_bytes(base / "b" / "corpus.json"));

  // Round trip through the manifest loader.
  const auto corpus = synth::read_corpus_manifest(base / "a" / "corpus.json");
  const Recording rec =
      synth::load_recording(base / "a" / "corpus.json", corpus.entries[0]);
  CHECK(rec.id == corpus.entries[0].id);
  CHECK(rec.epochs.size() == 6);
  CHECK(rec.annotations.count(synth::kSpindle) == 1);
}

}  // TEST_SUITE
