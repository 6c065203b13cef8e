#include <cmath>

#include "doctest.h"
#include "red/detector.hpp"
#include "red/rng.hpp"

using namespace red;

namespace {

model::ModelConfig tiny_model() {
  model::ModelConfig cfg = model::ModelConfig::defaults(model::Variant::time);
  cfg.t_samples = 160;
  cfg.n_filters = 2;
  cfg.lstm_units = 3;
  cfg.classifier_hidden = 4;
  return cfg;
}

}  // namespace

TEST_SUITE("detector") {

TEST_CASE("offsets follow the half-segment stride with a right-aligned tail") {
  const int t_seg = 160;
  // Length 2T: segments at 0, T/2, T; centers tile the interior.
  auto offsets = detect::stitch_offsets(2 * t_seg, t_seg);
  CHECK(offsets == std::vector<int64_t>{0, 80, 160});

  // A ragged tail adds one right-aligned segment on the coarse grid:
  // n = 420 -> 52 coarse steps, so the tail starts at step 32 (sample 256).
  offsets = detect::stitch_offsets(2 * t_seg + 100, t_seg);
  CHECK(offsets == std::vector<int64_t>{0, 80, 160, 240, 256});
  CHECK(offsets.back() % 8 == 0);

  CHECK_THROWS_AS(detect::stitch_offsets(100, t_seg), Error);
  CHECK_THROWS_AS(detect::stitch_offsets(400, 40), Error);  // 40 % 16 != 0
}

TEST_CASE("constant segment predictions stitch to a constant sequence") {
  const int t_seg = 160;
  const auto probs = detect::stitch_predictions(
      5 * t_seg + 24, t_seg,
      [&](int64_t) { return detect::ProbSeq(t_seg / 8, 0.37); });
  REQUIRE(probs.size() == static_cast<size_t>((5 * t_seg + 24) / 8));
  for (double p : probs) CHECK(p == 0.37);
}

TEST_CASE("stitching equals one whole-recording pass of a local predictor") {
  // Deterministic "network" with receptive field < T/4: a clamped moving
  // average of the input around each coarse step.
  const int t_seg = 160;
  const int radius = 30;  // < T/4 = 40 samples
  Rng rng(9);
  std::vector<double> signal(7 * t_seg / 2 + 64);
  for (double& v : signal) v = rng.uniform(0.0, 1.0);

  auto local_mean = [&signal, radius](int64_t lo, int64_t hi,
                                      int64_t center) {
    const int64_t a = std::max(lo, center - radius);
    const int64_t b = std::min<int64_t>(hi, center + radius + 1);
    double acc = 0.0;
    for (int64_t i = a; i < b; ++i) acc += signal[static_cast<size_t>(i)];
    return acc / static_cast<double>(b - a);
  };

  const auto stitched = detect::stitch_predictions(
      static_cast<int64_t>(signal.size()), t_seg, [&](int64_t offset) {
        detect::ProbSeq out(t_seg / 8);
        for (int i = 0; i < t_seg / 8; ++i) {
          out[static_cast<size_t>(i)] =
              local_mean(offset, offset + t_seg, offset + 8 * i);
        }
        return out;
      });

  // Whole-recording reference with the identical local rule.
  const int64_t n_coarse = static_cast<int64_t>(signal.size()) / 8;
  for (int64_t c = 0; c < n_coarse; ++c) {
    const double want =
        local_mean(0, static_cast<int64_t>(signal.size()), 8 * c);
    CHECK(std::fabs(stitched[static_cast<size_t>(c)] - want) < 1e-6);
  }
}

TEST_CASE("network prediction covers every coarse step deterministically") {
  model::Network net(tiny_model(), 3);
  Rng rng(5);
  Signal rec;
  rec.fs = 200.0;
  rec.samples.resize(3 * 160 + 40);
  for (double& v : rec.samples) v = rng.normal();

  const auto a = detect::predict_recording(net, rec);
  REQUIRE(a.size() == rec.samples.size() / 8);
  // Softmax probabilities are strictly inside (0, 1); a zero would mean an
  // unwritten coarse step.
  for (double p : a) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  const auto b = detect::predict_recording(net, rec);
  CHECK(a == b);

  Signal tiny;
  tiny.fs = 200.0;
  tiny.samples.assign(100, 0.0);
  CHECK_THROWS_AS(detect::predict_recording(net, tiny), Error);
}

TEST_CASE("upsample is a linear stretch with exact endpoints") {
  const auto constant = detect::upsample_probs(detect::ProbSeq(6, 0.5), 8);
  REQUIRE(constant.size() == 48);
  for (double v : constant) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  const auto ramp = detect::upsample_probs({0.0, 1.0}, 8);
  REQUIRE(ramp.size() == 16);
  CHECK(ramp.front() == 0.0);
  CHECK(ramp.back() == 1.0);
  for (size_t i = 1; i < ramp.size(); ++i) {
    CHECK(ramp[i] > ramp[i - 1]);
    CHECK(ramp[i] == doctest::Approx(static_cast<double>(i) / 15.0));
  }

  const detect::ProbSeq coarse{0.2, 0.9, 0.4, 0.7};
  const auto up = detect::upsample_probs(coarse, 8);
  CHECK(up.front() == coarse.front());
  CHECK(up.back() == coarse.back());
  CHECK_THROWS_AS(detect::upsample_probs({0.5}, 8), Error);
}

TEST_CASE("thresholding turns runs into events") {
  const auto events =
      detect::threshold_events({0.1, 0.6, 0.7, 0.2}, 0.5, 200.0);
  REQUIRE(events.size() == 1);
  CHECK(events.events[0].start_sec == doctest::Approx(1.0 / 200.0));
  CHECK(events.events[0].end_sec == doctest::Approx(3.0 / 200.0));

  CHECK(detect::threshold_events({0.1, 0.2, 0.3}, 0.5, 200.0).empty());
  CHECK_THROWS_AS(detect::threshold_events({0.5}, 0.0, 200.0), Error);
  CHECK_THROWS_AS(detect::threshold_events({0.5}, 1.0, 200.0), Error);
}

TEST_CASE("event support shrinks monotonically in the threshold") {
  Rng rng(13);
  detect::ProbSeq probs(4000);
  for (double& p : probs) p = rng.uniform(0.0, 1.0);
  const auto low = detect::threshold_events(probs, 0.02, 200.0);
  const auto high = detect::threshold_events(probs, 0.98, 200.0);
  validate_events(low, "low threshold");
  validate_events(high, "high threshold");
  // Every high-threshold event lies inside some low-threshold event.
  for (const Interval& h : high.events) {
    bool covered = false;
    for (const Interval& l : low.events) {
      if (l.start_sec <= h.start_sec && h.end_sec <= l.end_sec) {
        covered = true;
        break;
      }
    }
    CHECK(covered);
  }
}

TEST_CASE("threshold tuning has a 49-point grid and prefers 0.5 on ties") {
  // A perfect detector: probabilities 0.99 inside truth events, 0.01
  // outside, so every grid threshold yields AF1 = 1.
  const double fs = 200.0;
  Signal physical;
  physical.fs = fs;
  physical.samples.assign(static_cast<size_t>(fs) * 30, 0.0);
  EventList truth;
  truth.events = {{2.0, 3.0}, {10.0, 11.5}, {20.0, 20.8}};
  detect::ProbSeq probs(physical.samples.size(), 0.01);
  for (const Interval& ev : truth.events) {
    for (int64_t i = std::llround(ev.start_sec * fs);
         i < std::llround(ev.end_sec * fs); ++i) {
      probs[static_cast<size_t>(i)] = 0.99;
    }
  }
  const auto result = detect::tune_threshold_probs(
      {probs}, {&physical}, {&truth}, "spindle", eval::EvalConfig::defaults());
  CHECK(result.grid.size() == 49);
  CHECK(result.mean_af1 == doctest::Approx(1.0));
  CHECK(result.mu == doctest::Approx(0.5));
  for (const auto& point : result.grid) {
    CHECK(result.mean_af1 >= point.mean_af1);
  }
}

}  // TEST_SUITE
