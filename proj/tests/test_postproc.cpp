#include <cmath>

#include "doctest.h"
#include "red/postproc.hpp"
#include "red/rng.hpp"
#include "red/synthgen.hpp"

using namespace red;

namespace {

EventList events_of(std::vector<Interval> v) {
  EventList list;
  list.events = std::move(v);
  return list;
}

EventList random_events(Rng& rng, double horizon = 120.0) {
  EventList list;
  double t = rng.uniform(0.0, 1.0);
  while (t < horizon) {
    const double duration = rng.uniform(0.05, 7.0);
    if (t + duration >= horizon) break;
    list.events.push_back({t, t + duration});
    t += duration + rng.uniform(0.01, 3.0);
  }
  return list;
}

}  // namespace

TEST_SUITE("postproc") {

TEST_CASE("spindle rules: merge, drop, crop examples") {
  const auto merged = postproc::spindle_rules(
      events_of({{0.0, 0.5}, {0.7, 1.2}}));  // gap 0.2 < 0.3
  REQUIRE(merged.size() == 1);
  CHECK(merged.events[0].start_sec == doctest::Approx(0.0));
  CHECK(merged.events[0].end_sec == doctest::Approx(1.2));

  CHECK(postproc::spindle_rules(events_of({{1.0, 1.2}})).empty());
  CHECK(postproc::spindle_rules(events_of({{1.0, 7.0}})).empty());

  const auto cropped = postproc::spindle_rules(events_of({{0.0, 4.0}}));
  REQUIRE(cropped.size() == 1);
  CHECK(cropped.events[0].start_sec == doctest::Approx(0.5));
  CHECK(cropped.events[0].end_sec == doctest::Approx(3.5));
}

TEST_CASE("spindle rules merge before dropping") {
  // Two sub-0.3 s fragments 0.1 s apart merge into one keepable event.
  const auto out =
      postproc::spindle_rules(events_of({{0.0, 0.2}, {0.3, 0.5}}));
  REQUIRE(out.size() == 1);
  CHECK(out.events[0].duration() == doctest::Approx(0.5));
}

TEST_CASE("spindle rules: output durations in bounds, idempotent") {
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const EventList input = random_events(rng);
    const EventList once = postproc::spindle_rules(input);
    validate_events(once, "spindle_rules output");
    for (const Interval& ev : once.events) {
      CHECK(ev.duration() >= 0.3);
      CHECK(ev.duration() <= 3.0 + 1e-9);
    }
    const EventList twice = postproc::spindle_rules(once);
    REQUIRE(twice.size() == once.size());
    for (size_t i = 0; i < once.size(); ++i) {
      CHECK(twice.events[i].start_sec == once.events[i].start_sec);
      CHECK(twice.events[i].end_sec == once.events[i].end_sec);
    }
  }
}

TEST_CASE("kcomplex rules drop sub-0.3 s events") {
  Signal sig;
  sig.fs = 200.0;
  sig.samples.assign(2000, 0.0);
  CHECK(postproc::kcomplex_rules(events_of({{1.0, 1.25}}), sig).empty());
}

TEST_CASE("kcomplex rules keep an event with one interior peak") {
  Signal sig;
  sig.fs = 200.0;
  sig.samples.assign(2000, 0.0);
  synth::add_kcomplex_template(sig, 2.0, 1.0, 60.0);
  const auto out = postproc::kcomplex_rules(events_of({{2.0, 3.0}}), sig);
  REQUIRE(out.size() == 1);
  CHECK(out.events[0].start_sec == doctest::Approx(2.0));
  CHECK(out.events[0].end_sec == doctest::Approx(3.0));
}

TEST_CASE("fused biphasic pair splits at the hand-computed midpoint") {
  // Two negative deflections centered at 0.5 s and 2.0 s with a positive
  // excursion between them at 1.25 s. The 4 Hz zero-phase low-pass keeps
  // each symmetric lobe's minimum at its center, so the representatives sit
  // at 0.5 and 2.0 and the split lands at their midpoint, 1.25 s.
  Signal sig;
  sig.fs = 200.0;
  sig.samples.assign(800, 0.0);
  auto add_gauss = [&sig](double center, double sigma, double amp) {
    for (size_t i = 0; i < sig.samples.size(); ++i) {
      const double t = static_cast<double>(i) / sig.fs - center;
      sig.samples[i] += amp * std::exp(-t * t / (2.0 * sigma * sigma));
    }
  };
  add_gauss(0.5, 0.10, -50.0);
  add_gauss(2.0, 0.10, -50.0);
  add_gauss(1.25, 0.20, 25.0);

  const auto out = postproc::kcomplex_rules(events_of({{0.1, 2.6}}), sig);
  REQUIRE(out.size() == 2);
  CHECK(out.events[0].start_sec == doctest::Approx(0.1));
  CHECK(std::fabs(out.events[0].end_sec - 1.25) <= 1.0 / sig.fs);
  CHECK(out.events[1].start_sec == out.events[0].end_sec);
  CHECK(out.events[1].end_sec == doctest::Approx(2.6));
}

TEST_CASE("peaks without a zero-crossing in between are averaged, not split") {
  // Two negative lobes whose valley stays below zero: one representative.
  Signal sig;
  sig.fs = 200.0;
  sig.samples.assign(800, 0.0);
  for (size_t i = 0; i < sig.samples.size(); ++i) {
    const double t = static_cast<double>(i) / sig.fs;
    const double d1 = (t - 1.0) / 0.15, d2 = (t - 1.6) / 0.15;
    sig.samples[i] =
        -40.0 * std::exp(-0.5 * d1 * d1) - 40.0 * std::exp(-0.5 * d2 * d2) -
        5.0;
  }
  const auto out = postproc::kcomplex_rules(events_of({{0.5, 2.2}}), sig);
  REQUIRE(out.size() == 1);
}

TEST_CASE("peaks hugging the event borders are ignored") {
  Signal sig;
  sig.fs = 200.0;
  sig.samples.assign(800, 0.0);
  auto add_gauss = [&sig](double center, double sigma, double amp) {
    for (size_t i = 0; i < sig.samples.size(); ++i) {
      const double t = static_cast<double>(i) / sig.fs - center;
      sig.samples[i] += amp * std::exp(-t * t / (2.0 * sigma * sigma));
    }
  };
  // One deep central peak plus one within 0.05 s of the start and one
  // within 0.2 s of the end; the guarded peaks must not cause splits.
  add_gauss(1.02, 0.02, -30.0);   // < 0.05 s after start (event at 1.0)
  add_gauss(2.0, 0.10, -50.0);
  add_gauss(2.93, 0.02, -30.0);   // < 0.2 s before end (event ends 3.1)
  add_gauss(1.5, 0.15, 20.0);
  add_gauss(2.5, 0.15, 20.0);
  const auto out = postproc::kcomplex_rules(events_of({{1.0, 3.1}}), sig);
  REQUIRE(out.size() == 1);
}

TEST_CASE("kcomplex output never grows beyond the input support") {
  Rng rng(43);
  Signal sig;
  sig.fs = 200.0;
  sig.samples.resize(200 * 120);
  for (double& v : sig.samples) v = rng.normal(0.0, 10.0);
  const EventList input = random_events(rng, 110.0);
  const EventList out = postproc::kcomplex_rules(input, sig);
  validate_events(out, "kcomplex_rules output");
  // Every output event lies inside some input event.
  for (const Interval& ev : out.events) {
    bool covered = false;
    for (const Interval& in : input.events) {
      if (in.start_sec <= ev.start_sec + 1e-12 &&
          ev.end_sec <= in.end_sec + 1e-12) {
        covered = true;
        break;
      }
    }
    CHECK(covered);
  }
}

TEST_CASE("apply dispatches by event type") {
  Signal sig;
  sig.fs = 200.0;
  sig.samples.assign(1000, 0.0);
  const EventList events = events_of({{1.0, 2.0}});
  CHECK(postproc::apply("spindle", events, sig).size() == 1);
  CHECK(postproc::apply("kcomplex", events, sig).size() == 1);
  CHECK_THROWS_AS(postproc::apply("blink", events, sig), Error);
}

}  // TEST_SUITE
