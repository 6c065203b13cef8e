#include "red/postproc.hpp"

#include <algorithm>
#include <cmath>

#include "red/sigio.hpp"

namespace red::postproc {

namespace {

constexpr double kMergeGapSec = 0.3;
constexpr double kMinDurationSec = 0.3;
constexpr double kMaxDurationSec = 5.0;
constexpr double kCropDurationSec = 3.0;
constexpr double kLowpassHz = 4.0;
constexpr double kStartGuardSec = 0.05;
constexpr double kEndGuardSec = 0.2;
constexpr double kFilterContextSec = 0.5;

EventList merge_close(const EventList& events, double gap) {
  EventList out;
  for (const Interval& ev : events.events) {
    if (!out.events.empty() && ev.start_sec - out.events.back().end_sec < gap) {
      out.events.back().end_sec = std::max(out.events.back().end_sec,
                                           ev.end_sec);
    } else {
      out.events.push_back(ev);
    }
  }
  return out;
}

}  // namespace

EventList spindle_rules(const EventList& events) {
  validate_events(events, "spindle_rules");
  EventList out = merge_close(events, kMergeGapSec);
  EventList kept;
  // Sub-nanosecond slack so a cropped event (duration 3 s up to rounding)
  // is not cropped again on a second pass.
  constexpr double kUlpSlack = 1e-9;
  for (const Interval& ev : out.events) {
    const double dur = ev.duration();
    if (dur < kMinDurationSec) continue;
    if (dur > kMaxDurationSec) continue;
    if (dur > kCropDurationSec + kUlpSlack) {
      const double center = 0.5 * (ev.start_sec + ev.end_sec);
      kept.events.push_back({center - kCropDurationSec / 2.0,
                             center + kCropDurationSec / 2.0});
    } else {
      kept.events.push_back(ev);
    }
  }
  return kept;
}

EventList kcomplex_rules(const EventList& events, const Signal& raw_signal) {
  validate_events(events, "kcomplex_rules");
  validate_signal(raw_signal, "kcomplex_rules signal");
  const double fs = raw_signal.fs;
  const int64_t n = static_cast<int64_t>(raw_signal.samples.size());
  const sigio::Sos lowpass = sigio::butterworth_lowpass(3, kLowpassHz, fs);

  EventList out;
  for (const Interval& ev : events.events) {
    if (ev.duration() < kMinDurationSec) continue;
    if (ev.start_sec < -0.5 / fs || ev.end_sec > raw_signal.duration() + 0.5 / fs) {
      throw Error("kcomplex_rules: event outside the signal");
    }

    const int64_t ev_lo = std::max<int64_t>(0, std::llround(ev.start_sec * fs));
    const int64_t ev_hi = std::min<int64_t>(n, std::llround(ev.end_sec * fs));
    const int64_t ctx = std::llround(kFilterContextSec * fs);
    const int64_t lo = std::max<int64_t>(0, ev_lo - ctx);
    const int64_t hi = std::min<int64_t>(n, ev_hi + ctx);

    // Low-pass over the event plus context, then restrict to the event.
    std::vector<double> chunk(raw_signal.samples.begin() + lo,
                              raw_signal.samples.begin() + hi);
    chunk = sigio::filtfilt(lowpass, chunk);
    const int64_t off = ev_lo - lo;
    const int64_t len = ev_hi - ev_lo;

    // Negative peaks: strict local minima with negative value, away from
    // the event borders.
    std::vector<int64_t> peaks;
    for (int64_t k = 1; k + 1 < len; ++k) {
      const double v = chunk[off + k];
      if (v >= 0.0) continue;
      if (!(v < chunk[off + k - 1] && v < chunk[off + k + 1])) continue;
      const double t = (ev_lo + k) / fs;
      if (t < ev.start_sec + kStartGuardSec) continue;
      if (t > ev.end_sec - kEndGuardSec) continue;
      peaks.push_back(k);
    }

    // Merge peaks without a zero-crossing in between (each cluster is one
    // K-complex candidate); the representative is the average position.
    std::vector<double> reps;
    size_t c = 0;
    while (c < peaks.size()) {
      size_t last = c;
      double pos_sum = static_cast<double>(peaks[c]);
      while (last + 1 < peaks.size()) {
        bool crossing = false;
        for (int64_t k = peaks[last]; k < peaks[last + 1]; ++k) {
          if ((chunk[off + k] < 0.0) != (chunk[off + k + 1] < 0.0)) {
            crossing = true;
            break;
          }
        }
        if (crossing) break;
        ++last;
        pos_sum += static_cast<double>(peaks[last]);
      }
      reps.push_back((ev_lo + pos_sum / static_cast<double>(last - c + 1)) /
                     fs);
      c = last + 1;
    }

    if (reps.size() <= 1) {
      out.events.push_back(ev);
      continue;
    }
    double start = ev.start_sec;
    for (size_t r = 0; r + 1 < reps.size(); ++r) {
      const double mid = 0.5 * (reps[r] + reps[r + 1]);
      out.events.push_back({start, mid});
      start = mid;
    }
    out.events.push_back({start, ev.end_sec});
  }
  return out;
}

EventList apply(const std::string& event_type, const EventList& events,
                const Signal& raw_signal) {
  if (event_type == "spindle") return spindle_rules(events);
  if (event_type == "kcomplex") return kcomplex_rules(events, raw_signal);
  throw Error("unknown event type '" + event_type +
              "' (expected spindle|kcomplex)");
}

}  // namespace red::postproc
