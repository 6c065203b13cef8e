#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace red {

// Error thrown by every module for domain failures (bad configs, malformed
// files, contract violations). The CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Half-open-ish time interval in seconds. Used both for annotated/predicted
// events and for analysis epochs.
struct Interval {
  double start_sec{0.0};
  double end_sec{0.0};

  double duration() const { return end_sec - start_sec; }
};

// Uniformly sampled single-channel signal. Microvolts before normalization,
// dimensionless after.
struct Signal {
  std::vector<double> samples;
  double fs{0.0};

  double duration() const { return fs > 0 ? samples.size() / fs : 0.0; }
};

// Sorted list of intervals. Events may touch (end == next start) but never
// overlap, and every event has positive duration.
struct EventList {
  std::vector<Interval> events;

  bool empty() const { return events.empty(); }
  size_t size() const { return events.size(); }
};

// A signal plus its fixed-length analysis epochs and per-event-type
// annotations.
struct Recording {
  std::string id;
  Signal signal;
  std::vector<Interval> epochs;
  std::map<std::string, EventList> annotations;
};

// Throws red::Error if the signal holds non-finite samples or fs <= 0.
void validate_signal(const Signal& sig, const std::string& context);

// Throws red::Error on unsorted, overlapping or non-positive-length events.
// Touching events (end == next start) are accepted.
void validate_events(const EventList& list, const std::string& context);

inline bool contains(const Interval& outer, const Interval& inner) {
  return outer.start_sec <= inner.start_sec && inner.end_sec <= outer.end_sec;
}

}  // namespace red
