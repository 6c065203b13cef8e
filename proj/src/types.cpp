#include "red/types.hpp"

#include <cmath>
#include <sstream>

namespace red {

void validate_signal(const Signal& sig, const std::string& context) {
  if (!(sig.fs > 0.0)) {
    throw Error(context + ": sampling rate must be positive, got " +
                std::to_string(sig.fs));
  }
  for (size_t i = 0; i < sig.samples.size(); ++i) {
    if (!std::isfinite(sig.samples[i])) {
      throw Error(context + ": non-finite sample at index " +
                  std::to_string(i));
    }
  }
}

void validate_events(const EventList& list, const std::string& context) {
  for (size_t i = 0; i < list.events.size(); ++i) {
    const Interval& ev = list.events[i];
    if (!(ev.start_sec < ev.end_sec)) {
      std::ostringstream msg;
      msg << context << ": event " << i << " has end <= start (" << ev.start_sec
          << ", " << ev.end_sec << ")";
      throw Error(msg.str());
    }
    if (i > 0 && list.events[i - 1].start_sec > ev.start_sec) {
      throw Error(context + ": events not sorted by start at index " +
                  std::to_string(i));
    }
    if (i > 0 && list.events[i - 1].end_sec > ev.start_sec) {
      throw Error(context + ": events overlap at index " + std::to_string(i));
    }
  }
}

}  // namespace red
