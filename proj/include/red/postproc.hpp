#pragma once

#include <string>

#include "red/types.hpp"

// Event-specific postprocessing of detections.
namespace red::postproc {

// Spindle rules, applied in order: merge gaps under 0.3 s, drop events
// shorter than 0.3 s, drop events longer than 5 s, crop events in (3, 5] s
// to their central 3 s. Output durations all lie in [0.3, 3] s; the chain
// is idempotent.
EventList spindle_rules(const EventList& events);

// K-complex rules: drop events shorter than 0.3 s, then split events that
// hold more than one K-complex. Candidates are negative peaks of the 4 Hz
// low-passed signal inside the event (ignoring peaks within 0.05 s of the
// start or 0.2 s of the end); peak clusters without an intervening
// zero-crossing are averaged to one representative; events with several
// representatives are split at the midpoints between them.
EventList kcomplex_rules(const EventList& events, const Signal& raw_signal);

// Dispatch by event type name ("spindle" | "kcomplex").
EventList apply(const std::string& event_type, const EventList& events,
                const Signal& raw_signal);

}  // namespace red::postproc
