#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "red/types.hpp"

// Signal/annotation I/O and the preprocessing chain: zero-phase band-pass,
// band-limited resampling, global-std normalization with clipping.
namespace red::sigio {

// One second-order IIR section, direct form II transposed.
struct Biquad {
  double b0{0}, b1{0}, b2{0};
  double a1{0}, a2{0};
};

using Sos = std::vector<Biquad>;

// Digital Butterworth designs via the bilinear transform with prewarping.
// `order` is the analog prototype order (a band-pass of order n yields 2n
// poles, i.e. n biquad sections).
Sos butterworth_lowpass(int order, double cutoff_hz, double fs);
Sos butterworth_bandpass(int order, double lo_hz, double hi_hz, double fs);

// Forward-backward filtering (zero phase). Uses odd reflection padding and
// steady-state initial conditions so constant inputs settle immediately.
std::vector<double> filtfilt(const Sos& sos, const std::vector<double>& x);

// 0.3-35 Hz style band-pass, 3rd order Butterworth applied forward and
// backward. Same-length output, zero phase distortion.
Signal bandpass(const Signal& signal, double lo_hz, double hi_hz);

// Band-limited resampling with a windowed-sinc kernel. Per-output-sample
// weight normalization keeps constants exact. Identity (bitwise) when
// target_fs == fs.
Signal resample(const Signal& signal, double target_fs);

// Divides by global_std, then clips to [-10, 10].
Signal normalize(const Signal& signal, double global_std);

// Standard deviation over the concatenation of all given signals (the
// "entire non-testing set" statistic used by normalize).
double global_std(const std::vector<const Signal*>& signals);

// --- Files ---------------------------------------------------------------
//
// Signal binary: 16-byte header (magic "REDSIG1\0", fs as little-endian
// float64) followed by little-endian float32 samples. A ".csv" path selects
// the CSV fallback: "# fs=<Hz>" header line, one sample per row.
// Event file: CSV with header "start_sec,end_sec", one event per row,
// 6 decimal places.

void write_signal(const std::filesystem::path& path, const Signal& signal);
Signal read_signal(const std::filesystem::path& path);

void write_events(const std::filesystem::path& path, const EventList& events);
EventList read_events(const std::filesystem::path& path);

// Recording manifest: JSON with the signal path, the epoch list and one
// annotation path per event type. Paths are relative to the manifest.
void write_recording_manifest(const std::filesystem::path& path,
                              const Recording& recording,
                              const std::string& signal_file,
                              const std::map<std::string, std::string>&
                                  annotation_files);
Recording read_recording(const std::filesystem::path& manifest_path);

}  // namespace red::sigio
