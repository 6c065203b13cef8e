#include "red/sigio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace red::sigio {

namespace {

using cplx = std::complex<double>;

// Analog Butterworth prototype: n poles on the left-half unit circle.
std::vector<cplx> prototype_poles(int order) {
  std::vector<cplx> poles;
  poles.reserve(order);
  for (int k = 0; k < order; ++k) {
    const double theta =
        std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
    poles.emplace_back(std::cos(theta), std::sin(theta));
  }
  return poles;
}

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  double gain{1.0};
};

// Bilinear transform with fs2 = 2*fs. Analog zeros at infinity map to -1.
Zpk bilinear(const Zpk& analog, double fs) {
  const double fs2 = 2.0 * fs;
  Zpk digital;
  digital.zeros.reserve(analog.poles.size());
  digital.poles.reserve(analog.poles.size());
  cplx num(1.0, 0.0), den(1.0, 0.0);
  for (const cplx& z : analog.zeros) {
    digital.zeros.push_back((fs2 + z) / (fs2 - z));
    num *= (fs2 - z);
  }
  for (const cplx& p : analog.poles) {
    digital.poles.push_back((fs2 + p) / (fs2 - p));
    den *= (fs2 - p);
  }
  while (digital.zeros.size() < digital.poles.size()) {
    digital.zeros.emplace_back(-1.0, 0.0);
  }
  digital.gain = analog.gain * (num / den).real();
  return digital;
}

// Groups digital poles into biquad sections. Conjugate pairs first (nearest
// the unit circle first), leftover real poles paired together. Zeros are
// drawn per section alternating sign so every section stays well scaled.
Sos zpk_to_sos(const Zpk& zpk) {
  std::vector<cplx> conj_poles;
  std::vector<double> real_poles;
  for (const cplx& p : zpk.poles) {
    if (std::abs(p.imag()) > 1e-12) {
      if (p.imag() > 0) conj_poles.push_back(p);
    } else {
      real_poles.push_back(p.real());
    }
  }
  std::sort(conj_poles.begin(), conj_poles.end(),
            [](const cplx& a, const cplx& b) { return std::abs(a) > std::abs(b); });
  std::sort(real_poles.begin(), real_poles.end(),
            [](double a, double b) { return std::abs(a) > std::abs(b); });

  std::vector<double> zeros_pos, zeros_neg;
  for (const cplx& z : zpk.zeros) {
    (z.real() >= 0 ? zeros_pos : zeros_neg).push_back(z.real());
  }
  auto take_zero_pair = [&](double out[2]) {
    int got = 0;
    if (!zeros_pos.empty()) {
      out[got++] = zeros_pos.back();
      zeros_pos.pop_back();
    }
    if (!zeros_neg.empty()) {
      out[got++] = zeros_neg.back();
      zeros_neg.pop_back();
    }
    while (got < 2 && !zeros_pos.empty()) {
      out[got++] = zeros_pos.back();
      zeros_pos.pop_back();
    }
    return got;
  };

  Sos sos;
  for (const cplx& p : conj_poles) {
    Biquad s;
    s.a1 = -2.0 * p.real();
    s.a2 = std::norm(p);
    double zs[2] = {0, 0};
    const int nz = take_zero_pair(zs);
    if (nz == 2) {
      s.b0 = 1.0;
      s.b1 = -(zs[0] + zs[1]);
      s.b2 = zs[0] * zs[1];
    } else if (nz == 1) {
      s.b0 = 1.0;
      s.b1 = -zs[0];
      s.b2 = 0.0;
    } else {
      s.b0 = 1.0;
    }
    sos.push_back(s);
  }
  for (size_t i = 0; i < real_poles.size(); i += 2) {
    Biquad s;
    if (i + 1 < real_poles.size()) {
      s.a1 = -(real_poles[i] + real_poles[i + 1]);
      s.a2 = real_poles[i] * real_poles[i + 1];
    } else {
      s.a1 = -real_poles[i];
      s.a2 = 0.0;
    }
    double zs[2] = {0, 0};
    const int nz = take_zero_pair(zs);
    if (nz == 2 && i + 1 < real_poles.size()) {
      s.b0 = 1.0;
      s.b1 = -(zs[0] + zs[1]);
      s.b2 = zs[0] * zs[1];
    } else if (nz >= 1) {
      s.b0 = 1.0;
      s.b1 = -zs[0];
      s.b2 = 0.0;
      if (nz == 2) zeros_neg.push_back(zs[1]);  // should not happen
    } else {
      s.b0 = 1.0;
    }
    sos.push_back(s);
  }
  if (!sos.empty()) {
    sos.front().b0 *= zpk.gain;
    sos.front().b1 *= zpk.gain;
    sos.front().b2 *= zpk.gain;
  }
  return sos;
}

// Steady-state filter state for a unit-step input, direct form II transposed.
void step_steady_state(const Biquad& s, double& z1, double& z2) {
  const double dc_gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  z2 = s.b2 - s.a2 * dc_gain;
  z1 = s.b1 - s.a1 * dc_gain + z2;
}

void filter_section_inplace(const Biquad& s, std::vector<double>& x) {
  double z1, z2;
  step_steady_state(s, z1, z2);
  z1 *= x.empty() ? 0.0 : x.front();
  z2 *= x.empty() ? 0.0 : x.front();
  for (double& v : x) {
    const double in = v;
    const double out = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * out + z2;
    z2 = s.b2 * in - s.a2 * out;
    v = out;
  }
}

void sosfilt_inplace(const Sos& sos, std::vector<double>& x) {
  for (const Biquad& s : sos) filter_section_inplace(s, x);
}

std::vector<double> filtfilt_padded(const Sos& sos,
                                    const std::vector<double>& x,
                                    size_t pad) {
  const size_t n = x.size();
  if (n == 0) return {};
  pad = std::min(pad, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  sosfilt_inplace(sos, ext);
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(sos, ext);
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + pad, ext.begin() + pad + n);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr char kSignalMagic[8] = {'R', 'E', 'D', 'S', 'I', 'G', '1', '\0'};

}  // namespace

Sos butterworth_lowpass(int order, double cutoff_hz, double fs) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0)) {
    throw Error("low-pass cutoff must lie in (0, fs/2), got " +
                std::to_string(cutoff_hz) + " Hz at fs " + std::to_string(fs));
  }
  const double warped =
      2.0 * fs * std::tan(std::numbers::pi * cutoff_hz / fs);
  Zpk analog;
  analog.poles = prototype_poles(order);
  double gain = 1.0;
  for (cplx& p : analog.poles) {
    p *= warped;
    gain *= warped;
  }
  analog.gain = gain;
  return zpk_to_sos(bilinear(analog, fs));
}

Sos butterworth_bandpass(int order, double lo_hz, double hi_hz, double fs) {
  if (!(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < fs / 2.0)) {
    std::ostringstream msg;
    msg << "band-pass corners must satisfy 0 < lo < hi < fs/2, got lo="
        << lo_hz << " hi=" << hi_hz << " fs=" << fs;
    throw Error(msg.str());
  }
  const double w1 = 2.0 * fs * std::tan(std::numbers::pi * lo_hz / fs);
  const double w2 = 2.0 * fs * std::tan(std::numbers::pi * hi_hz / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  Zpk analog;
  for (const cplx& p : prototype_poles(order)) {
    const cplx pb = p * (bw / 2.0);
    const cplx d = std::sqrt(pb * pb - w0 * w0);
    analog.poles.push_back(pb + d);
    analog.poles.push_back(pb - d);
  }
  analog.zeros.assign(order, cplx(0.0, 0.0));
  analog.gain = std::pow(bw, order);
  return zpk_to_sos(bilinear(analog, fs));
}

std::vector<double> filtfilt(const Sos& sos, const std::vector<double>& x) {
  return filtfilt_padded(sos, x, 3 * (2 * sos.size() + 1));
}

Signal bandpass(const Signal& signal, double lo_hz, double hi_hz) {
  validate_signal(signal, "bandpass input");
  if (!(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < signal.fs / 2.0)) {
    std::ostringstream msg;
    msg << "invalid band [" << lo_hz << ", " << hi_hz << "] Hz for fs "
        << signal.fs;
    throw Error(msg.str());
  }
  const Sos sos = butterworth_bandpass(3, lo_hz, hi_hz, signal.fs);
  // One period of the low corner of reflection padding keeps edge
  // transients of the slowest pole out of the signal.
  const size_t pad = static_cast<size_t>(std::ceil(signal.fs / lo_hz));
  Signal out;
  out.fs = signal.fs;
  out.samples = filtfilt_padded(sos, signal.samples, pad);
  return out;
}

Signal resample(const Signal& signal, double target_fs) {
  validate_signal(signal, "resample input");
  if (!(target_fs > 0.0)) {
    throw Error("resample target rate must be positive, got " +
                std::to_string(target_fs));
  }
  if (target_fs == signal.fs) return signal;

  const size_t n_in = signal.samples.size();
  Signal out;
  out.fs = target_fs;
  if (n_in == 0) return out;

  const double step = signal.fs / target_fs;  // input samples per output
  const size_t n_out = static_cast<size_t>(
      std::llround(static_cast<double>(n_in) * target_fs / signal.fs));
  out.samples.resize(n_out);

  // Cutoff in cycles per input sample, kept below the narrower Nyquist.
  const double fc = 0.45 * std::min(1.0, target_fs / signal.fs);
  const double half_width = 8.0 / fc;  // 16 sinc lobes
  const int h = static_cast<int>(std::ceil(half_width));

  for (size_t m = 0; m < n_out; ++m) {
    const double center = static_cast<double>(m) * step;
    const int k_lo = static_cast<int>(std::floor(center)) - h;
    const int k_hi = static_cast<int>(std::floor(center)) + h + 1;
    double acc = 0.0, wsum = 0.0;
    for (int k = k_lo; k <= k_hi; ++k) {
      const double d = static_cast<double>(k) - center;
      const double u = d / half_width;
      if (u <= -1.0 || u >= 1.0) continue;
      const double arg = 2.0 * std::numbers::pi * fc * d;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double window = 0.42 + 0.5 * std::cos(std::numbers::pi * u) +
                            0.08 * std::cos(2.0 * std::numbers::pi * u);
      const double w = sinc * window;
      const int idx = std::clamp(k, 0, static_cast<int>(n_in) - 1);
      acc += signal.samples[idx] * w;
      wsum += w;
    }
    out.samples[m] = acc / wsum;
  }
  return out;
}

Signal normalize(const Signal& signal, double global_std) {
  validate_signal(signal, "normalize input");
  if (!(global_std > 0.0)) {
    throw Error("normalize requires a positive global std, got " +
                std::to_string(global_std));
  }
  Signal out;
  out.fs = signal.fs;
  out.samples.resize(signal.samples.size());
  for (size_t i = 0; i < signal.samples.size(); ++i) {
    out.samples[i] = std::clamp(signal.samples[i] / global_std, -10.0, 10.0);
  }
  return out;
}

double global_std(const std::vector<const Signal*>& signals) {
  size_t n = 0;
  double mean = 0.0;
  for (const Signal* s : signals) {
    for (double v : s->samples) {
      mean += v;
      ++n;
    }
  }
  if (n < 2) throw Error("global_std needs at least two samples");
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const Signal* s : signals) {
    for (double v : s->samples) ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / static_cast<double>(n));
}

void write_signal(const std::filesystem::path& path, const Signal& signal) {
  validate_signal(signal, "write_signal " + path.string());
  if (path.extension() == ".csv") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    char line[64];
    std::snprintf(line, sizeof(line), "# fs=%.17g\n", signal.fs);
    out << line;
    for (double v : signal.samples) {
      std::snprintf(line, sizeof(line), "%.17g\n", v);
      out << line;
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kSignalMagic, 8);
  out.write(reinterpret_cast<const char*>(&signal.fs), 8);
  std::vector<float> buf(signal.samples.begin(), signal.samples.end());
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Signal read_signal(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::istringstream in(read_text_file(path));
    std::string line;
    size_t line_no = 0;
    Signal sig;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line.rfind("# fs=", 0) == 0) {
        sig.fs = std::strtod(line.c_str() + 5, nullptr);
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(line.c_str(), &end);
      if (end == line.c_str()) {
        throw Error(path.string() + ":" + std::to_string(line_no) +
                    ": not a number: '" + line + "'");
      }
      sig.samples.push_back(v);
    }
    validate_signal(sig, "read_signal " + path.string());
    return sig;
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kSignalMagic, 8) != 0) {
    throw Error(path.string() + ": not a signal file (bad magic)");
  }
  Signal sig;
  in.read(reinterpret_cast<char*>(&sig.fs), 8);
  if (in.gcount() != 8) throw Error(path.string() + ": truncated header");
  std::vector<char> rest((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  if (rest.size() % sizeof(float) != 0) {
    throw Error(path.string() + ": sample payload not a multiple of 4 bytes");
  }
  const size_t n = rest.size() / sizeof(float);
  sig.samples.resize(n);
  const float* f = reinterpret_cast<const float*>(rest.data());
  for (size_t i = 0; i < n; ++i) sig.samples[i] = f[i];
  validate_signal(sig, "read_signal " + path.string());
  return sig;
}

void write_events(const std::filesystem::path& path, const EventList& events) {
  validate_events(events, "write_events " + path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "start_sec,end_sec\n";
  char line[80];
  for (const Interval& ev : events.events) {
    std::snprintf(line, sizeof(line), "%.6f,%.6f\n", ev.start_sec, ev.end_sec);
    out << line;
  }
}

EventList read_events(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  size_t line_no = 0;
  EventList list;
  auto fail = [&](const std::string& what) {
    throw Error(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "start_sec,end_sec") fail("expected header start_sec,end_sec");
      continue;
    }
    const size_t comma = line.find(',');
    if (comma == std::string::npos) fail("expected two comma-separated values");
    char* end = nullptr;
    const double start = std::strtod(line.c_str(), &end);
    if (end != line.c_str() + comma) fail("bad start value");
    const double stop = std::strtod(line.c_str() + comma + 1, &end);
    if (*end != '\0') fail("bad end value");
    if (!(start < stop)) fail("event end must exceed start");
    if (!list.events.empty()) {
      if (list.events.back().start_sec > start) fail("events not sorted");
      if (list.events.back().end_sec > start) fail("events overlap");
    }
    list.events.push_back({start, stop});
  }
  return list;
}

void write_recording_manifest(
    const std::filesystem::path& path, const Recording& recording,
    const std::string& signal_file,
    const std::map<std::string, std::string>& annotation_files) {
  nlohmann::json j;
  j["id"] = recording.id;
  j["signal"] = signal_file;
  j["fs"] = recording.signal.fs;
  nlohmann::json epochs = nlohmann::json::array();
  for (const Interval& e : recording.epochs) {
    epochs.push_back({e.start_sec, e.end_sec});
  }
  j["epochs"] = epochs;
  nlohmann::json ann = nlohmann::json::object();
  for (const auto& [type, file] : annotation_files) ann[type] = file;
  j["annotations"] = ann;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

Recording read_recording(const std::filesystem::path& manifest_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(manifest_path.string() + ": " + e.what());
  }
  const auto dir = manifest_path.parent_path();
  Recording rec;
  try {
    rec.id = j.at("id").get<std::string>();
    rec.signal = read_signal(dir / j.at("signal").get<std::string>());
    for (const auto& e : j.at("epochs")) {
      rec.epochs.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    }
    for (const auto& [type, file] : j.at("annotations").items()) {
      rec.annotations[type] = read_events(dir / file.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(manifest_path.string() + ": " + e.what());
  }
  const double dur = rec.signal.duration();
  const double eps = 0.5 / rec.signal.fs;
  for (const Interval& e : rec.epochs) {
    if (e.start_sec < -eps || e.end_sec > dur + eps) {
      throw Error(manifest_path.string() + ": epoch outside the signal");
    }
  }
  for (const auto& [type, list] : rec.annotations) {
    validate_events(list, manifest_path.string() + " " + type);
    for (const Interval& e : list.events) {
      if (e.start_sec < -eps || e.end_sec > dur + eps) {
        throw Error(manifest_path.string() + ": " + type +
                    " annotation outside the signal");
      }
    }
  }
  return rec;
}

}  // namespace red::sigio
