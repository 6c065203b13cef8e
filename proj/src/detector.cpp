#include "red/detector.hpp"

#include <algorithm>
#include <cmath>

#include "red/layers.hpp"
#include "red/postproc.hpp"

namespace red::detect {

namespace {

void check_segment_len(int t_segment) {
  if (t_segment <= 0 || t_segment % 16 != 0) {
    throw Error("stitch: segment length must be a positive multiple of 16 "
                "(stride T/2 must align with the coarse grid), got " +
                std::to_string(t_segment));
  }
}

}  // namespace

std::vector<int64_t> stitch_offsets(int64_t n_samples, int t_segment) {
  check_segment_len(t_segment);
  if (n_samples < t_segment) {
    throw Error("stitch: recording of " + std::to_string(n_samples) +
                " samples is shorter than one segment of " +
                std::to_string(t_segment));
  }
  const int64_t n_coarse = n_samples / 8;
  const int64_t seg_coarse = t_segment / 8;
  std::vector<int64_t> offsets;
  for (int64_t c = 0; c + seg_coarse <= n_coarse; c += seg_coarse / 2) {
    offsets.push_back(c * 8);
  }
  if (offsets.back() / 8 + seg_coarse < n_coarse) {
    offsets.push_back((n_coarse - seg_coarse) * 8);
  }
  return offsets;
}

ProbSeq stitch_predictions(
    int64_t n_samples, int t_segment,
    const std::function<ProbSeq(int64_t)>& predict_fn) {
  const std::vector<int64_t> offsets = stitch_offsets(n_samples, t_segment);
  const int64_t n_coarse = n_samples / 8;
  const int64_t seg_coarse = t_segment / 8;

  ProbSeq out(static_cast<size_t>(n_coarse), 0.0);
  for (size_t k = 0; k < offsets.size(); ++k) {
    const ProbSeq seg = predict_fn(offsets[k]);
    if (static_cast<int64_t>(seg.size()) != seg_coarse) {
      throw Error("stitch: segment prediction of " +
                  std::to_string(seg.size()) + " steps, expected " +
                  std::to_string(seg_coarse));
    }
    const int64_t c = offsets[k] / 8;
    const int64_t lo = (k == 0) ? 0 : seg_coarse / 4;
    const int64_t hi = (k + 1 == offsets.size()) ? seg_coarse
                                                 : 3 * seg_coarse / 4;
    for (int64_t i = lo; i < hi; ++i) {
      out[static_cast<size_t>(c + i)] = seg[static_cast<size_t>(i)];
    }
  }
  return out;
}

ProbSeq predict_recording(model::Network& net, const Signal& input) {
  validate_signal(input, "predict_recording input");
  const model::ModelConfig& cfg = net.config();
  if (std::fabs(input.fs - cfg.fs) > 1e-9) {
    throw Error("predict_recording: signal at " + std::to_string(input.fs) +
                " Hz, model expects " + std::to_string(cfg.fs));
  }
  const int64_t n = static_cast<int64_t>(input.samples.size());
  const int t_seg = cfg.t_samples;
  const int border = cfg.variant == model::Variant::cwt ? cfg.border : 0;
  const int input_len = t_seg + 2 * border;

  const std::vector<int64_t> offsets = stitch_offsets(n, t_seg);
  const int seg_coarse = t_seg / 8;
  std::vector<ProbSeq> seg_probs(offsets.size());

  constexpr size_t kChunk = 8;
  ad::NoGradGuard guard;
  for (size_t k0 = 0; k0 < offsets.size(); k0 += kChunk) {
    const int rows =
        static_cast<int>(std::min(kChunk, offsets.size() - k0));
    ad::Tensor seg = ad::Tensor::zeros({rows, input_len, 1});
    for (int r = 0; r < rows; ++r) {
      const int64_t start = offsets[k0 + static_cast<size_t>(r)];
      double* dst = seg.data() + static_cast<size_t>(r) * input_len;
      for (int i = 0; i < input_len; ++i) {
        const int64_t src = start - border + i;
        dst[i] = (src >= 0 && src < n)
                     ? input.samples[static_cast<size_t>(src)]
                     : 0.0;
      }
    }
    const ad::Tensor probs = net.forward(seg, ad::Mode::infer);
    for (int r = 0; r < rows; ++r) {
      ProbSeq p(static_cast<size_t>(seg_coarse));
      const double* row =
          probs.data() + static_cast<size_t>(r) * seg_coarse * 2;
      for (int i = 0; i < seg_coarse; ++i) p[static_cast<size_t>(i)] = row[2 * i + 1];
      seg_probs[k0 + static_cast<size_t>(r)] = std::move(p);
    }
  }

  size_t next = 0;
  return stitch_predictions(n, t_seg, [&](int64_t offset) {
    (void)offset;
    return seg_probs[next++];
  });
}

ProbSeq upsample_probs(const ProbSeq& coarse, int factor) {
  if (coarse.size() < 2) {
    throw Error("upsample_probs: need at least 2 values");
  }
  if (factor < 1) throw Error("upsample_probs: factor must be >= 1");
  const size_t n_out = coarse.size() * static_cast<size_t>(factor);
  ProbSeq out(n_out);
  const double scale = static_cast<double>(coarse.size() - 1) /
                       static_cast<double>(n_out - 1);
  for (size_t j = 0; j < n_out; ++j) {
    const double pos = static_cast<double>(j) * scale;
    const size_t i0 = std::min(static_cast<size_t>(pos), coarse.size() - 2);
    const double frac = pos - static_cast<double>(i0);
    out[j] = coarse[i0] * (1.0 - frac) + coarse[i0 + 1] * frac;
  }
  return out;
}

EventList threshold_events(const ProbSeq& per_sample_probs, double mu,
                           double fs) {
  if (!(mu > 0.0 && mu < 1.0)) {
    throw Error("threshold_events: mu must lie in (0, 1), got " +
                std::to_string(mu));
  }
  if (!(fs > 0.0)) throw Error("threshold_events: fs must be positive");
  EventList events;
  const size_t n = per_sample_probs.size();
  size_t i = 0;
  while (i < n) {
    if (per_sample_probs[i] > mu) {
      size_t j = i;
      while (j + 1 < n && per_sample_probs[j + 1] > mu) ++j;
      events.events.push_back({static_cast<double>(i) / fs,
                               static_cast<double>(j + 1) / fs});
      i = j + 1;
    } else {
      ++i;
    }
  }
  return events;
}

EventList detect_events(model::Network& net, const pipeline::Prepared& rec,
                        double mu, const std::string& event_type) {
  const ProbSeq coarse = predict_recording(net, rec.rec.signal);
  const ProbSeq per_sample = upsample_probs(coarse, 8);
  const EventList raw = threshold_events(per_sample, mu, rec.rec.signal.fs);
  return postproc::apply(event_type, raw, rec.physical);
}

TuneResult tune_threshold_probs(const std::vector<ProbSeq>& per_sample,
                                const std::vector<const Signal*>& physical,
                                const std::vector<const EventList*>& truths,
                                const std::string& event_type,
                                const eval::EvalConfig& config) {
  if (per_sample.empty() || per_sample.size() != physical.size() ||
      per_sample.size() != truths.size()) {
    throw Error("tune_threshold: need matching probs/signal/truth lists");
  }
  const double step = config.tune_step;
  if (!(step > 0.0 && step < 1.0)) {
    throw Error("tune_threshold: bad grid step");
  }
  const std::vector<double> grid_taus =
      config.af1_grid.empty() ? eval::EvalConfig::defaults().af1_grid
                              : config.af1_grid;

  TuneResult result;
  const int n_mu = static_cast<int>(std::llround(1.0 / step)) - 1;
  double best_score = -1.0;
  for (int k = 1; k <= n_mu; ++k) {
    const double mu = step * k;
    double score = 0.0;
    for (size_t r = 0; r < per_sample.size(); ++r) {
      const EventList raw = threshold_events(per_sample[r], mu, physical[r]->fs);
      const EventList events =
          postproc::apply(event_type, raw, *physical[r]);
      score += eval::af1_curve(*truths[r], events, grid_taus).af1;
    }
    score /= static_cast<double>(per_sample.size());
    result.grid.push_back({mu, score});
    const bool better =
        score > best_score ||
        (score == best_score &&
         std::fabs(mu - 0.5) < std::fabs(result.mu - 0.5));
    if (better) {
      best_score = score;
      result.mu = mu;
      result.mean_af1 = score;
    }
  }
  return result;
}

TuneResult tune_threshold(model::Network& net,
                          const std::vector<pipeline::Prepared>& recordings,
                          const std::string& event_type,
                          const eval::EvalConfig& config) {
  if (recordings.empty()) {
    throw Error("tune_threshold: need at least one annotated recording");
  }
  // Predict once per recording, then sweep the threshold grid.
  std::vector<ProbSeq> per_sample;
  std::vector<const Signal*> physical;
  std::vector<const EventList*> truths;
  for (const pipeline::Prepared& rec : recordings) {
    const auto it = rec.rec.annotations.find(event_type);
    if (it == rec.rec.annotations.end()) {
      throw Error("tune_threshold: recording '" + rec.rec.id +
                  "' lacks '" + event_type + "' annotations");
    }
    truths.push_back(&it->second);
    physical.push_back(&rec.physical);
    per_sample.push_back(
        upsample_probs(predict_recording(net, rec.rec.signal), 8));
  }
  return tune_threshold_probs(per_sample, physical, truths, event_type,
                              config);
}

}  // namespace red::detect
