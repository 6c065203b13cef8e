#pragma once

#include <functional>
#include <string>
#include <vector>

#include "red/evalkit.hpp"
#include "red/model.hpp"
#include "red/pipeline.hpp"
#include "red/types.hpp"

// Inference over whole recordings: overlap-stitched segment prediction,
// linear probability upsampling, thresholding to events, and the
// output-threshold grid search.
namespace red::detect {

using ProbSeq = std::vector<double>;

// Assembles per-coarse-step class-1 probabilities over floor(n/8) steps.
// Segments start every T/2 samples; each contributes its central half, the
// first and last additionally contribute their outer quarters, and a final
// right-aligned segment covers any tail (later writes win). predict_fn maps
// a sample offset to the T/8 class-1 probabilities of that segment.
ProbSeq stitch_predictions(
    int64_t n_samples, int t_segment,
    const std::function<ProbSeq(int64_t)>& predict_fn);

// Segment offsets used by the stitcher, in samples.
std::vector<int64_t> stitch_offsets(int64_t n_samples, int t_segment);

// Batched infer-mode forward passes over the whole preprocessed recording.
// cwt-variant context beyond the recording bounds is zero-padded.
ProbSeq predict_recording(model::Network& net, const Signal& input);

// Piecewise-linear stretch from L to factor*L points; both endpoints map
// exactly.
ProbSeq upsample_probs(const ProbSeq& coarse, int factor);

// Maximal runs with probability strictly above mu become events.
EventList threshold_events(const ProbSeq& per_sample_probs, double mu,
                           double fs);

// predict -> upsample -> threshold -> event-specific postprocessing.
EventList detect_events(model::Network& net, const pipeline::Prepared& rec,
                        double mu, const std::string& event_type);

struct TunePoint {
  double mu{0.0};
  double mean_af1{0.0};
};

struct TuneResult {
  double mu{0.5};
  double mean_af1{0.0};
  std::vector<TunePoint> grid;
};

// Grid search over mu in {step, 2*step, ...} < 1 maximizing the mean AF1
// after full postprocessing; ties break toward 0.5.
TuneResult tune_threshold(model::Network& net,
                          const std::vector<pipeline::Prepared>& recordings,
                          const std::string& event_type,
                          const eval::EvalConfig& config);

// Same search on precomputed per-sample probability sequences.
TuneResult tune_threshold_probs(const std::vector<ProbSeq>& per_sample,
                                const std::vector<const Signal*>& physical,
                                const std::vector<const EventList*>& truths,
                                const std::string& event_type,
                                const eval::EvalConfig& config);

}  // namespace red::detect
