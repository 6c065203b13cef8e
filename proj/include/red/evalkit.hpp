#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "red/types.hpp"

// By-event evaluation: IoU matching between annotations and detections,
// precision/recall/F1 at an IoU threshold, F1-vs-threshold curves with
// their mean (AF1), by-recording averaging, and Welch's t-test.
namespace red::eval {

struct EvalConfig {
  double iou_threshold{0.2};
  std::vector<double> af1_grid;  // defaults to {0.05, 0.10, ..., 0.95}
  double tune_step{0.02};        // output-threshold grid spacing

  static EvalConfig defaults();
};

double iou(const Interval& a, const Interval& b);

struct MatchResult {
  struct Pair {
    int truth_idx{0};
    int pred_idx{0};
    double iou{0.0};
  };
  std::vector<Pair> pairs;  // one-to-one, every pair IoU > 0
  std::vector<int> unmatched_truth;
  std::vector<int> unmatched_pred;
  size_t n_truth{0};
  size_t n_pred{0};

  double total_iou() const;
};

// One-to-one matching maximizing total IoU over pairs with positive IoU.
// Sorted non-overlapping interval lists admit no crossing positive pairs,
// so an LCS-style dynamic program is exact (verified against brute force).
MatchResult match_events(const EventList& truth, const EventList& pred);

struct Metrics {
  int tp{0}, fp{0}, fn{0};
  double recall{0.0}, precision{0.0}, f1{0.0};
};

// TP = matched pairs with IoU >= tau; FN/FP are the rest. Degenerate
// conventions: precision 0 with no predictions, recall 0 with no truth,
// F1 0 when recall + precision is 0.
Metrics metrics(const MatchResult& match, double tau);

struct F1Curve {
  std::vector<double> taus;
  std::vector<double> f1;
  double af1{0.0};  // mean of f1 over the grid
};

// The matching is computed once and re-thresholded per grid value.
F1Curve af1_curve(const EventList& truth, const EventList& pred,
                  const std::vector<double>& tau_grid);

// By-recording averaging: counts are summed for reference, rate metrics are
// unweighted means so every recording counts equally.
Metrics aggregate(const std::vector<Metrics>& per_recording);

struct WelchResult {
  double t{0.0};
  double dof{0.0};
  double p{1.0};  // two-sided
};

WelchResult welch_ttest(const std::vector<double>& a,
                        const std::vector<double>& b);

// Full report for a set of recordings.
struct MetricsReport {
  double iou_threshold{0.2};
  Metrics headline;  // aggregated at iou_threshold
  double af1{0.0};   // mean per-recording AF1
  std::vector<double> tau_grid;
  std::vector<double> f1_curve;  // mean per-recording F1 at each tau
  struct PerRecording {
    std::string id;
    Metrics at_threshold;
    F1Curve curve;
    std::vector<double> pair_ious;  // raw TP-candidate IoUs
  };
  std::vector<PerRecording> recordings;
};

MetricsReport evaluate_set(const std::vector<std::string>& ids,
                           const std::vector<EventList>& truths,
                           const std::vector<EventList>& preds,
                           const EvalConfig& config);

void write_report_json(const std::filesystem::path& path,
                       const MetricsReport& report);
void write_f1_curve_csv(const std::filesystem::path& path,
                        const MetricsReport& report);

}  // namespace red::eval
