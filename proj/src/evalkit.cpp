#include "red/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace red::eval {

EvalConfig EvalConfig::defaults() {
  EvalConfig cfg;
  for (int i = 1; i <= 19; ++i) cfg.af1_grid.push_back(0.05 * i);
  return cfg;
}

double iou(const Interval& a, const Interval& b) {
  const double inter =
      std::min(a.end_sec, b.end_sec) - std::max(a.start_sec, b.start_sec);
  if (inter <= 0.0) return 0.0;
  const double uni =
      std::max(a.end_sec, b.end_sec) - std::min(a.start_sec, b.start_sec);
  return inter / uni;
}

double MatchResult::total_iou() const {
  double total = 0.0;
  for (const Pair& p : pairs) total += p.iou;
  return total;
}

MatchResult match_events(const EventList& truth, const EventList& pred) {
  validate_events(truth, "match_events truth");
  validate_events(pred, "match_events pred");
  const int n = static_cast<int>(truth.size());
  const int m = static_cast<int>(pred.size());

  MatchResult result;
  result.n_truth = truth.size();
  result.n_pred = pred.size();

  // dp[i][j]: best total IoU using the first i truth and j predicted events.
  std::vector<double> dp(static_cast<size_t>(n + 1) * (m + 1), 0.0);
  auto at = [m](int i, int j) -> size_t {
    return static_cast<size_t>(i) * (m + 1) + j;
  };
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      double best = std::max(dp[at(i - 1, j)], dp[at(i, j - 1)]);
      const double w = iou(truth.events[i - 1], pred.events[j - 1]);
      if (w > 0.0) best = std::max(best, dp[at(i - 1, j - 1)] + w);
      dp[at(i, j)] = best;
    }
  }

  std::vector<int> truth_match(n, -1), pred_match(m, -1);
  int i = n, j = m;
  while (i > 0 && j > 0) {
    if (dp[at(i, j)] == dp[at(i - 1, j)]) {
      --i;
    } else if (dp[at(i, j)] == dp[at(i, j - 1)]) {
      --j;
    } else {
      truth_match[i - 1] = j - 1;
      pred_match[j - 1] = i - 1;
      --i;
      --j;
    }
  }
  for (int ti = 0; ti < n; ++ti) {
    if (truth_match[ti] >= 0) {
      result.pairs.push_back(
          {ti, truth_match[ti],
           iou(truth.events[ti], pred.events[truth_match[ti]])});
    } else {
      result.unmatched_truth.push_back(ti);
    }
  }
  for (int pj = 0; pj < m; ++pj) {
    if (pred_match[pj] < 0) result.unmatched_pred.push_back(pj);
  }
  return result;
}

Metrics metrics(const MatchResult& match, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error("metrics: IoU threshold must lie in [0, 1], got " +
                std::to_string(tau));
  }
  Metrics m;
  for (const auto& pair : match.pairs) {
    if (pair.iou >= tau) ++m.tp;
  }
  m.fn = static_cast<int>(match.n_truth) - m.tp;
  m.fp = static_cast<int>(match.n_pred) - m.tp;
  m.recall = match.n_truth == 0
                 ? 0.0
                 : static_cast<double>(m.tp) / static_cast<double>(match.n_truth);
  m.precision = match.n_pred == 0
                    ? 0.0
                    : static_cast<double>(m.tp) / static_cast<double>(match.n_pred);
  m.f1 = (m.recall + m.precision) == 0.0
             ? 0.0
             : 2.0 * m.recall * m.precision / (m.recall + m.precision);
  return m;
}

F1Curve af1_curve(const EventList& truth, const EventList& pred,
                  const std::vector<double>& tau_grid) {
  if (tau_grid.empty()) throw Error("af1: empty threshold grid");
  for (size_t i = 0; i < tau_grid.size(); ++i) {
    if (tau_grid[i] < 0.0 || tau_grid[i] > 1.0 ||
        (i > 0 && tau_grid[i] <= tau_grid[i - 1])) {
      throw Error("af1: grid must be increasing within [0, 1]");
    }
  }
  const MatchResult match = match_events(truth, pred);
  F1Curve curve;
  curve.taus = tau_grid;
  curve.f1.reserve(tau_grid.size());
  double total = 0.0;
  for (double tau : tau_grid) {
    const double f1 = metrics(match, tau).f1;
    curve.f1.push_back(f1);
    total += f1;
  }
  curve.af1 = total / static_cast<double>(tau_grid.size());
  return curve;
}

Metrics aggregate(const std::vector<Metrics>& per_recording) {
  if (per_recording.empty()) throw Error("aggregate: no recordings");
  Metrics out;
  for (const Metrics& m : per_recording) {
    out.tp += m.tp;
    out.fp += m.fp;
    out.fn += m.fn;
    out.recall += m.recall;
    out.precision += m.precision;
    out.f1 += m.f1;
  }
  const double n = static_cast<double>(per_recording.size());
  out.recall /= n;
  out.precision /= n;
  out.f1 /= n;
  return out;
}

namespace {

// Regularized incomplete beta via Lentz's continued fraction.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log(1.0 - x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * betacf(a, b, x) / a;
  }
  return 1.0 - std::exp(ln_front) * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

WelchResult welch_ttest(const std::vector<double>& a,
                        const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error("welch_ttest: each sample set needs at least 2 values");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double ma = 0.0, mb = 0.0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= na;
  mb /= nb;
  double va = 0.0, vb = 0.0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= (na - 1.0);
  vb /= (nb - 1.0);
  const double sa = va / na, sb = vb / nb;
  if (sa + sb <= 0.0) {
    throw Error("welch_ttest: degenerate (zero) variance in both samples");
  }
  WelchResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.dof = (sa + sb) * (sa + sb) /
          (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  // Two-sided p from the t distribution via the incomplete beta identity.
  r.p = reg_inc_beta(r.dof / 2.0, 0.5, r.dof / (r.dof + r.t * r.t));
  return r;
}

MetricsReport evaluate_set(const std::vector<std::string>& ids,
                           const std::vector<EventList>& truths,
                           const std::vector<EventList>& preds,
                           const EvalConfig& config) {
  if (ids.size() != truths.size() || ids.size() != preds.size() ||
      ids.empty()) {
    throw Error("evaluate_set: need matching, non-empty id/truth/pred lists");
  }
  const std::vector<double> grid =
      config.af1_grid.empty() ? EvalConfig::defaults().af1_grid
                              : config.af1_grid;
  MetricsReport report;
  report.iou_threshold = config.iou_threshold;
  report.tau_grid = grid;
  report.f1_curve.assign(grid.size(), 0.0);

  std::vector<Metrics> headline;
  double af1_sum = 0.0;
  for (size_t r = 0; r < ids.size(); ++r) {
    MetricsReport::PerRecording pr;
    pr.id = ids[r];
    const MatchResult match = match_events(truths[r], preds[r]);
    pr.at_threshold = metrics(match, config.iou_threshold);
    pr.curve = af1_curve(truths[r], preds[r], grid);
    for (const auto& pair : match.pairs) pr.pair_ious.push_back(pair.iou);
    headline.push_back(pr.at_threshold);
    af1_sum += pr.curve.af1;
    for (size_t k = 0; k < grid.size(); ++k) {
      report.f1_curve[k] += pr.curve.f1[k];
    }
    report.recordings.push_back(std::move(pr));
  }
  for (double& v : report.f1_curve) {
    v /= static_cast<double>(ids.size());
  }
  report.headline = aggregate(headline);
  report.af1 = af1_sum / static_cast<double>(ids.size());
  return report;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
  return {{"tp", m.tp},         {"fp", m.fp},
          {"fn", m.fn},         {"recall", m.recall},
          {"precision", m.precision}, {"f1", m.f1}};
}

}  // namespace

void write_report_json(const std::filesystem::path& path,
                       const MetricsReport& report) {
  nlohmann::json j;
  j["iou_threshold"] = report.iou_threshold;
  j["headline"] = metrics_json(report.headline);
  j["af1"] = report.af1;
  j["tau_grid"] = report.tau_grid;
  j["f1_curve"] = report.f1_curve;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& pr : report.recordings) {
    nlohmann::json r;
    r["id"] = pr.id;
    r["metrics"] = metrics_json(pr.at_threshold);
    r["af1"] = pr.curve.af1;
    r["f1_curve"] = pr.curve.f1;
    r["pair_ious"] = pr.pair_ious;
    recs.push_back(std::move(r));
  }
  j["recordings"] = recs;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_f1_curve_csv(const std::filesystem::path& path,
                        const MetricsReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "iou_threshold,mean_f1\n";
  char line[64];
  for (size_t i = 0; i < report.tau_grid.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.6f,%.6f\n", report.tau_grid[i],
                  report.f1_curve[i]);
    out << line;
  }
}

}  // namespace red::eval
