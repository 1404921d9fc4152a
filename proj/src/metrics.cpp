#include "xraydet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <utility>

#include "xraydet/error.hpp"

namespace xraydet {
namespace {

using PartitionKey = std::pair<std::string, int>;  // (image id, class id)

// Detection indices ordered by descending score, ties by input index.
std::vector<std::size_t> score_order(std::span<const Detection> dets,
                                     const std::vector<std::size_t>& subset) {
  std::vector<std::size_t> order = subset;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

bool same_threshold(double a, double b) { return std::abs(a - b) < 1e-9; }

}  // namespace

MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruth> gts, double iou_thr) {
  if (!(iou_thr > 0.0 && iou_thr < 1.0)) {
    throw std::invalid_argument("iou threshold must lie in (0, 1)");
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (std::isnan(dets[i].score)) {
      throw DataError("detection " + std::to_string(i) + " has a NaN score");
    }
  }

  std::map<PartitionKey, std::vector<std::size_t>> gt_parts;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_parts[{gts[g].image_id, gts[g].class_id}].push_back(g);
  }

  MatchResult result;
  result.is_tp.assign(dets.size(), false);
  result.matched_gt.assign(dets.size(), -1);
  std::vector<bool> gt_used(gts.size(), false);

  for (std::size_t d : score_order(dets, iota_indices(dets.size()))) {
    auto it = gt_parts.find({dets[d].image_id, dets[d].class_id});
    if (it == gt_parts.end()) continue;
    double best_iou = -1.0;
    long best_gt = -1;
    for (std::size_t g : it->second) {
      if (gt_used[g]) continue;
      const double o = iou(dets[d].box, gts[g].box);
      if (o > best_iou) {
        best_iou = o;
        best_gt = static_cast<long>(g);
      }
    }
    if (best_gt >= 0 && best_iou >= iou_thr) {
      gt_used[static_cast<std::size_t>(best_gt)] = true;
      result.is_tp[d] = true;
      result.matched_gt[d] = best_gt;
    }
  }

  result.tp = static_cast<std::size_t>(
      std::count(result.is_tp.begin(), result.is_tp.end(), true));
  result.fp = dets.size() - result.tp;
  result.fn = gts.size() - result.tp;
  return result;
}

PrCurve pr_curve(const std::vector<bool>& tp_flags, std::size_t n_gt,
                 std::span<const double> scores) {
  if (!scores.empty() && scores.size() != tp_flags.size()) {
    throw std::invalid_argument("pr_curve: scores and flags differ in length");
  }
  PrCurve curve;
  curve.n_gt = n_gt;
  if (n_gt == 0) return curve;
  curve.points.reserve(tp_flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    if (tp_flags[i]) ++tp;
    const double n_seen = static_cast<double>(i + 1);
    curve.points.push_back({static_cast<double>(tp) / static_cast<double>(n_gt),
                            static_cast<double>(tp) / n_seen,
                            scores.empty() ? 0.0 : scores[i]});
  }
  return curve;
}

double average_precision(const PrCurve& curve, Interpolation mode) {
  const auto& pts = curve.points;
  if (pts.empty()) return 0.0;

  // envelope[i] = max precision over points at or after i
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }

  if (mode == Interpolation::kPoint101) {
    double sum = 0.0;
    std::size_t j = 0;
    for (int k = 0; k <= 100; ++k) {
      const double r = k / 100.0;
      while (j < pts.size() && pts[j].recall < r) ++j;
      if (j < pts.size()) sum += envelope[j];
    }
    return sum / 101.0;
  }

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].recall > prev_recall) {
      ap += (pts[i].recall - prev_recall) * envelope[i];
      prev_recall = pts[i].recall;
    }
  }
  return ap;
}

double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

double fps(std::size_t n_images, double total_seconds) {
  if (!(total_seconds > 0.0)) {
    throw std::invalid_argument("fps: total time must be positive");
  }
  return static_cast<double>(n_images) / total_seconds;
}

FpsReport make_fps_report(std::size_t n_images, double total_seconds) {
  return {n_images, total_seconds, fps(n_images, total_seconds)};
}

namespace {

struct ClassData {
  std::vector<std::size_t> det_indices;  // ascending input order
  std::size_t n_gt = 0;
};

std::map<int, ClassData> partition_by_class(std::span<const Detection> dets,
                                            std::span<const GroundTruth> gts) {
  std::map<int, ClassData> classes;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    classes[dets[i].class_id].det_indices.push_back(i);
  }
  for (const GroundTruth& g : gts) ++classes[g.class_id].n_gt;
  return classes;
}

PrCurve class_curve(std::span<const Detection> dets, const ClassData& data,
                    const MatchResult& match) {
  const auto order = score_order(dets, data.det_indices);
  std::vector<bool> flags(order.size());
  std::vector<double> scores(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    flags[i] = match.is_tp[order[i]];
    scores[i] = dets[order[i]].score;
  }
  return pr_curve(flags, data.n_gt, scores);
}

}  // namespace

F1Curve f1_confidence_curve(std::span<const Detection> dets,
                            std::span<const GroundTruth> gts, double iou_thr) {
  const MatchResult match = match_detections(dets, gts, iou_thr);
  const auto classes = partition_by_class(dets, gts);

  F1Curve curve;
  // Per class: all scores and true-positive scores, each ascending.
  std::vector<std::vector<double>> all_scores;
  std::vector<std::vector<double>> tp_scores;
  std::vector<std::size_t> n_gt;
  for (const auto& [cls, data] : classes) {
    curve.class_ids.push_back(cls);
    auto& all = all_scores.emplace_back();
    auto& tps = tp_scores.emplace_back();
    for (std::size_t i : data.det_indices) {
      all.push_back(dets[i].score);
      if (match.is_tp[i]) tps.push_back(dets[i].score);
    }
    std::sort(all.begin(), all.end());
    std::sort(tps.begin(), tps.end());
    n_gt.push_back(data.n_gt);
  }

  auto count_at_least = [](const std::vector<double>& sorted, double cut) {
    return static_cast<std::size_t>(
        sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), cut));
  };

  curve.samples.reserve(kF1CurveCuts);
  double best_mean = -1.0;
  for (std::size_t k = 0; k < kF1CurveCuts; ++k) {
    F1Sample sample;
    sample.confidence = static_cast<double>(k) / static_cast<double>(kF1CurveCuts);
    double sum = 0.0;
    for (std::size_t c = 0; c < curve.class_ids.size(); ++c) {
      const std::size_t n_det = count_at_least(all_scores[c], sample.confidence);
      const std::size_t n_tp = count_at_least(tp_scores[c], sample.confidence);
      const double p = n_det == 0 ? 0.0 : double(n_tp) / double(n_det);
      const double r = n_gt[c] == 0 ? 0.0 : double(n_tp) / double(n_gt[c]);
      const double f1 = f_beta(p, r, 1.0);
      sample.per_class.push_back(f1);
      sum += f1;
    }
    sample.mean = curve.class_ids.empty()
                      ? 0.0
                      : sum / static_cast<double>(curve.class_ids.size());
    if (sample.mean > best_mean) {
      best_mean = sample.mean;
      curve.best_index = k;
    }
    curve.samples.push_back(std::move(sample));
  }
  return curve;
}

std::vector<double> threshold_range(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) {
    throw std::invalid_argument("threshold range requires LO <= HI and STEP > 0");
  }
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long k = 0; k < n; ++k) {
    out.push_back(std::round((lo + static_cast<double>(k) * step) * 1e10) / 1e10);
  }
  return out;
}

EvalReport map_over_range(std::span<const Detection> dets,
                          std::span<const GroundTruth> gts,
                          std::span<const double> thresholds,
                          const EvalOptions& options) {
  if (thresholds.empty()) {
    throw std::invalid_argument("at least one IoU threshold is required");
  }
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) {
      throw std::invalid_argument("IoU thresholds must lie in (0, 1)");
    }
  }

  EvalReport report;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  report.interpolation = options.interpolation;
  report.timing = options.timing;

  std::size_t primary = 0;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    if (same_threshold(thresholds[t], 0.5)) {
      primary = t;
      break;
    }
  }
  report.primary_threshold = thresholds[primary];

  const auto classes = partition_by_class(dets, gts);
  for (const auto& [cls, data] : classes) {
    ClassEval ce;
    ce.class_id = cls;
    if (cls >= 0 && static_cast<std::size_t>(cls) < options.class_names.size()) {
      ce.name = options.class_names[static_cast<std::size_t>(cls)];
    } else {
      ce.name = std::to_string(cls);
    }
    ce.n_gt = data.n_gt;
    ce.n_det = data.det_indices.size();
    report.classes.push_back(std::move(ce));
  }

  // Deterministic reduction: thresholds outer, classes in ascending id.
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    const MatchResult match = match_detections(dets, gts, thresholds[t]);
    std::size_t ci = 0;
    for (const auto& [cls, data] : classes) {
      PrCurve curve = class_curve(dets, data, match);
      report.classes[ci].ap.push_back(average_precision(curve, options.interpolation));
      if (t == primary) report.pr_curves.push_back(std::move(curve));
      ++ci;
    }
  }

  double total = 0.0;
  std::optional<std::size_t> idx50;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    if (same_threshold(thresholds[t], 0.5)) {
      idx50 = t;
      break;
    }
  }
  double sum50 = 0.0;
  for (ClassEval& ce : report.classes) {
    double s = 0.0;
    for (double ap : ce.ap) s += ap;
    ce.ap_range = s / static_cast<double>(ce.ap.size());
    total += s;
    if (idx50) sum50 += ce.ap[*idx50];
  }
  const double n_classes = static_cast<double>(report.classes.size());
  if (!report.classes.empty()) {
    report.map_range = total / (n_classes * static_cast<double>(thresholds.size()));
    if (idx50) report.map_50 = sum50 / n_classes;
  } else if (idx50) {
    report.map_50 = 0.0;
  }

  report.f1_curve = f1_confidence_curve(dets, gts, report.primary_threshold);
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    double best = -1.0;
    for (const F1Sample& s : report.f1_curve.samples) {
      if (s.per_class[c] > best) {
        best = s.per_class[c];
        report.classes[c].best_f1 = s.per_class[c];
        report.classes[c].best_f1_confidence = s.confidence;
      }
    }
  }
  return report;
}

}  // namespace xraydet
