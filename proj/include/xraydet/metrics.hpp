#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xraydet/geometry.hpp"
#include "xraydet/postprocess.hpp"

namespace xraydet {

struct GroundTruth {
  int class_id = 0;
  Box box;
  std::string image_id;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Outcome of matching detections against ground truth at one IoU threshold.
/// Vectors are indexed like the detection input.
struct MatchResult {
  std::vector<bool> is_tp;
  /// Index into the ground-truth input for true positives, -1 otherwise.
  std::vector<long> matched_gt;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Greedy VOC-style matching. Within each (image, class) partition,
/// detections are visited by descending score (ties: lower input index) and
/// claim the unmatched ground truth with the highest IoU (ties: lower input
/// index) if that IoU reaches iou_thr.
///
/// Throws DataError on NaN scores, std::invalid_argument if iou_thr is
/// outside (0, 1).
MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruth> gts, double iou_thr);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  double score = 0.0;  // confidence of the detection that produced the point
};

struct PrCurve {
  std::vector<PrPoint> points;
  std::size_t n_gt = 0;
};

/// Cumulative precision/recall after each detection. `tp_flags` must already
/// be sorted by descending score; `scores`, if non-empty, parallels it.
/// An empty curve is returned when n_gt == 0.
PrCurve pr_curve(const std::vector<bool>& tp_flags, std::size_t n_gt,
                 std::span<const double> scores = {});

enum class Interpolation {
  kAllPoint,   // area under the monotone precision envelope
  kPoint101,   // COCO-style 101 recall samples
};

/// Area under the precision-recall curve. 0 for an empty curve.
double average_precision(const PrCurve& curve,
                         Interpolation mode = Interpolation::kAllPoint);

/// F-beta score; 0 when both precision and recall are 0.
double f_beta(double precision, double recall, double beta);

/// Frames per second: n_images / total_seconds.
/// Throws std::invalid_argument when total_seconds <= 0.
double fps(std::size_t n_images, double total_seconds);

struct FpsReport {
  std::size_t n_images = 0;
  double total_seconds = 0.0;
  double fps = 0.0;
};

FpsReport make_fps_report(std::size_t n_images, double total_seconds);

struct F1Sample {
  double confidence = 0.0;
  std::vector<double> per_class;  // ordered like F1Curve::class_ids
  double mean = 0.0;
};

struct F1Curve {
  std::vector<int> class_ids;
  std::vector<F1Sample> samples;
  std::size_t best_index = 0;  // sample maximizing mean F1 (first on ties)
};

/// Number of evenly spaced confidence cuts in [0, 1) used by the F1 curve.
inline constexpr std::size_t kF1CurveCuts = 1000;

/// F1 of every class that has detections or ground truth, evaluated at
/// confidence cuts k/1000 for k in [0, 1000). A detection counts at cut c
/// when its score >= c.
F1Curve f1_confidence_curve(std::span<const Detection> dets,
                            std::span<const GroundTruth> gts, double iou_thr);

struct ClassEval {
  int class_id = 0;
  std::string name;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  std::vector<double> ap;  // one per threshold, ordered like EvalReport
  double ap_range = 0.0;   // mean of `ap`
  double best_f1 = 0.0;
  double best_f1_confidence = 0.0;
};

struct EvalReport {
  std::vector<double> thresholds;
  Interpolation interpolation = Interpolation::kAllPoint;
  std::vector<ClassEval> classes;  // ascending class id
  std::optional<double> map_50;    // present when 0.5 is among the thresholds
  double map_range = 0.0;          // mean over every (class, threshold) pair
  std::optional<FpsReport> timing;
  /// PR curve per class at the primary threshold (0.5 if present, else the
  /// first), ordered like `classes`.
  std::vector<PrCurve> pr_curves;
  double primary_threshold = 0.5;
  F1Curve f1_curve;
};

struct EvalOptions {
  Interpolation interpolation = Interpolation::kAllPoint;
  /// Optional display names indexed by class id.
  std::vector<std::string> class_names;
  std::optional<FpsReport> timing;
};

/// AP per class per IoU threshold and their means. Classes with neither
/// ground truth nor detections are excluded. Throws std::invalid_argument on
/// an empty or out-of-range threshold list.
EvalReport map_over_range(std::span<const Detection> dets,
                          std::span<const GroundTruth> gts,
                          std::span<const double> thresholds,
                          const EvalOptions& options = {});

/// Inclusive LO..HI in STEP increments, rounded to 10 decimals.
std::vector<double> threshold_range(double lo, double hi, double step);

}  // namespace xraydet
