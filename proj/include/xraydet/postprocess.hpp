#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xraydet/geometry.hpp"

namespace xraydet {

/// A scored, class-labelled prediction.
struct Detection {
  int class_id = 0;
  double score = 0.0;
  Box box;
  std::string image_id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class NmsMode { kHard, kSoftLinear, kSoftGaussian };

std::string_view to_string(NmsMode mode);
/// Accepts "hard", "soft_linear", "soft_gaussian". Throws
/// std::invalid_argument otherwise.
NmsMode parse_nms_mode(std::string_view name);

struct NmsConfig {
  NmsMode mode = NmsMode::kSoftGaussian;
  double iou_threshold = 0.3;  // overlap threshold for hard and soft_linear
  double sigma = 0.5;          // gaussian denominator
  double score_threshold = 0.001;
  bool class_agnostic = false;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Score after linear decay against the selected box.
/// Unchanged below the threshold, score * (1 - iou) at or above it.
double decay_linear(double score, double iou, double iou_threshold);

/// Score after gaussian decay: score * exp(-iou^2 / sigma).
double decay_gaussian(double score, double iou, double sigma);

/// Greedy (soft) non-maximum suppression over one image's detections.
///
/// Repeatedly emits the highest-scoring remaining box, then decays (soft
/// modes) or removes (hard mode, iou >= iou_threshold) every remaining box against it.
/// Boxes whose score falls below cfg.score_threshold are discarded. Runs per
/// class unless cfg.class_agnostic. Equal scores resolve to the lower input
/// index. The result is ordered by non-increasing score.
///
/// Throws DataError on NaN scores or invalid boxes.
std::vector<Detection> suppress(std::span<const Detection> dets,
                                const NmsConfig& cfg);

/// suppress() applied independently to each image_id group. Output groups
/// appear in order of first occurrence of their image id.
std::vector<Detection> suppress_per_image(std::span<const Detection> dets,
                                          const NmsConfig& cfg);

}  // namespace xraydet
