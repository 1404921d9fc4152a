#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xraydet/metrics.hpp"
#include "xraydet/postprocess.hpp"

namespace xraydet {

/// Conveyor-belt frame rate an X-ray line must sustain.
inline constexpr double kConveyorFps = 25.0;

struct BenchConfig {
  std::size_t n_boxes = 1000;  // detections per synthetic image
  std::size_t n_images = 50;
  std::size_t repetitions = 3;
  std::size_t n_classes = 1;
  int image_size = 640;
  std::uint64_t seed = 0;
  NmsConfig nms;  // mode is the soft mode compared against hard
};

/// Seeded synthetic detections for one image: uniform centers over the image,
/// side lengths in [16, 128] px, uniform scores in (0, 1], classes uniform.
std::vector<Detection> synthetic_detections(std::size_t n_boxes, std::size_t n_classes,
                                            int image_size, std::uint64_t seed,
                                            const std::string& image_id = "synthetic");

struct BenchRun {
  NmsMode mode = NmsMode::kHard;
  std::vector<double> seconds;  // per repetition, all images
  FpsReport report;             // from the median repetition
  std::size_t kept = 0;         // detections surviving, summed over images
};

struct BenchResult {
  BenchConfig config;
  BenchRun hard;
  BenchRun compared;
  double runtime_ratio = 0.0;  // compared / hard median seconds
};

double median(std::vector<double> values);

/// Times suppress() over every image, `repetitions` times per mode, and
/// reports FPS from the median total time. Throws std::invalid_argument on
/// zero counts.
BenchResult run_bench(const BenchConfig& config);

std::string format_bench(const BenchResult& result);

}  // namespace xraydet
