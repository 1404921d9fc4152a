#include "xraydet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "xraydet/tensor.hpp"

namespace xraydet {

std::vector<Detection> synthetic_detections(std::size_t n_boxes, std::size_t n_classes,
                                            int image_size, std::uint64_t seed,
                                            const std::string& image_id) {
  if (n_classes == 0) throw std::invalid_argument("synthetic detections need >= 1 class");
  UniformSource rng(seed);
  const double side = image_size;
  std::vector<Detection> out;
  out.reserve(n_boxes);
  for (std::size_t i = 0; i < n_boxes; ++i) {
    const double cx = rng.next(0.0, side);
    const double cy = rng.next(0.0, side);
    const double w = rng.next(16.0, 128.0);
    const double h = rng.next(16.0, 128.0);
    Detection d;
    d.image_id = image_id;
    d.box = {std::max(0.0, cx - w / 2), std::max(0.0, cy - h / 2),
             std::min(side, cx + w / 2), std::min(side, cy + h / 2)};
    d.score = 1.0 - rng.next(0.0, 1.0);
    d.class_id = static_cast<int>(
        std::min(n_classes - 1, static_cast<std::size_t>(rng.next(0.0, double(n_classes)))));
    out.push_back(std::move(d));
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

BenchRun time_mode(const std::vector<std::vector<Detection>>& images, NmsConfig cfg,
                   NmsMode mode, std::size_t repetitions) {
  cfg.mode = mode;
  BenchRun run;
  run.mode = mode;
  for (std::size_t r = 0; r < repetitions; ++r) {
    std::size_t kept = 0;
    const auto start = std::chrono::steady_clock::now();
    for (const auto& dets : images) kept += suppress(dets, cfg).size();
    const auto stop = std::chrono::steady_clock::now();
    run.seconds.push_back(std::chrono::duration<double>(stop - start).count());
    run.kept = kept;
  }
  // A timer tick of zero would make the rate undefined.
  const double t = std::max(median(run.seconds), 1e-9);
  run.report = make_fps_report(images.size(), t);
  return run;
}

}  // namespace

BenchResult run_bench(const BenchConfig& config) {
  if (config.n_images == 0 || config.repetitions == 0) {
    throw std::invalid_argument("bench needs at least one image and one repetition");
  }
  config.nms.validate();
  std::vector<std::vector<Detection>> images;
  images.reserve(config.n_images);
  for (std::size_t i = 0; i < config.n_images; ++i) {
    images.push_back(synthetic_detections(config.n_boxes, config.n_classes, config.image_size,
                                          config.seed + i, "img" + std::to_string(i)));
  }
  BenchResult result;
  result.config = config;
  result.hard = time_mode(images, config.nms, NmsMode::kHard, config.repetitions);
  result.compared = time_mode(images, config.nms, config.nms.mode, config.repetitions);
  result.runtime_ratio =
      result.compared.report.total_seconds / result.hard.report.total_seconds;
  return result;
}

std::string format_bench(const BenchResult& r) {
  std::ostringstream out;
  char buf[128];
  auto line = [&](const char* key, double v, const char* fmt = "%.6f") {
    std::snprintf(buf, sizeof buf, fmt, v);
    out << key << " = " << buf << "\n";
  };
  out << "boxes_per_image = " << r.config.n_boxes << "\n";
  out << "images = " << r.config.n_images << "\n";
  out << "repetitions = " << r.config.repetitions << "\n";
  out << "timing_reduction = median\n";
  for (const BenchRun* run : {&r.hard, &r.compared}) {
    const std::string prefix(to_string(run->mode));
    out << prefix << ".kept = " << run->kept << "\n";
    line((prefix + ".total_seconds").c_str(), run->report.total_seconds, "%.9f");
    line((prefix + ".fps").c_str(), run->report.fps, "%.3f");
    out << prefix << ".meets_" << kConveyorFps << "fps = "
        << (run->report.fps >= kConveyorFps ? "yes" : "no") << "\n";
  }
  line((std::string(to_string(r.compared.mode)) + "_over_hard_runtime").c_str(),
       r.runtime_ratio, "%.4f");
  return out.str();
}

}  // namespace xraydet
