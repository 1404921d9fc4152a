#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xraydet/augment.hpp"
#include "xraydet/geometry.hpp"
#include "xraydet/metrics.hpp"
#include "xraydet/postprocess.hpp"

namespace xraydet {

// YOLO label files: one "class cx cy w h" record per line, whitespace
// separated, coordinates normalized to the image.

/// Throws ParseError (with the 1-based line) on a wrong field count, a
/// non-numeric field, or a coordinate outside [0, 1]; std::invalid_argument
/// for zero-extent dims.
std::vector<LabeledBox> parse_yolo_label_file(std::string_view text, ImageDims dims);
std::string serialize_yolo_labels(std::span<const LabeledBox> labels);

std::vector<GroundTruth> to_ground_truth(std::span<const LabeledBox> labels, ImageDims dims,
                                         const std::string& image_id);

// Detection files: one record per line,
//   image_id<TAB>class_id<TAB>score<TAB>x_min<TAB>y_min<TAB>x_max<TAB>y_max
// Blank lines are skipped; record order is preserved.

/// Throws ParseError on malformed records, scores outside [0, 1], invalid
/// boxes, or (when class_count is given) class ids >= class_count.
std::vector<Detection> parse_detections(std::string_view text,
                                        std::optional<std::size_t> class_count = {});
std::vector<Detection> load_detections(const std::filesystem::path& path,
                                       std::optional<std::size_t> class_count = {});
std::string serialize_detections(std::span<const Detection> dets);
void write_detections(const std::filesystem::path& path, std::span<const Detection> dets);

// Dataset manifests:
//   # comment
//   class <name>
//   image <image_id> <width> <height> <label_path>
// Class ids follow the order of `class` lines. Relative label paths resolve
// against the manifest's directory.

struct ManifestImage {
  std::string image_id;
  ImageDims dims;
  std::filesystem::path label_path;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestImage> images;
};

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Reads every label file in the manifest. Throws DataError on unreadable
/// files or class ids outside the class list.
std::vector<GroundTruth> load_ground_truth(const DatasetManifest& manifest);

/// Shortest decimal that parses back to exactly `v`.
std::string format_real(double v);

/// `key = value` report, global keys first, then one [class ...] block per
/// class. Metric values use 9 decimals.
std::string format_report(const EvalReport& report);

/// CSV with header "kind,class,x,y": "pr" rows (recall, precision) per class
/// at the primary threshold, "f1" rows (confidence, F1) per class and
/// "f1_mean" rows with class "all" for the class mean.
std::string format_curves(const EvalReport& report);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace xraydet
