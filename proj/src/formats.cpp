#include "xraydet/formats.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "xraydet/error.hpp"

namespace xraydet {
namespace {

// Calls fn(line_number, line) for every line, with a trailing '\r' removed.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
  }
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

double parse_real(std::string_view tok, std::size_t line, const char* field) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError(line, std::string("field '") + field + "' is not a finite number: '" +
                               std::string(tok) + "'");
  }
  return v;
}

int parse_class_id(std::string_view tok, std::size_t line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
    throw ParseError(line, "class id must be a non-negative integer: '" + std::string(tok) + "'");
  }
  return v;
}

int parse_extent(std::string_view tok, std::size_t line, const char* field) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || v < 1) {
    throw ParseError(line, std::string(field) + " must be a positive integer");
  }
  return v;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
  return std::string(buf, ptr);
}

std::vector<LabeledBox> parse_yolo_label_file(std::string_view text, ImageDims dims) {
  if (!dims.valid()) throw std::invalid_argument("label image dims must be positive");
  std::vector<LabeledBox> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) return;
    const auto f = split_whitespace(line);
    if (f.size() != 5) {
      throw ParseError(line_no, "expected 5 fields, got " + std::to_string(f.size()));
    }
    LabeledBox l;
    l.class_id = parse_class_id(f[0], line_no);
    static constexpr const char* kNames[] = {"cx", "cy", "w", "h"};
    double v[4];
    for (int i = 0; i < 4; ++i) {
      v[i] = parse_real(f[static_cast<std::size_t>(i) + 1], line_no, kNames[i]);
      if (v[i] < 0.0 || v[i] > 1.0) {
        throw ParseError(line_no, std::string("field '") + kNames[i] + "' is outside [0, 1]");
      }
    }
    l.box = {v[0], v[1], v[2], v[3]};
    if (!l.box.valid()) throw ParseError(line_no, "box width and height must be positive");
    out.push_back(l);
  });
  return out;
}

std::string serialize_yolo_labels(std::span<const LabeledBox> labels) {
  std::string out;
  for (const LabeledBox& l : labels) {
    out += std::to_string(l.class_id);
    for (double v : {l.box.cx, l.box.cy, l.box.w, l.box.h}) {
      out += ' ';
      out += format_real(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<GroundTruth> to_ground_truth(std::span<const LabeledBox> labels, ImageDims dims,
                                         const std::string& image_id) {
  std::vector<GroundTruth> out;
  out.reserve(labels.size());
  for (const LabeledBox& l : labels) {
    out.push_back({l.class_id, to_absolute(l.box, dims), image_id});
  }
  return out;
}

std::vector<Detection> parse_detections(std::string_view text,
                                        std::optional<std::size_t> class_count) {
  std::vector<Detection> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) return;
    const auto f = split_tabs(line);
    if (f.size() != 7) {
      throw ParseError(line_no, "expected 7 tab-separated fields, got " + std::to_string(f.size()));
    }
    Detection d;
    if (f[0].empty() || f[0].find_first_of(" \t") != std::string_view::npos) {
      throw ParseError(line_no, "image id must be non-empty without whitespace");
    }
    d.image_id = std::string(f[0]);
    d.class_id = parse_class_id(f[1], line_no);
    if (class_count && static_cast<std::size_t>(d.class_id) >= *class_count) {
      throw ParseError(line_no, "class id " + std::to_string(d.class_id) +
                                    " is not in the class list (" +
                                    std::to_string(*class_count) + " classes)");
    }
    d.score = parse_real(f[2], line_no, "score");
    if (d.score < 0.0 || d.score > 1.0) throw ParseError(line_no, "score is outside [0, 1]");
    d.box = {parse_real(f[3], line_no, "x_min"), parse_real(f[4], line_no, "y_min"),
             parse_real(f[5], line_no, "x_max"), parse_real(f[6], line_no, "y_max")};
    if (!d.box.valid()) throw ParseError(line_no, "box corners are not ordered");
    out.push_back(std::move(d));
  });
  return out;
}

std::vector<Detection> load_detections(const std::filesystem::path& path,
                                       std::optional<std::size_t> class_count) {
  const std::string text = read_text_file(path);
  try {
    return parse_detections(text, class_count);
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_detections(std::span<const Detection> dets) {
  std::string out;
  for (const Detection& d : dets) {
    out += d.image_id;
    out += '\t';
    out += std::to_string(d.class_id);
    for (double v : {d.score, d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}) {
      out += '\t';
      out += format_real(v);
    }
    out += '\n';
  }
  return out;
}

void write_detections(const std::filesystem::path& path, std::span<const Detection> dets) {
  write_text_file(path, serialize_detections(dets));
}

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  std::set<std::string> ids;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) return;
    const auto f = split_whitespace(line);
    if (f[0].front() == '#') return;
    if (f[0] == "class") {
      if (f.size() != 2) throw ParseError(line_no, "expected 'class <name>'");
      if (f[1].find(',') != std::string_view::npos) {
        throw ParseError(line_no, "class names may not contain commas");
      }
      m.class_names.emplace_back(f[1]);
    } else if (f[0] == "image") {
      if (f.size() != 5) {
        throw ParseError(line_no, "expected 'image <id> <width> <height> <label_path>'");
      }
      ManifestImage img;
      img.image_id = std::string(f[1]);
      img.dims = {parse_extent(f[2], line_no, "width"), parse_extent(f[3], line_no, "height")};
      std::filesystem::path p{std::string(f[4])};
      img.label_path = p.is_absolute() ? p : base_dir / p;
      if (!ids.insert(img.image_id).second) {
        throw ParseError(line_no, "duplicate image id '" + img.image_id + "'");
      }
      m.images.push_back(std::move(img));
    } else {
      throw ParseError(line_no, "unknown manifest directive '" + std::string(f[0]) + "'");
    }
  });
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text_file(path), path.parent_path());
}

std::vector<GroundTruth> load_ground_truth(const DatasetManifest& manifest) {
  std::vector<GroundTruth> out;
  for (const ManifestImage& img : manifest.images) {
    std::vector<LabeledBox> labels;
    try {
      labels = parse_yolo_label_file(read_text_file(img.label_path), img.dims);
    } catch (const ParseError& e) {
      throw DataError(img.label_path.string() + ": " + e.what());
    }
    for (const LabeledBox& l : labels) {
      if (static_cast<std::size_t>(l.class_id) >= manifest.class_names.size()) {
        throw DataError(img.label_path.string() + ": class id " + std::to_string(l.class_id) +
                        " is not in the class list");
      }
    }
    auto gts = to_ground_truth(labels, img.dims, img.image_id);
    out.insert(out.end(), gts.begin(), gts.end());
  }
  return out;
}

namespace {

std::string metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

std::string precise(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string range_label(const std::vector<double>& t) {
  if (t.size() == 1) return format_real(t.front());
  return format_real(t.front()) + ":" + format_real(t.back());
}

}  // namespace

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "# detection evaluation report\n";
  out << "classes = " << r.classes.size() << "\n";
  out << "interpolation = "
      << (r.interpolation == Interpolation::kAllPoint ? "all_point" : "101_point") << "\n";
  out << "iou_thresholds = ";
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    out << (i ? "," : "") << format_real(r.thresholds[i]);
  }
  out << "\n";
  if (r.map_50) out << "mAP@0.5 = " << metric(*r.map_50) << "\n";
  if (!(r.thresholds.size() == 1 && r.map_50)) {
    out << "mAP@" << range_label(r.thresholds) << " = " << metric(r.map_range) << "\n";
  }
  if (!r.f1_curve.samples.empty()) {
    const F1Sample& best = r.f1_curve.samples[r.f1_curve.best_index];
    out << "best_mean_f1 = " << metric(best.mean) << "\n";
    out << "best_mean_f1_confidence = " << format_real(best.confidence) << "\n";
  }
  if (r.timing) {
    out << "images = " << r.timing->n_images << "\n";
    out << "total_seconds = " << precise(r.timing->total_seconds) << "\n";
    out << "fps = " << metric(r.timing->fps) << "\n";
  }
  for (const ClassEval& c : r.classes) {
    out << "\n[class " << c.name << "]\n";
    out << "class_id = " << c.class_id << "\n";
    out << "n_gt = " << c.n_gt << "\n";
    out << "n_det = " << c.n_det << "\n";
    for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
      out << "AP@" << format_real(r.thresholds[t]) << " = " << metric(c.ap[t]) << "\n";
    }
    if (r.thresholds.size() > 1) {
      out << "AP@" << range_label(r.thresholds) << " = " << metric(c.ap_range) << "\n";
    }
    out << "best_f1 = " << metric(c.best_f1) << "\n";
    out << "best_f1_confidence = " << format_real(c.best_f1_confidence) << "\n";
  }
  return out.str();
}

std::string format_curves(const EvalReport& r) {
  std::string out = "kind,class,x,y\n";
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    for (const PrPoint& p : r.pr_curves[c].points) {
      out += "pr," + r.classes[c].name + "," + precise(p.recall) + "," + precise(p.precision) + "\n";
    }
  }
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    for (const F1Sample& s : r.f1_curve.samples) {
      out += "f1," + r.classes[c].name + "," + precise(s.confidence) + "," +
             precise(s.per_class[c]) + "\n";
    }
  }
  for (const F1Sample& s : r.f1_curve.samples) {
    out += "f1_mean,all," + precise(s.confidence) + "," + precise(s.mean) + "\n";
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace xraydet
