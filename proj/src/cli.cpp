#include "xraydet/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xraydet/augment.hpp"
#include "xraydet/bench.hpp"
#include "xraydet/error.hpp"
#include "xraydet/formats.hpp"
#include "xraydet/gradcheck.hpp"
#include "xraydet/metrics.hpp"
#include "xraydet/postprocess.hpp"
#include "xraydet/raster.hpp"

namespace xraydet::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_iou_range(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("--iou-range expects LO:HI:STEP, got '" + spec + "'");
    }
  }
  if (parts.size() != 3) throw UsageError("--iou-range expects LO:HI:STEP, got '" + spec + "'");
  try {
    return threshold_range(parts[0], parts[1], parts[2]);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string detections;
  std::optional<double> iou;
  std::string iou_range = "0.5:0.95:0.05";
  std::string interp = "all_point";
  std::string report = "-";
  std::string curves;
  std::optional<double> total_seconds;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const DatasetManifest manifest = load_manifest(a.manifest);
  if (manifest.class_names.empty()) throw DataError(a.manifest + ": manifest lists no classes");
  const auto gts = load_ground_truth(manifest);
  const auto dets = load_detections(a.detections, manifest.class_names.size());

  std::set<std::string> known;
  for (const ManifestImage& img : manifest.images) known.insert(img.image_id);
  for (const Detection& d : dets) {
    if (!known.count(d.image_id)) {
      throw DataError(a.detections + ": image id '" + d.image_id + "' is not in the manifest");
    }
  }

  const std::vector<double> thresholds =
      a.iou ? std::vector<double>{*a.iou} : parse_iou_range(a.iou_range);
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw UsageError("IoU thresholds must lie in (0, 1)");
  }

  EvalOptions options;
  options.interpolation =
      a.interp == "101" ? Interpolation::kPoint101 : Interpolation::kAllPoint;
  options.class_names = manifest.class_names;
  if (a.total_seconds) {
    if (!(*a.total_seconds > 0.0)) throw UsageError("--total-seconds must be positive");
    options.timing = make_fps_report(manifest.images.size(), *a.total_seconds);
  }
  const EvalReport report = map_over_range(dets, gts, thresholds, options);
  emit(a.report, format_report(report), out);
  if (!a.curves.empty()) write_text_file(a.curves, format_curves(report));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct NmsArgs {
  std::string input;
  std::string output = "-";
  std::string mode = "soft_gaussian";
  double iou_threshold = 0.3;
  std::optional<double> sigma;
  double score_threshold = 0.001;
  bool class_agnostic = false;
};

int cmd_nms(const NmsArgs& a, std::ostream& out, std::ostream& err) {
  NmsConfig cfg;
  cfg.mode = parse_nms_mode(a.mode);
  cfg.iou_threshold = a.iou_threshold;
  if (a.sigma) {
    if (cfg.mode == NmsMode::kHard) {
      err << "warning: --sigma has no effect in hard mode\n";
    }
    cfg.sigma = *a.sigma;
  }
  cfg.score_threshold = a.score_threshold;
  cfg.class_agnostic = a.class_agnostic;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto dets = load_detections(a.input);
  emit(a.output, serialize_detections(suppress_per_image(dets, cfg)), out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct MosaicArgs {
  std::vector<std::string> images;
  std::vector<std::string> labels;
  int size = 640;
  std::uint64_t seed = 0;
  std::string out_prefix;
  std::string center;  // "X,Y"; overrides the seeded draw
  double min_box_pixels = 1.0;
  double min_area_ratio = 0.1;
};

MosaicCenter parse_center(const std::string& s) {
  const auto comma = s.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(s);
    std::size_t ux = 0, uy = 0;
    const std::string xs = s.substr(0, comma), ys = s.substr(comma + 1);
    const int x = std::stoi(xs, &ux);
    const int y = std::stoi(ys, &uy);
    if (ux != xs.size() || uy != ys.size()) throw std::invalid_argument(s);
    return {x, y};
  } catch (const std::exception&) {
    throw UsageError("--center expects X,Y, got '" + s + "'");
  }
}

int cmd_mosaic(const MosaicArgs& a, std::ostream& out) {
  if (a.images.size() != 4) {
    throw UsageError("mosaic needs exactly 4 images, got " + std::to_string(a.images.size()));
  }
  if (!a.labels.empty() && a.labels.size() != 4) {
    throw UsageError("mosaic needs 0 or 4 label files, got " + std::to_string(a.labels.size()));
  }
  MosaicConfig cfg;
  cfg.target_size = a.size;
  cfg.seed = a.seed;
  cfg.min_box_pixels = a.min_box_pixels;
  cfg.min_area_ratio = a.min_area_ratio;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::vector<MosaicInput> inputs;
  for (std::size_t i = 0; i < 4; ++i) {
    MosaicInput in;
    in.image = read_ppm(a.images[i]);
    if (!a.labels.empty()) {
      try {
        in.labels = parse_yolo_label_file(read_text_file(a.labels[i]), in.image.dims());
      } catch (const ParseError& e) {
        throw DataError(a.labels[i] + ": " + e.what());
      }
    }
    inputs.push_back(std::move(in));
  }

  const MosaicSample sample =
      a.center.empty() ? mosaic_compose(inputs, cfg)
                       : mosaic_compose_at(inputs, cfg, parse_center(a.center));

  std::vector<LabeledBox> labels;
  for (const MosaicLabel& l : sample.labels) {
    labels.push_back({l.class_id, to_normalized(l.box, sample.canvas.dims())});
  }
  write_ppm(a.out_prefix + ".ppm", sample.canvas);
  write_text_file(a.out_prefix + ".txt", serialize_yolo_labels(labels));
  out << "canvas = " << a.out_prefix << ".ppm\n"
      << "labels = " << a.out_prefix << ".txt\n"
      << "center = " << sample.center.x << "," << sample.center.y << "\n"
      << "label_count = " << labels.size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AttnArgs {
  std::string module = "all";
  std::size_t seeds = 5;
  double step = 1e-5;
  double tol = 1e-4;
};

int cmd_attn_check(const AttnArgs& a, std::ostream& out) {
  if (!(a.step > 0.0)) throw UsageError("--step must be positive");
  std::vector<AttnModule> modules;
  if (a.module == "all") {
    modules = {AttnModule::kCbam, AttnModule::kSwinBlock};
  } else {
    modules = {parse_attn_module(a.module)};
  }
  AttnCheckOptions options;
  options.step = a.step;
  options.tolerance = a.tol;
  bool all_pass = true;
  char buf[64];
  for (AttnModule m : modules) {
    for (std::uint64_t seed = 0; seed < a.seeds; ++seed) {
      const GradCheckReport r = run_attention_check(m, seed, options);
      std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error);
      out << "module=" << r.module << " seed=" << r.seed << " max_rel_err=" << buf
          << " tol=" << r.tolerance << " " << (r.pass ? "PASS" : "FAIL");
      for (const OpCheck& op : r.per_op) {
        std::snprintf(buf, sizeof buf, "%.3e", op.max_rel_error);
        out << " " << op.op << "=" << buf;
      }
      out << "\n";
      all_pass = all_pass && r.pass;
    }
  }
  return all_pass ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::size_t boxes = 1000;
  std::size_t images = 50;
  std::string mode = "soft_gaussian";
  std::size_t repetitions = 3;
  std::uint64_t seed = 0;
  std::size_t classes = 1;
  double iou_threshold = 0.3;
  double sigma = 0.5;
  double score_threshold = 0.001;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.images == 0 || a.repetitions == 0 || a.classes == 0) {
    throw UsageError("--images, --repetitions and --classes must be positive");
  }
  BenchConfig cfg;
  cfg.n_boxes = a.boxes;
  cfg.n_images = a.images;
  cfg.repetitions = a.repetitions;
  cfg.n_classes = a.classes;
  cfg.seed = a.seed;
  cfg.nms.mode = parse_nms_mode(a.mode);
  cfg.nms.iou_threshold = a.iou_threshold;
  cfg.nms.sigma = a.sigma;
  cfg.nms.score_threshold = a.score_threshold;
  try {
    cfg.nms.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  out << format_bench(run_bench(cfg));
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"X-ray contraband detector post-processing, evaluation and augmentation tools",
               "xraydet"};
  app.require_subcommand(1);
  const std::vector<std::string> nms_modes{"hard", "soft_linear", "soft_gaussian"};

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score detections against a labelled dataset");
  eval->add_option("--manifest", eval_args.manifest, "Dataset manifest")->required();
  eval->add_option("--detections", eval_args.detections, "Detection file")->required();
  auto* iou_opt = eval->add_option("--iou", eval_args.iou, "Single IoU threshold");
  eval->add_option("--iou-range", eval_args.iou_range, "IoU thresholds as LO:HI:STEP")
      ->capture_default_str()
      ->excludes(iou_opt);
  eval->add_option("--interp", eval_args.interp, "AP interpolation")
      ->check(CLI::IsMember({"all_point", "101"}))
      ->capture_default_str();
  eval->add_option("--report", eval_args.report, "Report path ('-' for stdout)")
      ->capture_default_str();
  eval->add_option("--curves", eval_args.curves, "PR / F1-confidence CSV path");
  eval->add_option("--total-seconds", eval_args.total_seconds,
                   "Wall time spent detecting the manifest's images; enables FPS");

  NmsArgs nms_args;
  auto* nms = app.add_subcommand("nms", "Apply hard or soft NMS to a detection file");
  nms->add_option("input", nms_args.input, "Detection file")->required();
  nms->add_option("-o,--output", nms_args.output, "Output path ('-' for stdout)")
      ->capture_default_str();
  nms->add_option("--mode", nms_args.mode)->check(CLI::IsMember(nms_modes))->capture_default_str();
  nms->add_option("--iou-threshold", nms_args.iou_threshold, "Overlap threshold for hard and linear decay")->capture_default_str();
  nms->add_option("--sigma", nms_args.sigma, "Gaussian decay sigma (default 0.5)");
  nms->add_option("--score-threshold", nms_args.score_threshold)->capture_default_str();
  nms->add_flag("--class-agnostic", nms_args.class_agnostic, "Suppress across classes");

  MosaicArgs mosaic_args;
  auto* mosaic = app.add_subcommand("mosaic", "Compose four P6 images into a mosaic sample");
  mosaic->add_option("--images", mosaic_args.images, "Four P6 images (TL TR BL BR)")->required();
  mosaic->add_option("--labels", mosaic_args.labels, "Four YOLO label files");
  mosaic->add_option("--size", mosaic_args.size, "Target size S (canvas 2S x 2S)")
      ->capture_default_str();
  mosaic->add_option("--seed", mosaic_args.seed)->capture_default_str();
  mosaic->add_option("--out", mosaic_args.out_prefix, "Output prefix")->required();
  mosaic->add_option("--min-box-pixels", mosaic_args.min_box_pixels)->capture_default_str();
  mosaic->add_option("--min-area-ratio", mosaic_args.min_area_ratio)->capture_default_str();
  mosaic->add_option("--center", mosaic_args.center, "Fixed stitching point X,Y")
      ->group("");  // test hook

  AttnArgs attn_args;
  auto* attn = app.add_subcommand("attn-check", "Finite-difference check of attention gradients");
  attn->add_option("--module", attn_args.module)
      ->check(CLI::IsMember({"all", "cbam", "swin", "swin_block"}))
      ->capture_default_str();
  attn->add_option("--seeds", attn_args.seeds, "Seeds 0..N-1 per module")->capture_default_str();
  attn->add_option("--step", attn_args.step, "Central difference step h")->capture_default_str();
  attn->add_option("--tol", attn_args.tol, "Max relative error")->capture_default_str();

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Time hard vs soft NMS on synthetic detections");
  bench->add_option("--boxes", bench_args.boxes, "Detections per image")->capture_default_str();
  bench->add_option("--images", bench_args.images)->capture_default_str();
  bench->add_option("--mode", bench_args.mode, "Mode compared against hard")
      ->check(CLI::IsMember(nms_modes))
      ->capture_default_str();
  bench->add_option("--repetitions", bench_args.repetitions)->capture_default_str();
  bench->add_option("--seed", bench_args.seed)->capture_default_str();
  bench->add_option("--classes", bench_args.classes)->capture_default_str();
  bench->add_option("--iou-threshold", bench_args.iou_threshold)->capture_default_str();
  bench->add_option("--sigma", bench_args.sigma)->capture_default_str();
  bench->add_option("--score-threshold", bench_args.score_threshold)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*eval) return cmd_eval(eval_args, out);
    if (*nms) return cmd_nms(nms_args, out, err);
    if (*mosaic) return cmd_mosaic(mosaic_args, out);
    if (*attn) return cmd_attn_check(attn_args, out);
    if (*bench) return cmd_bench(bench_args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace xraydet::cli
