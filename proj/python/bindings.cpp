#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <stdexcept>

#include "xraydet/augment.hpp"
#include "xraydet/error.hpp"
#include "xraydet/formats.hpp"
#include "xraydet/geometry.hpp"
#include "xraydet/gradcheck.hpp"
#include "xraydet/metrics.hpp"
#include "xraydet/postprocess.hpp"
#include "xraydet/raster.hpp"

namespace py = pybind11;
using namespace xraydet;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Interpolation parse_interpolation(const std::string& name) {
  if (name == "all_point") return Interpolation::kAllPoint;
  if (name == "101") return Interpolation::kPoint101;
  throw std::invalid_argument("interpolation must be 'all_point' or '101'");
}

RasterImage to_raster(const ImageArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw std::invalid_argument("image must have shape (height, width, 3)");
  }
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<std::uint8_t> px(a.data(), a.data() + a.size());
  return RasterImage(w, h, std::move(px));
}

ImageArray to_array(const RasterImage& img) {
  ImageArray out({img.height(), img.width(), 3});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

std::string box_repr(const Box& b) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "Box(" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max << ")";
  return ss.str();
}

py::dict class_eval_dict(const ClassEval& ce) {
  py::dict d;
  d["class_id"] = ce.class_id;
  d["name"] = ce.name;
  d["n_gt"] = ce.n_gt;
  d["n_det"] = ce.n_det;
  d["ap"] = ce.ap;
  d["ap_range"] = ce.ap_range;
  d["best_f1"] = ce.best_f1;
  d["best_f1_confidence"] = ce.best_f1_confidence;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the xraydet package.";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  py::class_<Box>(m, "Box")
      .def(py::init<double, double, double, double>(), py::arg("x_min"), py::arg("y_min"),
           py::arg("x_max"), py::arg("y_max"))
      .def_readwrite("x_min", &Box::x_min)
      .def_readwrite("y_min", &Box::y_min)
      .def_readwrite("x_max", &Box::x_max)
      .def_readwrite("y_max", &Box::y_max)
      .def_property_readonly("area", &Box::area)
      .def("valid", &Box::valid)
      .def(py::self == py::self)
      .def("__repr__", &box_repr);

  py::class_<NormalizedBox>(m, "NormalizedBox")
      .def(py::init<double, double, double, double>(), py::arg("cx"), py::arg("cy"),
           py::arg("w"), py::arg("h"))
      .def_readwrite("cx", &NormalizedBox::cx)
      .def_readwrite("cy", &NormalizedBox::cy)
      .def_readwrite("w", &NormalizedBox::w)
      .def_readwrite("h", &NormalizedBox::h)
      .def(py::self == py::self);

  py::class_<Detection>(m, "Detection")
      .def(py::init([](std::string image_id, int class_id, double score, Box box) {
             return Detection{class_id, score, box, std::move(image_id)};
           }),
           py::arg("image_id"), py::arg("class_id"), py::arg("score"), py::arg("box"))
      .def_readwrite("image_id", &Detection::image_id)
      .def_readwrite("class_id", &Detection::class_id)
      .def_readwrite("score", &Detection::score)
      .def_readwrite("box", &Detection::box)
      .def(py::self == py::self)
      .def("__repr__", [](const Detection& d) {
        std::ostringstream ss;
        ss.precision(17);
        ss << "Detection('" << d.image_id << "', " << d.class_id << ", " << d.score << ", "
           << box_repr(d.box) << ")";
        return ss.str();
      });

  py::class_<GroundTruth>(m, "GroundTruth")
      .def(py::init([](std::string image_id, int class_id, Box box) {
             return GroundTruth{class_id, box, std::move(image_id)};
           }),
           py::arg("image_id"), py::arg("class_id"), py::arg("box"))
      .def_readwrite("image_id", &GroundTruth::image_id)
      .def_readwrite("class_id", &GroundTruth::class_id)
      .def_readwrite("box", &GroundTruth::box);

  py::class_<LabeledBox>(m, "LabeledBox")
      .def(py::init([](int class_id, NormalizedBox box) { return LabeledBox{class_id, box}; }),
           py::arg("class_id"), py::arg("box"))
      .def_readwrite("class_id", &LabeledBox::class_id)
      .def_readwrite("box", &LabeledBox::box)
      .def(py::self == py::self);

  py::class_<MosaicLabel>(m, "MosaicLabel")
      .def_readonly("class_id", &MosaicLabel::class_id)
      .def_readonly("box", &MosaicLabel::box)
      .def_readonly("source_image", &MosaicLabel::source_image)
      .def_readonly("source_label", &MosaicLabel::source_label);

  m.def("iou", &iou, py::arg("a"), py::arg("b"), "Intersection over union of two boxes.");
  m.def("decay_linear", &decay_linear, py::arg("score"), py::arg("iou"),
        py::arg("iou_threshold"));
  m.def("decay_gaussian", &decay_gaussian, py::arg("score"), py::arg("iou"), py::arg("sigma"));

  m.def(
      "suppress",
      [](const std::vector<Detection>& dets, const std::string& mode, double iou_threshold,
         double sigma, double score_threshold, bool class_agnostic, bool per_image) {
        NmsConfig cfg;
        cfg.mode = parse_nms_mode(mode);
        cfg.iou_threshold = iou_threshold;
        cfg.sigma = sigma;
        cfg.score_threshold = score_threshold;
        cfg.class_agnostic = class_agnostic;
        return per_image ? suppress_per_image(dets, cfg) : suppress(dets, cfg);
      },
      py::arg("detections"), py::arg("mode") = "soft_gaussian", py::arg("iou_threshold") = 0.3,
      py::arg("sigma") = 0.5, py::arg("score_threshold") = 0.001,
      py::arg("class_agnostic") = false, py::arg("per_image") = true,
      "Hard or soft non-maximum suppression. Returns survivors by descending score.");

  m.def(
      "pr_curve",
      [](const std::vector<bool>& tp_flags, std::size_t n_gt) {
        std::vector<std::pair<double, double>> out;
        for (const PrPoint& p : pr_curve(tp_flags, n_gt).points) {
          out.emplace_back(p.recall, p.precision);
        }
        return out;
      },
      py::arg("tp_flags"), py::arg("n_gt"),
      "(recall, precision) after each detection, flags ordered by descending score.");

  m.def(
      "average_precision",
      [](const std::vector<bool>& tp_flags, std::size_t n_gt, const std::string& interp) {
        return average_precision(pr_curve(tp_flags, n_gt), parse_interpolation(interp));
      },
      py::arg("tp_flags"), py::arg("n_gt"), py::arg("interpolation") = "all_point");

  m.def(
      "evaluate",
      [](const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
         std::optional<std::vector<double>> thresholds, const std::string& interp,
         std::vector<std::string> class_names) {
        const std::vector<double> thr =
            thresholds ? *thresholds : threshold_range(0.5, 0.95, 0.05);
        EvalOptions opt;
        opt.interpolation = parse_interpolation(interp);
        opt.class_names = std::move(class_names);
        const EvalReport r = map_over_range(dets, gts, thr, opt);
        py::dict d;
        d["thresholds"] = r.thresholds;
        d["map_50"] = r.map_50 ? py::cast(*r.map_50) : py::none();
        d["map_range"] = r.map_range;
        py::list classes;
        for (const ClassEval& ce : r.classes) classes.append(class_eval_dict(ce));
        d["classes"] = classes;
        d["best_f1_confidence"] =
            r.f1_curve.samples.empty() ? 0.0 : r.f1_curve.samples[r.f1_curve.best_index].confidence;
        return d;
      },
      py::arg("detections"), py::arg("ground_truth"), py::arg("thresholds") = py::none(),
      py::arg("interpolation") = "all_point", py::arg("class_names") = std::vector<std::string>{},
      "Per-class AP and mAP over IoU thresholds (default 0.5:0.95:0.05).");

  m.def("threshold_range", &threshold_range, py::arg("lo"), py::arg("hi"), py::arg("step"));
  m.def("f_beta", &f_beta, py::arg("precision"), py::arg("recall"), py::arg("beta") = 1.0);
  m.def("fps", &fps, py::arg("n_images"), py::arg("total_seconds"));

  m.def(
      "mosaic",
      [](const std::vector<ImageArray>& images,
         std::optional<std::vector<std::vector<LabeledBox>>> labels, int size,
         std::uint64_t seed, double min_box_pixels, double min_area_ratio,
         std::optional<std::pair<int, int>> center) {
        if (images.size() != 4) throw std::invalid_argument("mosaic needs exactly 4 images");
        if (labels && labels->size() != 4) {
          throw std::invalid_argument("labels must hold one list per image");
        }
        std::vector<MosaicInput> inputs;
        for (std::size_t i = 0; i < 4; ++i) {
          inputs.push_back({to_raster(images[i]), labels ? (*labels)[i] : std::vector<LabeledBox>{}});
        }
        MosaicConfig cfg;
        cfg.target_size = size;
        cfg.seed = seed;
        cfg.min_box_pixels = min_box_pixels;
        cfg.min_area_ratio = min_area_ratio;
        const MosaicSample s =
            center ? mosaic_compose_at(inputs, cfg, {center->first, center->second})
                   : mosaic_compose(inputs, cfg);
        return py::make_tuple(to_array(s.canvas), s.labels,
                              py::make_tuple(s.center.x, s.center.y));
      },
      py::arg("images"), py::arg("labels") = py::none(), py::arg("size") = 640,
      py::arg("seed") = 0, py::arg("min_box_pixels") = 1.0, py::arg("min_area_ratio") = 0.1,
      py::arg("center") = py::none(),
      "Four-image mosaic. Images are uint8 arrays of shape (h, w, 3). Returns (canvas, labels, "
      "center).");

  m.def(
      "attention_check",
      [](const std::string& module, std::uint64_t seed, double step, double tolerance) {
        AttnCheckOptions opt;
        opt.step = step;
        opt.tolerance = tolerance;
        const GradCheckReport r = run_attention_check(parse_attn_module(module), seed, opt);
        py::dict d;
        d["module"] = r.module;
        d["seed"] = r.seed;
        d["max_rel_error"] = r.max_rel_error;
        d["tolerance"] = r.tolerance;
        d["passed"] = r.pass;
        py::dict ops;
        for (const OpCheck& op : r.per_op) ops[py::str(op.op)] = op.max_rel_error;
        d["per_op"] = ops;
        return d;
      },
      py::arg("module"), py::arg("seed") = 0, py::arg("step") = 1e-5, py::arg("tolerance") = 1e-4,
      "Finite-difference gradient check of 'cbam' or 'swin_block'.");

  m.def(
      "parse_detections",
      [](const std::string& text, std::optional<std::size_t> class_count) {
        return parse_detections(text, class_count);
      },
      py::arg("text"), py::arg("class_count") = py::none());
  m.def(
      "serialize_detections",
      [](const std::vector<Detection>& dets) { return serialize_detections(dets); },
      py::arg("detections"));
  m.def(
      "parse_yolo_labels",
      [](const std::string& text, int width, int height) {
        return parse_yolo_label_file(text, {width, height});
      },
      py::arg("text"), py::arg("width"), py::arg("height"));
  m.def(
      "serialize_yolo_labels",
      [](const std::vector<LabeledBox>& labels) { return serialize_yolo_labels(labels); },
      py::arg("labels"));
}
