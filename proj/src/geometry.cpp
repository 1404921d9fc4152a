#include "xraydet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xraydet {

bool Box::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
}

bool NormalizedBox::valid() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return unit(cx) && unit(cy) && w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0;
}

double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

Box to_absolute(const NormalizedBox& nb, ImageDims dims) {
  const double w = dims.width;
  const double h = dims.height;
  return {(nb.cx - nb.w / 2.0) * w, (nb.cy - nb.h / 2.0) * h,
          (nb.cx + nb.w / 2.0) * w, (nb.cy + nb.h / 2.0) * h};
}

NormalizedBox to_normalized(const Box& b, ImageDims dims) {
  if (!dims.valid()) {
    throw std::invalid_argument("to_normalized: image dims must be positive");
  }
  const double w = dims.width;
  const double h = dims.height;
  return {(b.x_min + b.x_max) / 2.0 / w, (b.y_min + b.y_max) / 2.0 / h,
          (b.x_max - b.x_min) / w, (b.y_max - b.y_min) / h};
}

std::optional<Box> clip(const Box& b, ImageDims canvas) {
  Box c{std::clamp(b.x_min, 0.0, double(canvas.width)),
        std::clamp(b.y_min, 0.0, double(canvas.height)),
        std::clamp(b.x_max, 0.0, double(canvas.width)),
        std::clamp(b.y_max, 0.0, double(canvas.height))};
  if (c.width() <= 0.0 || c.height() <= 0.0) return std::nullopt;
  return c;
}

}  // namespace xraydet
