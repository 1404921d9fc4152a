#pragma once

#include <optional>

namespace xraydet {

/// Axis-aligned rectangle in absolute (pixel) corner form.
///
/// Coordinates are continuous; area is (x_max - x_min) * (y_max - y_min)
/// with no "+1" pixel-inclusive convention.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  /// Finite corners with x_min <= x_max and y_min <= y_max.
  bool valid() const;

  Box translated(double dx, double dy) const {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

/// YOLO-style center/size box, each field relative to image extent.
struct NormalizedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool valid() const;

  friend bool operator==(const NormalizedBox&, const NormalizedBox&) = default;
};

struct ImageDims {
  int width = 0;
  int height = 0;

  bool valid() const { return width >= 1 && height >= 1; }

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Intersection over union; 0 when the union is empty.
double iou(const Box& a, const Box& b);

/// Area of the overlap of a and b (0 when disjoint).
double intersection_area(const Box& a, const Box& b);

Box to_absolute(const NormalizedBox& nb, ImageDims dims);

/// Inverse of to_absolute. Throws std::invalid_argument for zero-extent dims.
NormalizedBox to_normalized(const Box& b, ImageDims dims);

/// Intersects b with [0,width]x[0,height]. Empty or zero-area results are
/// dropped.
std::optional<Box> clip(const Box& b, ImageDims canvas);

}  // namespace xraydet
