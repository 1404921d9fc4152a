#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xraydet/geometry.hpp"
#include "xraydet/raster.hpp"

namespace xraydet {

struct LabeledBox {
  int class_id = 0;
  NormalizedBox box;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

struct MosaicInput {
  RasterImage image;
  std::vector<LabeledBox> labels;  // normalized to `image`
};

struct MosaicConfig {
  int target_size = 640;  // S; the canvas is 2S x 2S
  std::uint64_t seed = 0;
  double min_box_pixels = 1.0;  // minimum clipped width and height
  double min_area_ratio = 0.1;  // minimum clipped / unclipped area

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
  ImageDims canvas_dims() const { return {2 * target_size, 2 * target_size}; }
};

/// Fill colour for canvas regions no input covers.
inline constexpr Rgb kMosaicFill{114, 114, 114};

struct MosaicLabel {
  int class_id = 0;
  Box box;  // canvas pixel coordinates
  std::size_t source_image = 0;
  std::size_t source_label = 0;

  friend bool operator==(const MosaicLabel&, const MosaicLabel&) = default;
};

struct MosaicCenter {
  int x = 0;
  int y = 0;

  friend bool operator==(const MosaicCenter&, const MosaicCenter&) = default;
};

struct MosaicSample {
  RasterImage canvas;
  std::vector<MosaicLabel> labels;
  MosaicCenter center;
};

/// Draws the stitching point uniformly from the integers in [ceil(S/2),
/// floor(3S/2)] on both axes.
///
/// Generator: std::mt19937_64 seeded with cfg.seed. Each coordinate takes one
/// 64-bit output v, forms u = (v >> 11) * 2^-53 in [0, 1), and maps it to
/// lo + floor(u * (hi - lo + 1)). x is drawn first, then y.
MosaicCenter draw_mosaic_center(const MosaicConfig& cfg);

/// Affine label remap: corners are scaled, translated by (dx, dy), clipped to
/// the canvas, then dropped if the clipped width or height is below
/// cfg.min_box_pixels or the clipped area is below cfg.min_area_ratio times
/// the unclipped area.
std::optional<Box> remap_box(const Box& b, double scale, double dx, double dy,
                             ImageDims canvas, const MosaicConfig& cfg);

/// Four-image mosaic on a 2S x 2S canvas around a seeded random center.
///
/// Inputs fill the top-left, top-right, bottom-left and bottom-right quadrants
/// in that order. Each is scaled by min(S / width, S / height), anchored with
/// its inner corner on the center, and cropped to its quadrant. Sampling is
/// nearest-neighbour; uncovered pixels take kMosaicFill.
///
/// Throws std::invalid_argument unless exactly four inputs with non-empty
/// images and valid labels are given.
MosaicSample mosaic_compose(std::span<const MosaicInput> inputs,
                            const MosaicConfig& cfg);

/// mosaic_compose with an explicit center instead of a seeded draw.
MosaicSample mosaic_compose_at(std::span<const MosaicInput> inputs,
                               const MosaicConfig& cfg, MosaicCenter center);

}  // namespace xraydet
