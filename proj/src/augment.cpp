#include "xraydet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace xraydet {

void MosaicConfig::validate() const {
  if (target_size < 2) throw std::invalid_argument("mosaic target size must be >= 2");
  if (!(min_box_pixels >= 0.0)) {
    throw std::invalid_argument("min_box_pixels must be non-negative");
  }
  if (!(min_area_ratio >= 0.0 && min_area_ratio <= 1.0)) {
    throw std::invalid_argument("min_area_ratio must lie in [0, 1]");
  }
}

MosaicCenter draw_mosaic_center(const MosaicConfig& cfg) {
  cfg.validate();
  std::mt19937_64 gen(cfg.seed);
  const int lo = (cfg.target_size + 1) / 2;
  const int hi = 3 * cfg.target_size / 2;
  auto draw = [&] {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    const auto span = static_cast<double>(hi - lo + 1);
    return std::min(hi, lo + static_cast<int>(std::floor(u * span)));
  };
  const int x = draw();
  const int y = draw();
  return {x, y};
}

std::optional<Box> remap_box(const Box& b, double scale, double dx, double dy,
                             ImageDims canvas, const MosaicConfig& cfg) {
  if (!(scale > 0.0)) throw std::invalid_argument("remap_box: scale must be positive");
  const Box mapped{b.x_min * scale + dx, b.y_min * scale + dy,
                   b.x_max * scale + dx, b.y_max * scale + dy};
  const auto clipped = clip(mapped, canvas);
  if (!clipped) return std::nullopt;
  if (clipped->width() < cfg.min_box_pixels || clipped->height() < cfg.min_box_pixels) {
    return std::nullopt;
  }
  if (clipped->area() < cfg.min_area_ratio * mapped.area()) return std::nullopt;
  return clipped;
}

namespace {

struct Placement {
  double scale;
  double dx;
  double dy;
  int x0, y0, x1, y1;  // quadrant pixel range [x0, x1) x [y0, y1)
};

Placement place(std::size_t quadrant, ImageDims image, int size, MosaicCenter c) {
  const double scale = std::min(double(size) / image.width, double(size) / image.height);
  const double sw = image.width * scale;
  const double sh = image.height * scale;
  const int side = 2 * size;
  switch (quadrant) {
    case 0:
      return {scale, c.x - sw, c.y - sh, 0, 0, c.x, c.y};
    case 1:
      return {scale, double(c.x), c.y - sh, c.x, 0, side, c.y};
    case 2:
      return {scale, c.x - sw, double(c.y), 0, c.y, c.x, side};
    default:
      return {scale, double(c.x), double(c.y), c.x, c.y, side, side};
  }
}

void check_inputs(std::span<const MosaicInput> inputs) {
  if (inputs.size() != 4) {
    throw std::invalid_argument("mosaic requires exactly four images, got " +
                                std::to_string(inputs.size()));
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].image.empty()) {
      throw std::invalid_argument("mosaic input " + std::to_string(i) + " has zero extent");
    }
    for (const LabeledBox& l : inputs[i].labels) {
      if (!l.box.valid() || l.class_id < 0) {
        throw std::invalid_argument("mosaic input " + std::to_string(i) +
                                    " has an invalid label");
      }
    }
  }
}

}  // namespace

MosaicSample mosaic_compose(std::span<const MosaicInput> inputs, const MosaicConfig& cfg) {
  return mosaic_compose_at(inputs, cfg, draw_mosaic_center(cfg));
}

MosaicSample mosaic_compose_at(std::span<const MosaicInput> inputs,
                               const MosaicConfig& cfg, MosaicCenter center) {
  cfg.validate();
  check_inputs(inputs);
  const ImageDims canvas_dims = cfg.canvas_dims();
  if (center.x < 0 || center.y < 0 || center.x > canvas_dims.width ||
      center.y > canvas_dims.height) {
    throw std::invalid_argument("mosaic center lies outside the canvas");
  }

  MosaicSample sample{RasterImage(canvas_dims.width, canvas_dims.height, kMosaicFill), {},
                      center};

  for (std::size_t q = 0; q < 4; ++q) {
    const RasterImage& src = inputs[q].image;
    const Placement p = place(q, src.dims(), cfg.target_size, center);

    for (int y = p.y0; y < p.y1; ++y) {
      const double sy = std::floor((y + 0.5 - p.dy) / p.scale);
      if (sy < 0.0 || sy >= src.height()) continue;
      for (int x = p.x0; x < p.x1; ++x) {
        const double sx = std::floor((x + 0.5 - p.dx) / p.scale);
        if (sx < 0.0 || sx >= src.width()) continue;
        sample.canvas.set(x, y, src.at(static_cast<int>(sx), static_cast<int>(sy)));
      }
    }

    // The placed image never extends past the center into another quadrant,
    // so clipping to the canvas clips to the visible part of the quadrant.
    const auto& labels = inputs[q].labels;
    for (std::size_t l = 0; l < labels.size(); ++l) {
      const auto abs = clip(to_absolute(labels[l].box, src.dims()), src.dims());
      if (!abs) continue;
      if (auto b = remap_box(*abs, p.scale, p.dx, p.dy, canvas_dims, cfg)) {
        sample.labels.push_back({labels[l].class_id, *b, q, l});
      }
    }
  }
  return sample;
}

}  // namespace xraydet
