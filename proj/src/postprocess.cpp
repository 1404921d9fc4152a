#include "xraydet/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "xraydet/error.hpp"

namespace xraydet {

std::string_view to_string(NmsMode mode) {
  switch (mode) {
    case NmsMode::kHard:
      return "hard";
    case NmsMode::kSoftLinear:
      return "soft_linear";
    case NmsMode::kSoftGaussian:
      return "soft_gaussian";
  }
  return "unknown";
}

NmsMode parse_nms_mode(std::string_view name) {
  if (name == "hard") return NmsMode::kHard;
  if (name == "soft_linear" || name == "linear") return NmsMode::kSoftLinear;
  if (name == "soft_gaussian" || name == "gaussian") return NmsMode::kSoftGaussian;
  throw std::invalid_argument("unknown NMS mode '" + std::string(name) + "'");
}

void NmsConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw std::invalid_argument("iou threshold must lie in (0, 1)");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("sigma must be positive");
  }
  if (!(score_threshold >= 0.0 && score_threshold < 1.0)) {
    throw std::invalid_argument("score threshold must lie in [0, 1)");
  }
}

double decay_linear(double score, double iou, double iou_threshold) {
  if (iou < iou_threshold) return score;
  return score * (1.0 - iou);
}

double decay_gaussian(double score, double iou, double sigma) {
  return score * std::exp(-(iou * iou) / sigma);
}

namespace {

struct Candidate {
  std::size_t index;  // position in the caller's input
  double score;
};

// Greedy loop over one suppression group. `group` holds input indices in
// ascending order; emitted candidates are appended to `out`.
void suppress_group(std::span<const Detection> dets,
                    const std::vector<std::size_t>& group,
                    const NmsConfig& cfg, std::vector<Candidate>& out) {
  std::vector<Candidate> remaining;
  remaining.reserve(group.size());
  for (std::size_t idx : group) {
    if (dets[idx].score >= cfg.score_threshold) {
      remaining.push_back({idx, dets[idx].score});
    }
  }

  while (!remaining.empty()) {
    // remaining stays sorted by input index, so strict > keeps the lowest
    // index among equal scores.
    std::size_t best = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      if (remaining[i].score > remaining[best].score) best = i;
    }
    const Candidate selected = remaining[best];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    out.push_back(selected);

    const Box& top = dets[selected.index].box;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      Candidate c = remaining[i];
      const double overlap = iou(top, dets[c.index].box);
      bool drop = false;
      switch (cfg.mode) {
        case NmsMode::kHard:
          drop = overlap >= cfg.iou_threshold;
          break;
        case NmsMode::kSoftLinear:
          c.score = decay_linear(c.score, overlap, cfg.iou_threshold);
          break;
        case NmsMode::kSoftGaussian:
          c.score = decay_gaussian(c.score, overlap, cfg.sigma);
          break;
      }
      if (drop || c.score < cfg.score_threshold) continue;
      remaining[kept++] = c;
    }
    remaining.resize(kept);
  }
}

void check_inputs(std::span<const Detection> dets) {
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (std::isnan(dets[i].score)) {
      throw DataError("detection " + std::to_string(i) + " has a NaN score");
    }
    if (!dets[i].box.valid()) {
      throw DataError("detection " + std::to_string(i) + " has an invalid box");
    }
  }
}

}  // namespace

std::vector<Detection> suppress(std::span<const Detection> dets,
                                const NmsConfig& cfg) {
  cfg.validate();
  check_inputs(dets);

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    groups[cfg.class_agnostic ? 0 : dets[i].class_id].push_back(i);
  }

  std::vector<Candidate> kept;
  for (const auto& [cls, group] : groups) {
    suppress_group(dets, group, cfg, kept);
  }
  // Within a group, emission order already equals (score desc, index asc);
  // this merges groups under the same ordering.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.index < b.index;
                   });

  std::vector<Detection> result;
  result.reserve(kept.size());
  for (const Candidate& c : kept) {
    Detection d = dets[c.index];
    d.score = c.score;
    result.push_back(std::move(d));
  }
  return result;
}

std::vector<Detection> suppress_per_image(std::span<const Detection> dets,
                                          const NmsConfig& cfg) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Detection>> by_image;
  for (const Detection& d : dets) {
    auto [it, inserted] = by_image.try_emplace(d.image_id);
    if (inserted) order.push_back(d.image_id);
    it->second.push_back(d);
  }
  std::vector<Detection> out;
  for (const std::string& id : order) {
    auto part = suppress(by_image[id], cfg);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace xraydet
