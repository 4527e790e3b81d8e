#include <cstdio>
#include <stdexcept>

#include "svla/auxtasks.hpp"

namespace svla {

const char* depth_mode_name(DepthMode m) {
  switch (m) {
    case DepthMode::Interaction: return "interaction";
    case DepthMode::Uniform: return "uniform";
    case DepthMode::None: return "none";
  }
  return "?";
}

DepthMode depth_mode_from_name(const std::string& name) {
  if (name == "interaction") return DepthMode::Interaction;
  if (name == "uniform") return DepthMode::Uniform;
  if (name == "none") return DepthMode::None;
  throw std::invalid_argument("unknown depth mode: " + name);
}

BBox interaction_region(const BBox& gripper_box, const BBox& target_box, int margin, int w,
                        int h) {
  return box_dilate_clip(box_union(gripper_box, target_box), margin, w, h);
}

std::vector<DepthQuery> sample_depth_queries(const BBox& region, const std::vector<float>& depth,
                                             int w, int h, int n, DepthMode mode, Rng& rng) {
  std::vector<DepthQuery> out;
  if (mode == DepthMode::None || n <= 0) return out;
  BBox area = mode == DepthMode::Uniform ? BBox{0, 0, w - 1, h - 1} : region;
  if (!area.valid()) {
    std::fprintf(stderr, "sample_depth_queries: degenerate region, using full image\n");
    area = {0, 0, w - 1, h - 1};
  }
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    DepthQuery q;
    q.u = int(rng.uniform_int(area.x0, area.x1));
    q.v = int(rng.uniform_int(area.y0, area.y1));
    q.depth = depth[size_t(q.v) * w + q.u];
    out.push_back(q);
  }
  return out;
}

}  // namespace svla
