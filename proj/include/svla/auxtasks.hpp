#pragma once

#include <string>
#include <vector>

#include "svla/geometry.hpp"
#include "svla/rng.hpp"
#include "svla/scenegen.hpp"

namespace svla {

// Depth-query sampling policy for the auxiliary depth task.
enum class DepthMode { Interaction, Uniform, None };
const char* depth_mode_name(DepthMode m);
DepthMode depth_mode_from_name(const std::string& name);

// Union of the gripper and target boxes dilated by `margin` pixels, clipped to
// the image. Invalid inputs are absorbed (union of nothing is empty).
BBox interaction_region(const BBox& gripper_box, const BBox& target_box, int margin, int w,
                        int h);

// Draws n pixel queries with their ground-truth depths. Interaction mode
// samples inside `region` (falling back to the full image if the region is
// degenerate); Uniform ignores the region; None returns no queries.
std::vector<DepthQuery> sample_depth_queries(const BBox& region, const std::vector<float>& depth,
                                             int w, int h, int n, DepthMode mode, Rng& rng);

}  // namespace svla
