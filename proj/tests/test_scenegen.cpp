#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "svla/auxtasks.hpp"
#include "svla/scenegen.hpp"

using namespace svla;

namespace {

// Independent oracle: Moller-Trumbore ray/triangle intersection. Returns the
// ray parameter t (such that hit = org + t*dir) or a negative value on miss,
// plus the smallest barycentric coordinate for edge-proximity guards.
double ray_tri(const Vec3& org, const Vec3& dir, const Tri& t, double& min_bary) {
  Vec3 e1 = t.b - t.a, e2 = t.c - t.a;
  Vec3 p = cross(dir, e2);
  double det = dot(e1, p);
  if (std::abs(det) < 1e-12) return -1;
  double inv = 1.0 / det;
  Vec3 s = org - t.a;
  double u = dot(s, p) * inv;
  if (u < 0 || u > 1) return -1;
  Vec3 q = cross(s, e1);
  double v = dot(dir, q) * inv;
  if (v < 0 || u + v > 1) return -1;
  double tt = dot(e2, q) * inv;
  if (tt <= 0) return -1;
  min_bary = std::min({u, v, 1 - u - v});
  return tt;
}

SceneSpec two_object_scene() {
  SceneSpec sc;
  ObjectSpec a;
  a.shape = Shape::Cube;
  a.size_class = SizeClass::Medium;
  a.dims = {0.04, 0.04, 0.04};
  a.pos = {0.05, 0.02};
  a.color_id = 0;
  ObjectSpec b = a;
  b.shape = Shape::Disc;
  b.dims = {0.05, 0.05, 0.025};
  b.pos = {-0.08, -0.05};
  b.color_id = 2;
  sc.objects = {a, b};
  sc.target_index = 0;
  sc.goal.center = {-0.15, 0.12};
  sc.goal.half = 0.05;
  sc.goal.color_id = 1;
  return sc;
}

}  // namespace

TEST_CASE("scene sampling honors family contracts and is deterministic") {
  SceneSpec s = sample_scene(TaskFamily::Bar90, 0.34, 7);
  const ObjectSpec& t = s.objects[s.target_index];
  CHECK(t.shape == Shape::Bar);
  CHECK(t.theta_deg == doctest::Approx(90.0));
  CHECK(s.objects.size() >= 2);  // at least one distractor
  CHECK(s.target_index == 0);

  SceneSpec s2 = sample_scene(TaskFamily::Bar90, 0.34, 7);
  REQUIRE(s2.objects.size() == s.objects.size());
  for (size_t i = 0; i < s.objects.size(); ++i) {
    CHECK(s2.objects[i].pos.x == s.objects[i].pos.x);
    CHECK(s2.objects[i].pos.y == s.objects[i].pos.y);
    CHECK(s2.objects[i].color_id == s.objects[i].color_id);
  }
  CHECK(s2.instruction == s.instruction);

  SceneSpec small = sample_scene(TaskFamily::Small, 0.0, 1);
  const ObjectSpec& st = small.objects[small.target_index];
  double max_dim = std::max({st.dims.x, st.dims.y, st.dims.z});
  CHECK(max_dim >= 0.01);
  CHECK(max_dim <= 0.02);

  for (uint64_t seed = 0; seed < 30; ++seed) {
    SceneSpec sc = sample_scene(TaskFamily::General, 1.0, seed);
    CHECK(sc.objects.size() == 5);  // target + 4 distractors at difficulty 1
    for (const auto& o : sc.objects) {
      CHECK(std::abs(o.pos.x) <= 0.25);
      CHECK(std::abs(o.pos.y) <= 0.20);
    }
    for (size_t i = 0; i < sc.objects.size(); ++i)
      for (size_t j = i + 1; j < sc.objects.size(); ++j) {
        double d = std::hypot(sc.objects[i].pos.x - sc.objects[j].pos.x,
                              sc.objects[i].pos.y - sc.objects[j].pos.y);
        CHECK(d >= sc.objects[i].bound_radius() + sc.objects[j].bound_radius());
      }
  }

  SceneGenConfig tiny;
  tiny.workspace_x = 0.06;
  tiny.workspace_y = 0.06;
  tiny.max_retries = 5;
  CHECK_THROWS_AS(sample_scene(TaskFamily::General, 1.0, 3, tiny), std::runtime_error);
}

TEST_CASE("grasp width of rotated footprints") {
  ObjectSpec bar;
  bar.shape = Shape::Bar;
  bar.dims = {0.12, 0.04, 0.03};
  bar.theta_deg = 0;
  CHECK(bar.grasp_width(M_PI / 2) == doctest::Approx(0.04));  // across the short axis
  CHECK(bar.grasp_width(0) == doctest::Approx(0.12));
  bar.theta_deg = 90;
  CHECK(bar.grasp_width(0) == doctest::Approx(0.04));
  ObjectSpec disc;
  disc.shape = Shape::Disc;
  disc.dims = {0.05, 0.05, 0.02};
  CHECK(disc.grasp_width(0.3) == doctest::Approx(0.05));
  CHECK(disc.grasp_width(1.9) == doctest::Approx(0.05));
}

TEST_CASE("randomization shells: containment, nesting, 5% jitter") {
  RandomizationShell small = shell_for(ShellLevel::Small);
  RandomizationShell medium = shell_for(ShellLevel::Medium);
  RandomizationShell large = shell_for(ShellLevel::Large);
  CHECK(small.extent.x == doctest::Approx(0.15));
  CHECK(small.extent.y == doctest::Approx(0.10));
  CHECK(small.extent.z == doctest::Approx(0.15));
  CHECK(large.extent.x == doctest::Approx(1.50));
  CHECK(large.extent.y == doctest::Approx(0.50));
  CHECK(large.extent.z == doctest::Approx(0.60));
  CHECK(small.extent.x < medium.extent.x);
  CHECK(medium.extent.x < large.extent.x);
  CHECK(small.extent.y < medium.extent.y);
  CHECK(medium.extent.y < large.extent.y);
  CHECK(small.extent.z < medium.extent.z);
  CHECK(medium.extent.z < large.extent.z);

  Rng rng(5);
  double lo_x = 1e9, hi_x = -1e9;
  for (int i = 0; i < 1000; ++i) {
    CameraRig r = sample_camera_rig(small, rng);
    CHECK(std::abs(r.pos.x - small.anchor.x) <= 0.5 * small.extent.x + 1e-12);
    CHECK(std::abs(r.pos.y - small.anchor.y) <= 0.5 * small.extent.y + 1e-12);
    CHECK(std::abs(r.pos.z - small.anchor.z) <= 0.5 * small.extent.z + 1e-12);
    CHECK(r.b >= 0.95 * 0.063);
    CHECK(r.b <= 1.05 * 0.063);
    CHECK(r.f >= 0.95 * 80.0);
    CHECK(r.f <= 1.05 * 80.0);
  }
  for (int i = 0; i < 1000; ++i) {
    CameraRig r = sample_camera_rig(large, rng);
    CHECK(std::abs(r.pos.x - large.anchor.x) <= 0.75 + 1e-12);
    lo_x = std::min(lo_x, r.pos.x);
    hi_x = std::max(hi_x, r.pos.x);
    CHECK(r.pos.z >= 0.12);
  }
  CHECK(hi_x - lo_x > 0.9 * large.extent.x);  // draws actually span the cuboid
}

TEST_CASE("disparity-depth identity on rendered frames") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    SceneSpec sc = sample_scene(TaskFamily::General, 0.5, 100 + trial);
    CameraRig rig = sample_camera_rig(shell_for(ShellLevel::Medium), rng);
    StereoFrame fr = render_stereo(sc, init_world(sc), rig);
    double worst = 0;
    for (int i = 0; i < fr.H * fr.W; ++i) {
      CHECK(std::isfinite(fr.depth[i]));
      CHECK(fr.depth[i] > 0);
      double expect = rig.f * rig.b / double(fr.depth[i]);
      worst = std::max(worst, std::abs(double(fr.disparity[i]) - expect));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("renders are deterministic and bboxes are tight silhouettes") {
  SceneSpec sc = two_object_scene();
  Rng rng(3);
  CameraRig rig = sample_camera_rig(shell_for(ShellLevel::Small), rng);
  WorldState w = init_world(sc);
  StereoFrame a = render_stereo(sc, w, rig);
  StereoFrame b = render_stereo(sc, w, rig);
  CHECK(a.left == b.left);
  CHECK(a.right == b.right);
  CHECK(a.depth == b.depth);

  for (size_t i = 0; i < sc.objects.size(); ++i) {
    const BBox& box = a.object_boxes[i];
    REQUIRE(box.valid());
    bool touch_x0 = false, touch_x1 = false, touch_y0 = false, touch_y1 = false;
    for (int y = 0; y < a.H; ++y)
      for (int x = 0; x < a.W; ++x)
        if (a.ids[y * a.W + x] == int(i)) {
          CHECK(box.contains(x, y));
          touch_x0 |= x == box.x0;
          touch_x1 |= x == box.x1;
          touch_y0 |= y == box.y0;
          touch_y1 |= y == box.y1;
        }
    CHECK(touch_x0);
    CHECK(touch_x1);
    CHECK(touch_y0);
    CHECK(touch_y1);
  }
  CHECK(a.gripper_box.valid());
}

TEST_CASE("empty scene renders finite table/background depths only") {
  SceneSpec sc;
  sc.goal.center = {0.1, 0.1};
  sc.goal.half = 0.05;
  sc.goal.color_id = 3;
  Rng rng(9);
  CameraRig rig = sample_camera_rig(shell_for(ShellLevel::Small), rng);
  StereoFrame fr = render_stereo(sc, init_world(sc), rig);
  for (int i = 0; i < fr.H * fr.W; ++i) {
    CHECK(std::isfinite(fr.depth[i]));
    int id = fr.ids[i];
    bool ok = id == kIdTable || id == kIdBackground || id == kIdGoalPad || id >= kIdGripperBase;
    CHECK(ok);
  }
}

TEST_CASE("degenerate rigs are rejected") {
  SceneSpec sc = two_object_scene();
  WorldState w = init_world(sc);
  CameraRig below = CameraRig::look_at({0, -0.5, 0.01}, {0, 0, 0.03}, 80, 0.063, 64, 64, 32, 32);
  CHECK_THROWS_AS(render_stereo(sc, w, below), std::runtime_error);
  CameraRig inside = CameraRig::look_at({sc.objects[0].pos.x, sc.objects[0].pos.y, 0.051},
                                        {0, 0, 0.0}, 80, 0.063, 64, 64, 32, 32);
  CHECK_THROWS_AS(render_stereo(sc, w, inside), std::runtime_error);
}

TEST_CASE("occlusion alignment with a brute-force ray-cast oracle") {
  Rng rng(21);
  int checked = 0, mismatched = 0;
  for (int trial = 0; trial < 4; ++trial) {
    SceneSpec sc = sample_scene(TaskFamily::General, 0.8, 500 + trial);
    CameraRig rig = sample_camera_rig(shell_for(ShellLevel::Medium), rng);
    WorldState w = init_world(sc);
    StereoFrame fr = render_stereo(sc, w, rig);
    std::vector<Tri> tris = world_triangles(sc, w);
    // 8x8 probe grid over the image.
    for (int gy = 0; gy < 8; ++gy)
      for (int gx = 0; gx < 8; ++gx) {
        int px = gx * fr.W / 8 + fr.W / 16;
        int py = gy * fr.H / 8 + fr.H / 16;
        Vec3 dir = normalize(rig.right * ((px + 0.5 - rig.cx) / rig.f) +
                             rig.down * ((py + 0.5 - rig.cy) / rig.f) + rig.fwd);
        double best_t = 1e18, second_t = 1e18, best_bary = 0;
        int best_id = kIdBackground;
        for (const Tri& t : tris) {
          double mb;
          double tt = ray_tri(rig.pos, dir, t, mb);
          if (tt <= 0) continue;
          if (tt < best_t) {
            second_t = best_t;
            best_t = tt;
            best_bary = mb;
            best_id = t.id;
          } else if (tt < second_t && t.id != best_id) {
            second_t = tt;
          }
        }
        double z_oracle =
            best_t < 1e17 ? best_t * dot(dir, rig.fwd) : kBackgroundDepth;
        // Guard band: skip probes grazing a triangle edge or a near-tie
        // between two different surfaces, where fill rules may differ.
        if (best_t < 1e17 && (best_bary < 0.02 || second_t - best_t < 1e-4)) continue;
        ++checked;
        int idx = py * fr.W + px;
        if (fr.ids[idx] != best_id) ++mismatched;
        CHECK(std::abs(fr.depth[idx] - z_oracle) / z_oracle < 1e-4);
      }
  }
  CHECK(checked > 150);  // guard bands must not eat the test
  CHECK(mismatched == 0);
}

TEST_CASE("integer-disparity scene: right image is the left image shifted") {
  // Camera 1 m straight above the plane z=0, f=80 px, b chosen so d=4 px.
  CameraRig rig = CameraRig::look_at({0, 0, 1.0}, {0, 0, 0}, 80, 0.05, 64, 64, 32, 32);
  int d = int(std::lround(rig.f * rig.b / 1.0));
  REQUIRE(d == 4);

  std::vector<Tri> tris;
  Tri t1;
  t1.rgb[0] = 0.9f;
  t1.rgb[1] = 0.2f;
  t1.rgb[2] = 0.1f;
  t1.id = 1;
  // A quad on the plane, split into two triangles.
  Vec3 A{-0.15, -0.15, 0}, B{0.15, -0.15, 0}, C{0.15, 0.15, 0}, D{-0.15, 0.15, 0};
  t1.a = A;
  t1.b = B;
  t1.c = C;
  tris.push_back(t1);
  t1.a = A;
  t1.b = C;
  t1.c = D;
  tris.push_back(t1);

  int n = rig.H * rig.W;
  std::vector<float> lrgb(n * 3, 0.f), rrgb(n * 3, 0.f);
  std::vector<float> ldepth(n, float(kBackgroundDepth)), rdepth(n, float(kBackgroundDepth));
  std::vector<int16_t> lids(n, -1), rids(n, -1);
  rasterize(tris, rig, 0.0, lrgb.data(), ldepth.data(), lids.data());
  rasterize(tris, rig, rig.b, rrgb.data(), rdepth.data(), rids.data());

  int covered = 0;
  for (int y = 0; y < rig.H; ++y)
    for (int x = d; x < rig.W; ++x) {
      int li = y * rig.W + x, ri = y * rig.W + (x - d);
      if (lids[li] != 1 || rids[ri] != 1) continue;
      ++covered;
      CHECK(lrgb[li * 3 + 0] == rrgb[ri * 3 + 0]);
      CHECK(lrgb[li * 3 + 1] == rrgb[ri * 3 + 1]);
      CHECK(lrgb[li * 3 + 2] == rrgb[ri * 3 + 2]);
      CHECK(ldepth[li] == rdepth[ri]);
    }
  CHECK(covered > 300);
}

TEST_CASE("scripted expert: success rate, single attempt, keyframe counts") {
  const TaskFamily fams[] = {TaskFamily::General, TaskFamily::Bar0,  TaskFamily::Bar45,
                             TaskFamily::Bar90,   TaskFamily::Medium, TaskFamily::Small};
  int success = 0, total = 200;
  Rng rig_rng(77);
  for (int i = 0; i < total; ++i) {
    SceneSpec sc = sample_scene(fams[i % 6], 0.34, 9000 + i);
    CameraRig rig = sample_camera_rig(shell_for(ShellLevel::Small), rig_rng);
    Rng ep_rng(seed_combine(9000 + i, 1));
    EpisodeRecord rec = expert_rollout(sc, rig, ep_rng);
    if (rec.outcome == Outcome::Success) ++success;
    CHECK(rec.keyframe_count >= 5);
    CHECK(rec.keyframe_count <= 7);
    REQUIRE(!rec.steps.empty());
    for (const auto& st : rec.steps) {
      CHECK(int(st.chunk.size()) == kChunkLen);
      CHECK(st.region.valid());
      for (const auto& q : st.queries) {
        CHECK(st.region.contains(q.u, q.v));
        CHECK(q.depth == st.frame.depth[q.v * st.frame.W + q.u]);
      }
    }
  }
  CHECK(double(success) / total >= 0.95);
}

TEST_CASE("expert episodes replay exactly from the initial state") {
  SceneSpec sc = sample_scene(TaskFamily::Bar45, 0.5, 42);
  Rng rng(123);
  CameraRig rig = sample_camera_rig(shell_for(ShellLevel::Small), rng);
  Rng ep_rng(7);
  EpisodeRecord rec = expert_rollout(sc, rig, ep_rng);
  REQUIRE(rec.outcome == Outcome::Success);
  CHECK(count_events(WorldState{}, true) == 0);

  WorldState w = init_world(sc);
  w.grip = rec.steps[0].state;
  size_t snap = 0;
  for (size_t s = 0; s < rec.actions.size(); ++s) {
    if (snap < rec.steps.size() && rec.steps[snap].sim_step == int(s)) {
      const RobotState& want = rec.steps[snap].state;
      CHECK(std::abs(w.grip.pos.x - want.pos.x) < 1e-6);
      CHECK(std::abs(w.grip.pos.y - want.pos.y) < 1e-6);
      CHECK(std::abs(w.grip.pos.z - want.pos.z) < 1e-6);
      CHECK(std::abs(w.grip.yaw - want.yaw) < 1e-6);
      CHECK(std::abs(w.grip.open_frac - want.open_frac) < 1e-6);
      ++snap;
    }
    step_world(w, sc, rec.actions[s]);
  }
  CHECK(snap == rec.steps.size());
  CHECK(count_events(w, true) == 1);
  CHECK(count_events(w, false) == 1);
  CHECK(score_episode(w, sc, false) == Outcome::Success);
}

TEST_CASE("interaction region and depth query sampling") {
  BBox grip{2, 3, 10, 12}, tgt{30, 28, 44, 40};
  BBox region = interaction_region(grip, tgt, 2, 64, 64);
  CHECK(region.x0 == 0);
  CHECK(region.y0 == 1);
  CHECK(region.x1 == 46);
  CHECK(region.y1 == 42);

  BBox nested = interaction_region(BBox{10, 10, 20, 20}, BBox{12, 12, 15, 15}, 2, 64, 64);
  CHECK(nested.x0 == 8);
  CHECK(nested.x1 == 22);

  std::vector<float> depth(64 * 64, 0.7f);
  Rng rng(5);
  auto qs = sample_depth_queries(region, depth, 64, 64, 1000, DepthMode::Interaction, rng);
  REQUIRE(qs.size() == 1000);
  for (const auto& q : qs) {
    CHECK(region.contains(q.u, q.v));
    CHECK(q.depth == 0.7f);
  }
  CHECK(sample_depth_queries(region, depth, 64, 64, 5, DepthMode::None, rng).empty());

  // Uniform mode over a typical scene puts most samples outside object pixels.
  SceneSpec sc = sample_scene(TaskFamily::General, 0.34, 4);
  Rng rr(8);
  CameraRig rig = sample_camera_rig(shell_for(ShellLevel::Small), rr);
  StereoFrame fr = render_stereo(sc, init_world(sc), rig);
  auto uq = sample_depth_queries(region, fr.depth, fr.W, fr.H, 2000, DepthMode::Uniform, rr);
  int background = 0;
  for (const auto& q : uq) {
    int id = fr.ids[q.v * fr.W + q.u];
    bool interaction_pixel =
        id == sc.target_index || id >= kIdGripperBase;
    if (!interaction_pixel) ++background;
  }
  CHECK(background > 1000);
}

TEST_CASE("dataset round trip and corruption detection") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "svla_dataset_test";
  fs::remove_all(dir);

  std::vector<EpisodeRecord> eps;
  Rng rng(55);
  for (int i = 0; i < 3; ++i) {
    SceneSpec sc = sample_scene(TaskFamily::Medium, 0.34, 800 + i);
    CameraRig rig = sample_camera_rig(shell_for(ShellLevel::Small), rng);
    Rng ep_rng(i);
    eps.push_back(expert_rollout(sc, rig, ep_rng));
  }
  DatasetManifest m;
  m.base_seed = 800;
  m.shell = "small";
  m.families = {"medium"};
  write_dataset(eps, dir.string(), m);

  DatasetManifest back_m = read_manifest(dir.string());
  CHECK(back_m.episode_count == 3);
  CHECK(back_m.shell == "small");

  auto back = read_dataset(dir.string());
  REQUIRE(back.size() == eps.size());
  for (size_t e = 0; e < eps.size(); ++e) {
    const EpisodeRecord& a = eps[e];
    const EpisodeRecord& b = back[e];
    CHECK(b.outcome == a.outcome);
    CHECK(b.total_steps == a.total_steps);
    CHECK(b.keyframe_count == a.keyframe_count);
    CHECK(b.scene.instruction == a.scene.instruction);
    CHECK(b.scene.seed == a.scene.seed);
    CHECK(b.scene.objects.size() == a.scene.objects.size());
    for (size_t i = 0; i < a.scene.objects.size(); ++i) {
      CHECK(b.scene.objects[i].pos.x == a.scene.objects[i].pos.x);  // doubles, bit-exact
      CHECK(b.scene.objects[i].dims.z == a.scene.objects[i].dims.z);
      CHECK(b.scene.objects[i].color_id == a.scene.objects[i].color_id);
    }
    CHECK(b.rig.f == a.rig.f);
    CHECK(b.rig.pos.z == a.rig.pos.z);
    REQUIRE(b.steps.size() == a.steps.size());
    REQUIRE(b.actions.size() == a.actions.size());
    for (size_t s = 0; s < a.steps.size(); ++s) {
      CHECK(b.steps[s].frame.left == a.steps[s].frame.left);    // u8 quantization round trip
      CHECK(b.steps[s].frame.right == a.steps[s].frame.right);
      CHECK(b.steps[s].frame.depth == a.steps[s].frame.depth);
      CHECK(b.steps[s].frame.ids == a.steps[s].frame.ids);
      CHECK(b.steps[s].target_box.x0 == a.steps[s].target_box.x0);
      CHECK(b.steps[s].region.x1 == a.steps[s].region.x1);
      CHECK(float(b.steps[s].state.pos.x) == float(a.steps[s].state.pos.x));
      CHECK(float(b.steps[s].chunk[3].dz) == float(a.steps[s].chunk[3].dz));
      REQUIRE(b.steps[s].queries.size() == a.steps[s].queries.size());
      for (size_t q = 0; q < a.steps[s].queries.size(); ++q) {
        CHECK(b.steps[s].queries[q].u == a.steps[s].queries[q].u);
        CHECK(b.steps[s].queries[q].depth == a.steps[s].queries[q].depth);
      }
    }
  }

  fs::path ep0 = dir / "ep_00000.svlb";
  auto size = fs::file_size(ep0);
  fs::resize_file(ep0, size - 64);
  CHECK_THROWS_AS(read_episode(ep0.string()), std::runtime_error);
}
