#include <cmath>
#include <stdexcept>

#include "svla/scenegen.hpp"

namespace svla {

namespace {

const Vec3 kLightDir = normalize({0.30, -0.40, 0.85});
constexpr double kNearClip = 0.05;
const float kTableRgb[3] = {0.55f, 0.50f, 0.45f};
const float kGripperRgb[3] = {0.35f, 0.35f, 0.40f};
const float kBackgroundRgb[3] = {0.18f, 0.20f, 0.24f};

inline float quantize(float v) {
  v = std::min(std::max(v, 0.0f), 1.0f);
  return std::lround(v * 255.0f) / 255.0f;
}

void push_tri(std::vector<Tri>& out, const Vec3& a, const Vec3& b, const Vec3& c,
              const float rgb[3], int id) {
  Tri t;
  t.a = a;
  t.b = b;
  t.c = c;
  t.rgb[0] = rgb[0];
  t.rgb[1] = rgb[1];
  t.rgb[2] = rgb[2];
  t.id = id;
  out.push_back(t);
}

// Upright box: footprint dims.x along the theta direction, dims.y across,
// height dims.z starting at z_base. Bottom face optional (skipped for bodies
// resting on the table to avoid coplanar fighting with the table quad).
void push_box(std::vector<Tri>& out, const Vec2& center, double z_base, const Vec3& dims,
              double theta, const float rgb[3], int id, bool bottom) {
  double c = std::cos(theta), s = std::sin(theta);
  double hl = 0.5 * dims.x, hw = 0.5 * dims.y;
  auto corner = [&](double lx, double ly, double z) -> Vec3 {
    return {center.x + lx * c - ly * s, center.y + lx * s + ly * c, z};
  };
  double z0 = z_base, z1 = z_base + dims.z;
  Vec3 A0 = corner(-hl, -hw, z0), B0 = corner(hl, -hw, z0), C0 = corner(hl, hw, z0),
       D0 = corner(-hl, hw, z0);
  Vec3 A1 = corner(-hl, -hw, z1), B1 = corner(hl, -hw, z1), C1 = corner(hl, hw, z1),
       D1 = corner(-hl, hw, z1);
  // top
  push_tri(out, A1, B1, C1, rgb, id);
  push_tri(out, A1, C1, D1, rgb, id);
  // sides, outward normals
  push_tri(out, A0, B0, B1, rgb, id);
  push_tri(out, A0, B1, A1, rgb, id);
  push_tri(out, B0, C0, C1, rgb, id);
  push_tri(out, B0, C1, B1, rgb, id);
  push_tri(out, C0, D0, D1, rgb, id);
  push_tri(out, C0, D1, C1, rgb, id);
  push_tri(out, D0, A0, A1, rgb, id);
  push_tri(out, D0, A1, D1, rgb, id);
  if (bottom) {
    push_tri(out, A0, C0, B0, rgb, id);
    push_tri(out, A0, D0, C0, rgb, id);
  }
}

// Octagonal prism standing in for a disc.
void push_prism(std::vector<Tri>& out, const Vec2& center, double z_base, double diameter,
                double height, double theta, const float rgb[3], int id, bool bottom) {
  constexpr int N = 8;
  double r = 0.5 * diameter;
  Vec3 bot[N], top[N];
  for (int k = 0; k < N; ++k) {
    double a = theta + 2.0 * M_PI * k / N;
    bot[k] = {center.x + r * std::cos(a), center.y + r * std::sin(a), z_base};
    top[k] = bot[k];
    top[k].z = z_base + height;
  }
  for (int k = 0; k < N; ++k) {
    int k1 = (k + 1) % N;
    push_tri(out, bot[k], bot[k1], top[k1], rgb, id);
    push_tri(out, bot[k], top[k1], top[k], rgb, id);
  }
  for (int k = 1; k + 1 < N; ++k) push_tri(out, top[0], top[k], top[k + 1], rgb, id);
  if (bottom)
    for (int k = 1; k + 1 < N; ++k) push_tri(out, bot[0], bot[k + 1], bot[k], rgb, id);
}

void push_quad_z(std::vector<Tri>& out, double x0, double y0, double x1, double y1, double z,
                 const float rgb[3], int id) {
  Vec3 A{x0, y0, z}, B{x1, y0, z}, C{x1, y1, z}, D{x0, y1, z};
  push_tri(out, A, B, C, rgb, id);
  push_tri(out, A, C, D, rgb, id);
}

}  // namespace

std::vector<Tri> world_triangles(const SceneSpec& scene, const WorldState& w) {
  std::vector<Tri> tris;
  tris.reserve(32 + 24 * scene.objects.size());

  push_quad_z(tris, -0.45, -0.40, 0.45, 0.40, 0.0, kTableRgb, kIdTable);

  float pad_rgb[3];
  color_rgb(scene.goal.color_id, pad_rgb);
  for (float& v : pad_rgb) v *= 0.8f;
  push_quad_z(tris, scene.goal.center.x - scene.goal.half, scene.goal.center.y - scene.goal.half,
              scene.goal.center.x + scene.goal.half, scene.goal.center.y + scene.goal.half,
              0.0015, pad_rgb, kIdGoalPad);

  for (size_t i = 0; i < scene.objects.size(); ++i) {
    const ObjectSpec& o = scene.objects[i];
    float rgb[3];
    color_rgb(o.color_id, rgb);
    Vec2 c{w.obj_pos[i].x, w.obj_pos[i].y};
    double z_base = w.obj_pos[i].z;
    double theta = w.obj_theta[i];
    bool floating = z_base > 0.001;
    int id = static_cast<int>(i);
    if (o.shape == Shape::Disc)
      push_prism(tris, c, z_base, o.dims.x, o.dims.z, theta, rgb, id, floating);
    else
      push_box(tris, c, z_base, o.dims, theta, rgb, id, floating);
  }

  // Parallel-jaw gripper: two finger plates plus a crossbar.
  const RobotState& g = w.grip;
  double aperture = g.open_frac * kMaxAperture;
  double nx = std::cos(g.yaw), ny = std::sin(g.yaw);
  constexpr double kFingerT = 0.008, kFingerW = 0.024, kFingerH = 0.045, kBarH = 0.014;
  double off = 0.5 * aperture + 0.5 * kFingerT;
  Vec2 fA{g.pos.x + nx * off, g.pos.y + ny * off};
  Vec2 fB{g.pos.x - nx * off, g.pos.y - ny * off};
  // Finger long axis lies across the closing direction.
  push_box(tris, fA, g.pos.z, {kFingerW, kFingerT, kFingerH}, g.yaw + M_PI / 2, kGripperRgb,
           kIdGripperBase, true);
  push_box(tris, fB, g.pos.z, {kFingerW, kFingerT, kFingerH}, g.yaw + M_PI / 2, kGripperRgb,
           kIdGripperBase + 1, true);
  push_box(tris, {g.pos.x, g.pos.y}, g.pos.z + kFingerH, {aperture + 2 * kFingerT, kFingerW, kBarH},
           g.yaw, kGripperRgb, kIdGripperBase + 2, true);

  return tris;
}

void rasterize(const std::vector<Tri>& tris, const CameraRig& rig, double baseline_shift,
               float* rgb, float* depth, int16_t* ids) {
  const int H = rig.H, W = rig.W;
  for (const Tri& t : tris) {
    double u0, v0, z0, u1, v1, z1, u2, v2, z2;
    rig.project(t.a, baseline_shift, u0, v0, z0);
    rig.project(t.b, baseline_shift, u1, v1, z1);
    rig.project(t.c, baseline_shift, u2, v2, z2);
    if (z0 < kNearClip || z1 < kNearClip || z2 < kNearClip) continue;

    Vec3 n = normalize(cross(t.b - t.a, t.c - t.a));
    double shade = 0.35 + 0.65 * std::max(0.0, dot(n, kLightDir));
    float face[3] = {quantize(float(t.rgb[0] * shade)), quantize(float(t.rgb[1] * shade)),
                     quantize(float(t.rgb[2] * shade))};

    // Pixel centers are at (x+0.5, y+0.5).
    int px0 = std::max(0, int(std::ceil(std::min({u0, u1, u2}) - 0.5)));
    int px1 = std::min(W - 1, int(std::floor(std::max({u0, u1, u2}) - 0.5)));
    int py0 = std::max(0, int(std::ceil(std::min({v0, v1, v2}) - 0.5)));
    int py1 = std::min(H - 1, int(std::floor(std::max({v0, v1, v2}) - 0.5)));
    if (px0 > px1 || py0 > py1) continue;

    double denom = (v1 - v2) * (u0 - u2) + (u2 - u1) * (v0 - v2);
    if (std::abs(denom) < 1e-12) continue;
    double inv = 1.0 / denom;
    double w0 = 1.0 / z0, w1 = 1.0 / z1, w2 = 1.0 / z2;

    for (int y = py0; y <= py1; ++y) {
      double pyc = y + 0.5;
      for (int x = px0; x <= px1; ++x) {
        double pxc = x + 0.5;
        double l0 = ((v1 - v2) * (pxc - u2) + (u2 - u1) * (pyc - v2)) * inv;
        double l1 = ((v2 - v0) * (pxc - u2) + (u0 - u2) * (pyc - v2)) * inv;
        double l2 = 1.0 - l0 - l1;
        if (l0 < 0 || l1 < 0 || l2 < 0) continue;
        // 1/z interpolates linearly in screen space (perspective-correct).
        double z = 1.0 / (l0 * w0 + l1 * w1 + l2 * w2);
        int idx = y * W + x;
        if (z < depth[idx]) {
          depth[idx] = float(z);
          ids[idx] = int16_t(t.id);
          rgb[idx * 3 + 0] = face[0];
          rgb[idx * 3 + 1] = face[1];
          rgb[idx * 3 + 2] = face[2];
        }
      }
    }
  }
}

StereoFrame render_stereo(const SceneSpec& scene, const WorldState& w, const CameraRig& rig) {
  // Degenerate-rig guard: neither camera center may sit inside an object's
  // bounding sphere or below the table safety height.
  for (double shift : {0.0, rig.b}) {
    Vec3 cam = rig.pos + rig.right * shift;
    if (cam.z < 0.05) throw std::runtime_error("render_stereo: camera below table safety height");
    for (size_t i = 0; i < scene.objects.size(); ++i) {
      const ObjectSpec& o = scene.objects[i];
      Vec3 center{w.obj_pos[i].x, w.obj_pos[i].y, w.obj_pos[i].z + 0.5 * o.dims.z};
      if (norm(cam - center) < 0.5 * norm(o.dims))
        throw std::runtime_error("render_stereo: camera inside object " + std::to_string(i));
    }
  }

  StereoFrame fr;
  fr.H = rig.H;
  fr.W = rig.W;
  fr.rig = rig;
  const int n = rig.H * rig.W;
  const float bg[3] = {quantize(kBackgroundRgb[0]), quantize(kBackgroundRgb[1]),
                       quantize(kBackgroundRgb[2])};
  auto fill = [&](std::vector<float>& img) {
    img.resize(size_t(n) * 3);
    for (int i = 0; i < n; ++i) {
      img[i * 3 + 0] = bg[0];
      img[i * 3 + 1] = bg[1];
      img[i * 3 + 2] = bg[2];
    }
  };
  fill(fr.left);
  fill(fr.right);
  fr.depth.assign(n, float(kBackgroundDepth));
  fr.ids.assign(n, int16_t(kIdBackground));

  std::vector<Tri> tris = world_triangles(scene, w);
  rasterize(tris, rig, 0.0, fr.left.data(), fr.depth.data(), fr.ids.data());

  std::vector<float> rdepth(n, float(kBackgroundDepth));
  std::vector<int16_t> rids(n, int16_t(kIdBackground));
  rasterize(tris, rig, rig.b, fr.right.data(), rdepth.data(), rids.data());

  fr.disparity.resize(n);
  for (int i = 0; i < n; ++i) fr.disparity[i] = float(rig.f * rig.b / fr.depth[i]);

  fr.object_boxes.assign(scene.objects.size(), BBox{});
  for (int y = 0; y < rig.H; ++y)
    for (int x = 0; x < rig.W; ++x) {
      int id = fr.ids[y * rig.W + x];
      if (id >= 0 && id < int(scene.objects.size()))
        fr.object_boxes[id].expand(x, y);
      else if (id >= kIdGripperBase)
        fr.gripper_box.expand(x, y);
    }
  return fr;
}

}  // namespace svla
