#include <array>
#include <cmath>
#include <stdexcept>

#include "svla/scenegen.hpp"

namespace svla {

// ---------------------------------------------------------------------------
// Cameras

CameraRig CameraRig::look_at(const Vec3& pos, const Vec3& target, double f, double b, int H,
                             int W, double cx, double cy) {
  CameraRig rig;
  rig.pos = pos;
  rig.f = f;
  rig.b = b;
  rig.H = H;
  rig.W = W;
  rig.cx = cx;
  rig.cy = cy;
  rig.fwd = normalize(target - pos);
  Vec3 up{0, 0, 1};
  if (std::abs(dot(rig.fwd, up)) > 0.999) up = {0, 1, 0};  // looking straight down
  rig.right = normalize(cross(rig.fwd, up));
  rig.down = cross(rig.fwd, rig.right);
  return rig;
}

void CameraRig::project(const Vec3& p, double shift, double& u, double& v, double& z) const {
  Vec3 rel = p - pos;
  double xc = dot(rel, right) - shift;
  double yc = dot(rel, down);
  z = dot(rel, fwd);
  u = f * xc / z + cx;
  v = f * yc / z + cy;
}

namespace {
const Vec3 kWorkspaceCenter{0, 0, 0.03};
const Vec3 kNominalCamPos{0, -0.55, 0.45};
constexpr double kNominalF64 = 80.0;   // pixels at 64x64
constexpr double kNominalB = 0.063;    // meters
}  // namespace

RandomizationShell shell_for(ShellLevel level) {
  RandomizationShell s;
  s.level = level;
  s.anchor = kNominalCamPos;
  switch (level) {
    case ShellLevel::Small:
      s.extent = {0.15, 0.10, 0.15};
      break;
    case ShellLevel::Medium:
      s.extent = {0.45, 0.20, 0.30};
      break;
    case ShellLevel::Large:
      s.extent = {1.50, 0.50, 0.60};
      break;
  }
  return s;
}

const char* shell_name(ShellLevel level) {
  switch (level) {
    case ShellLevel::Small: return "small";
    case ShellLevel::Medium: return "medium";
    case ShellLevel::Large: return "large";
  }
  return "?";
}

ShellLevel shell_from_name(const std::string& name) {
  if (name == "small") return ShellLevel::Small;
  if (name == "medium") return ShellLevel::Medium;
  if (name == "large") return ShellLevel::Large;
  throw std::invalid_argument("unknown shell level: " + name);
}

CameraRig sample_camera_rig(const RandomizationShell& shell, Rng& rng, int image_size) {
  Vec3 p = shell.anchor;
  p.x += rng.uniform(-0.5, 0.5) * shell.extent.x;
  p.y += rng.uniform(-0.5, 0.5) * shell.extent.y;
  p.z += rng.uniform(-0.5, 0.5) * shell.extent.z;
  p.z = std::max(p.z, 0.12);
  double scale = image_size / 64.0;
  double f = kNominalF64 * scale * (1.0 + rng.uniform(-0.05, 0.05));
  double b = kNominalB * (1.0 + rng.uniform(-0.05, 0.05));
  double cx = 0.5 * image_size * (1.0 + rng.uniform(-0.05, 0.05));
  double cy = 0.5 * image_size * (1.0 + rng.uniform(-0.05, 0.05));
  return CameraRig::look_at(p, kWorkspaceCenter, f, b, image_size, image_size, cx, cy);
}

// ---------------------------------------------------------------------------
// Scenes

namespace {

const std::array<std::array<float, 3>, 8> kPalette{{
    {0.85f, 0.15f, 0.15f},  // red
    {0.12f, 0.70f, 0.20f},  // green
    {0.15f, 0.25f, 0.85f},  // blue
    {0.90f, 0.85f, 0.10f},  // yellow
    {0.80f, 0.15f, 0.80f},  // magenta
    {0.10f, 0.75f, 0.80f},  // cyan
    {0.95f, 0.55f, 0.10f},  // orange
    {0.50f, 0.20f, 0.70f},  // purple
}};
const std::array<const char*, 8> kColorNames{
    {"red", "green", "blue", "yellow", "magenta", "cyan", "orange", "purple"}};

Vec3 object_dims(Shape shape, SizeClass cls, double s) {
  switch (shape) {
    case Shape::Bar:
      if (cls == SizeClass::Small) return {s, 0.4 * s, 0.4 * s};  // whole object 1-2 cm
      return {std::min(3.0 * s, 0.12), s, std::min(s, 0.03)};
    case Shape::Cube:
      return {s, s, s};
    case Shape::Disc:
      return {s, s, cls == SizeClass::Small ? 0.4 * s : 0.5 * s};
  }
  return {s, s, s};
}

double size_scale(SizeClass cls, Rng& rng) {
  switch (cls) {
    case SizeClass::Small: return rng.uniform(0.010, 0.020);
    case SizeClass::Medium: return rng.uniform(0.030, 0.050);
    case SizeClass::Large: return rng.uniform(0.060, 0.080);
  }
  return 0.04;
}

}  // namespace

const char* shape_name(Shape s) {
  switch (s) {
    case Shape::Bar: return "bar";
    case Shape::Cube: return "cube";
    case Shape::Disc: return "disc";
  }
  return "?";
}

const char* family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::General: return "general";
    case TaskFamily::Bar0: return "bar0";
    case TaskFamily::Bar45: return "bar45";
    case TaskFamily::Bar90: return "bar90";
    case TaskFamily::Medium: return "medium";
    case TaskFamily::Small: return "small";
  }
  return "?";
}

TaskFamily family_from_name(const std::string& name) {
  for (TaskFamily f : {TaskFamily::General, TaskFamily::Bar0, TaskFamily::Bar45,
                       TaskFamily::Bar90, TaskFamily::Medium, TaskFamily::Small})
    if (name == family_name(f)) return f;
  throw std::invalid_argument("unknown task family: " + name);
}

const char* color_name(int color_id) { return kColorNames.at(color_id); }
int color_count() { return static_cast<int>(kPalette.size()); }
void color_rgb(int color_id, float rgb[3]) {
  const auto& c = kPalette.at(color_id);
  rgb[0] = c[0];
  rgb[1] = c[1];
  rgb[2] = c[2];
}

double ObjectSpec::grasp_width(double psi) const {
  if (shape == Shape::Disc) return dims.x;  // diameter, any closing direction
  double th = theta_deg * M_PI / 180.0;
  // Support width of the rotated rectangle footprint along (cos psi, sin psi).
  double c = std::abs(std::cos(psi - th));
  double s = std::abs(std::sin(psi - th));
  return dims.x * c + dims.y * s;
}

SceneSpec sample_scene(TaskFamily family, double difficulty, uint64_t seed,
                       const SceneGenConfig& cfg) {
  difficulty = std::clamp(difficulty, 0.0, 1.0);
  Rng rng(seed_combine(seed, 0x5ce11e));

  SceneSpec scene;
  scene.family = family;
  scene.seed = seed;

  // Target object per family.
  ObjectSpec target;
  switch (family) {
    case TaskFamily::Bar0:
    case TaskFamily::Bar45:
    case TaskFamily::Bar90:
      target.shape = Shape::Bar;
      target.size_class = SizeClass::Medium;
      target.theta_deg = family == TaskFamily::Bar0 ? 0 : family == TaskFamily::Bar45 ? 45 : 90;
      break;
    case TaskFamily::Small:
      target.shape = static_cast<Shape>(rng.uniform_int(0, 2));
      target.size_class = SizeClass::Small;
      target.theta_deg = 45.0 * rng.uniform_int(0, 2);
      break;
    case TaskFamily::Medium:
    case TaskFamily::General:
      target.shape = static_cast<Shape>(rng.uniform_int(0, 2));
      target.size_class = SizeClass::Medium;
      target.theta_deg = 45.0 * rng.uniform_int(0, 2);
      break;
  }
  target.color_id = static_cast<int>(rng.uniform_int(0, color_count() - 1));
  target.dims = object_dims(target.shape, target.size_class, size_scale(target.size_class, rng));

  int n_distractors = std::clamp(1 + static_cast<int>(std::lround(difficulty * 3)), 1, 4);
  std::vector<ObjectSpec> objs{target};
  for (int i = 0; i < n_distractors; ++i) {
    ObjectSpec d;
    d.shape = static_cast<Shape>(rng.uniform_int(0, 2));
    d.size_class = rng.uniform() < 0.3 ? SizeClass::Small : SizeClass::Medium;
    d.theta_deg = 45.0 * rng.uniform_int(0, 2);
    // Keep the (color, shape) pair unique so the instruction is unambiguous.
    do {
      d.color_id = static_cast<int>(rng.uniform_int(0, color_count() - 1));
    } while (d.color_id == target.color_id && d.shape == target.shape);
    d.dims = object_dims(d.shape, d.size_class, size_scale(d.size_class, rng));
    objs.push_back(d);
  }

  GoalRegion goal;
  goal.half = std::max(0.045, 0.6 * std::hypot(target.dims.x, target.dims.y));
  do {
    goal.color_id = static_cast<int>(rng.uniform_int(0, color_count() - 1));
  } while (goal.color_id == target.color_id);

  // Rejection placement: pad first, then objects, pairwise clearance 2 cm.
  double hx = 0.5 * cfg.workspace_x, hy = 0.5 * cfg.workspace_y;
  auto place_all = [&]() -> bool {
    double gx = hx - goal.half - 0.01, gy = hy - goal.half - 0.01;
    if (gx <= 0 || gy <= 0) return false;
    goal.center = {rng.uniform(-gx, gx), rng.uniform(-gy, gy)};
    for (size_t i = 0; i < objs.size(); ++i) {
      double r = objs[i].bound_radius();
      double px = hx - r - 0.005, py = hy - r - 0.005;
      if (px <= 0 || py <= 0) return false;
      bool ok = false;
      for (int attempt = 0; attempt < 60 && !ok; ++attempt) {
        Vec2 p{rng.uniform(-px, px), rng.uniform(-py, py)};
        ok = true;
        for (size_t j = 0; j < i; ++j) {
          double need = r + objs[j].bound_radius() + 0.02;
          if (std::hypot(p.x - objs[j].pos.x, p.y - objs[j].pos.y) < need) ok = false;
        }
        // The target must start outside the pad; distractors may not sit on it.
        double pad_need = goal.half + r + 0.02;
        if (std::max(std::abs(p.x - goal.center.x), std::abs(p.y - goal.center.y)) < pad_need)
          ok = false;
        if (ok) objs[i].pos = p;
      }
      if (!ok) return false;
    }
    return true;
  };

  bool placed = false;
  for (int round = 0; round < cfg.max_retries && !placed; ++round) placed = place_all();
  if (!placed)
    throw std::runtime_error("sample_scene: unsatisfiable placement for family " +
                             std::string(family_name(family)));

  scene.objects = std::move(objs);
  scene.target_index = 0;
  scene.goal = goal;
  scene.instruction = std::string("place the ") + color_name(target.color_id) + " " +
                      shape_name(target.shape) + " on the " + color_name(goal.color_id) + " pad";
  return scene;
}

// ---------------------------------------------------------------------------
// Simulation state

WorldState init_world(const SceneSpec& scene) {
  WorldState w;
  for (const auto& o : scene.objects) {
    w.obj_pos.push_back({o.pos.x, o.pos.y, 0.0});
    w.obj_theta.push_back(o.theta_deg * M_PI / 180.0);
  }
  w.grip = scene.gripper_home;
  w.peak_open = w.grip.open_frac;
  return w;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::WrongObject: return "wrong_object";
    case Outcome::EarlyClose: return "early_close";
    case Outcome::MissedGrasp: return "missed_grasp";
    case Outcome::Drop: return "drop";
    case Outcome::Timeout: return "timeout";
    case Outcome::RuleViolation: return "rule_violation";
    case Outcome::Infeasible: return "infeasible";
  }
  return "?";
}

int count_events(const WorldState& w, bool close) {
  int n = 0;
  for (const auto& e : w.events) n += (e.close == close);
  return n;
}

}  // namespace svla
