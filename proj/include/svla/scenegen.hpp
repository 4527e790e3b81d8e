#pragma once

#include <string>
#include <vector>

#include "svla/geometry.hpp"
#include "svla/rng.hpp"

namespace svla {

// ---------------------------------------------------------------------------
// Cameras

// Rectified pinhole stereo rig. The right camera is the left one translated by
// `b` meters along the camera x-axis with identical orientation, so a surface
// point at camera depth z appears at horizontal offset d = f*b/z between views.
struct CameraRig {
  double f = 80, cx = 32, cy = 32;  // pixels
  double b = 0.063;                 // baseline, meters
  int H = 64, W = 64;
  Vec3 pos;                 // left camera center, world
  Vec3 right, down, fwd;    // orthonormal camera basis in world coordinates

  static CameraRig look_at(const Vec3& pos, const Vec3& target, double f, double b, int H, int W,
                           double cx, double cy);

  // World point -> (u, v, camera depth z) for the left (shift=0) or right
  // (shift=b) camera.
  void project(const Vec3& p, double shift, double& u, double& v, double& z) const;
};

enum class ShellLevel { Small, Medium, Large };

// Camera-pose randomization region: a cuboid of positions centered on the
// nominal front-camera anchor. Orientation always re-aims at the workspace.
struct RandomizationShell {
  ShellLevel level = ShellLevel::Small;
  Vec3 extent;  // full side lengths, meters
  Vec3 anchor;  // nominal camera position, world
};

RandomizationShell shell_for(ShellLevel level);
const char* shell_name(ShellLevel level);
ShellLevel shell_from_name(const std::string& name);

// Draws a rig pose uniformly inside the shell cuboid, re-aims at the workspace
// center, and jitters focal length / baseline / principal point within +-5% of
// nominal.
CameraRig sample_camera_rig(const RandomizationShell& shell, Rng& rng, int image_size = 64);

// ---------------------------------------------------------------------------
// Scenes

enum class Shape { Bar, Cube, Disc };
enum class SizeClass { Small, Medium, Large };
enum class TaskFamily { General, Bar0, Bar45, Bar90, Medium, Small };

const char* shape_name(Shape s);
const char* family_name(TaskFamily f);
TaskFamily family_from_name(const std::string& name);
const char* color_name(int color_id);
int color_count();
void color_rgb(int color_id, float rgb[3]);

struct ObjectSpec {
  Shape shape = Shape::Cube;
  SizeClass size_class = SizeClass::Medium;
  double theta_deg = 0;  // planar yaw of the long axis
  Vec2 pos;              // footprint center on the table plane
  int color_id = 0;
  Vec3 dims;  // length (long axis), width, height in meters

  double bound_radius() const { return 0.5 * std::hypot(dims.x, dims.y); }
  // Support width of the footprint along closing direction (cos psi, sin psi).
  double grasp_width(double psi) const;
};

struct GoalRegion {
  Vec2 center;
  double half = 0.05;  // half side of the square pad
  int color_id = 0;
};

struct RobotState {
  Vec3 pos;               // tool center point; z is fingertip bottom height
  double yaw = 0;         // closing axis direction (cos yaw, sin yaw)
  double open_frac = 1;   // aperture = open_frac * kMaxAperture
};

struct SceneSpec {
  std::vector<ObjectSpec> objects;
  int target_index = 0;
  GoalRegion goal;
  std::string instruction;
  TaskFamily family = TaskFamily::General;
  uint64_t seed = 0;
  RobotState gripper_home{{-0.18, -0.14, 0.22}, 0.0, 1.0};
};

struct SceneGenConfig {
  double workspace_x = 0.5;  // full extents, meters
  double workspace_y = 0.4;
  int max_retries = 200;
};

// Deterministic in (family, difficulty, seed). difficulty in [0,1] scales the
// distractor count from 1 up to 4. Throws if placement is unsatisfiable after
// bounded retries.
SceneSpec sample_scene(TaskFamily family, double difficulty, uint64_t seed,
                       const SceneGenConfig& cfg = {});

// ---------------------------------------------------------------------------
// Simulation

struct Action {
  double dx = 0, dy = 0, dz = 0, dyaw = 0;
  double g = 1;  // gripper command in [0,1]
};

inline constexpr int kChunkLen = 8;      // actions per chunk, 10 Hz steps
inline constexpr double kMaxAperture = 0.10;

struct SimEvent {
  int step = 0;
  bool close = false;   // close vs open event
  int grasped = -1;     // object index attached at a close event
  double grip_z = 0;    // gripper height when the event fired
  bool aligned = false; // close event happened at tabletop height near an object
};

struct WorldState {
  std::vector<Vec3> obj_pos;       // footprint center + base height (z)
  std::vector<double> obj_theta;   // radians
  RobotState grip;
  int held = -1;
  Vec3 held_offset;                // target-from-gripper offset at grasp, gripper frame
  double held_dtheta = 0;
  double grasp_z = 0;              // gripper height at the grasp
  double max_lift = 0;             // highest gripper z while holding
  double peak_open = 1;            // local max of open_frac since the last event
  int step = 0;
  std::vector<SimEvent> events;
};

WorldState init_world(const SceneSpec& scene);
// One 10 Hz step: clamped deltas, gripper slew, close/open event detection
// with hysteresis, kinematic grasp resolution.
void step_world(WorldState& w, const SceneSpec& scene, const Action& a);

int count_events(const WorldState& w, bool close);

// ---------------------------------------------------------------------------
// Rendering

struct Tri {
  Vec3 a, b, c;
  float rgb[3] = {1, 1, 1};
  int id = 0;  // ownership id written to the id buffer
};

// Id-buffer conventions.
inline constexpr int kIdBackground = -1;
inline constexpr int kIdTable = -2;
inline constexpr int kIdGoalPad = -3;
inline constexpr int kIdGripperBase = 1000;  // gripper parts use 1000..1002
inline constexpr double kBackgroundDepth = 5.0;

struct StereoFrame {
  int H = 0, W = 0;
  std::vector<float> left, right;      // H*W*3, row-major HWC, values k/255
  std::vector<float> depth;            // left-view z-buffer, meters
  std::vector<float> disparity;        // f*b/depth, pixels
  std::vector<int16_t> ids;            // left-view ownership ids
  CameraRig rig;
  std::vector<BBox> object_boxes;      // silhouette boxes per scene object
  BBox gripper_box;
};

// World geometry as a flat triangle list (table, pad, objects, gripper).
std::vector<Tri> world_triangles(const SceneSpec& scene, const WorldState& w);

// Z-buffer rasterization of an arbitrary triangle list into one view.
// Buffers are H*W(*3); depth must be pre-filled with the background depth.
void rasterize(const std::vector<Tri>& tris, const CameraRig& rig, double baseline_shift,
               float* rgb, float* depth, int16_t* ids);

// Full stereo render with ground truth. Throws if a camera center sits inside
// an object's bounding sphere or below the table safety height.
StereoFrame render_stereo(const SceneSpec& scene, const WorldState& w, const CameraRig& rig);

// ---------------------------------------------------------------------------
// Episodes

struct DepthQuery {
  int u = 0, v = 0;
  float depth = 0;  // gt_depth(u, v), meters
};

struct EpisodeStep {
  StereoFrame frame;
  RobotState state;
  std::vector<Action> chunk;   // next kChunkLen expert actions
  RobotState keyframe;         // current phase target pose
  BBox target_box, gripper_box;
  BBox region;                 // interaction region (union + margin, clipped)
  std::vector<DepthQuery> queries;
  int sim_step = 0;
};

enum class Outcome {
  Success,
  WrongObject,
  EarlyClose,
  MissedGrasp,
  Drop,
  Timeout,
  RuleViolation,
  Infeasible,
};
const char* outcome_name(Outcome o);

struct EpisodeRecord {
  SceneSpec scene;
  CameraRig rig;
  std::vector<EpisodeStep> steps;      // snapshots at chunk boundaries
  std::vector<Action> actions;         // every 10 Hz action
  Outcome outcome = Outcome::Timeout;
  int total_steps = 0;
  int keyframe_count = 0;              // phase boundaries of the demonstrator
};

struct SimConfig {
  int max_steps = 120;
  int queries_per_step = 4;
};

// Strict single-attempt scoring shared by the expert and the evaluator.
Outcome score_episode(const WorldState& final_world, const SceneSpec& scene, bool timed_out);

// Scripted pick-and-place demonstrator. Deterministic given (scene, rig, rng
// state); rng only jitters the home pose.
EpisodeRecord expert_rollout(const SceneSpec& scene, const CameraRig& rig, Rng& rng,
                             const SimConfig& cfg = {});

// ---------------------------------------------------------------------------
// Dataset IO

struct DatasetManifest {
  int version = 1;
  uint64_t base_seed = 0;
  std::string shell;
  std::vector<std::string> families;
  int episode_count = 0;
  int image_size = 64;
  double nominal_f = 80, nominal_b = 0.063;
};

void write_dataset(const std::vector<EpisodeRecord>& episodes, const std::string& dir,
                   const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& dir);
std::vector<EpisodeRecord> read_dataset(const std::string& dir);
EpisodeRecord read_episode(const std::string& path);

}  // namespace svla
