#include <cmath>

#include "svla/auxtasks.hpp"
#include "svla/scenegen.hpp"

namespace svla {

namespace {

constexpr double kMaxStepXYZ = 0.025;  // meters per 10 Hz step
constexpr double kMaxStepYaw = 0.20;   // radians per step
constexpr double kGripSlew = 0.30;     // open-fraction change per step
constexpr double kCloseThresh = 0.40;  // close event fires crossing below
constexpr double kOpenThresh = 0.60;   // open event fires crossing above
constexpr double kReachX = 0.28, kReachY = 0.23, kZMin = 0.002, kZMax = 0.50;

double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Kinematic grasp test at a close event, using the aperture the closing sweep
// started from. Returns the grabbed object index or -1.
int resolve_grasp(const WorldState& w, const SceneSpec& scene, double a_eval, bool& aligned) {
  double nx = std::cos(w.grip.yaw), ny = std::sin(w.grip.yaw);
  double tx = -ny, ty = nx;
  int best = -1;
  double best_d = 1e9;
  aligned = false;
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    const ObjectSpec& o = scene.objects[i];
    if (w.obj_pos[i].z > 0.001) continue;  // not resting on the table
    double dx = w.obj_pos[i].x - w.grip.pos.x;
    double dy = w.obj_pos[i].y - w.grip.pos.y;
    double dist = std::hypot(dx, dy);
    if (dist <= 0.06 && w.grip.pos.z <= 0.12) aligned = true;
    double wc = o.grasp_width(w.grip.yaw);
    if (a_eval < wc + 0.001) continue;                       // jaws cannot clear the object
    if (std::abs(dx * nx + dy * ny) > 0.5 * a_eval) continue;  // off-center across the jaws
    if (std::abs(dx * tx + dy * ty) > 0.02) continue;          // beyond the finger plates
    double h = o.dims.z;
    if (w.grip.pos.z > 0.75 * h || w.grip.pos.z < 0.001) continue;  // outside graspable band
    if (dist < best_d) {
      best_d = dist;
      best = int(i);
    }
  }
  return best;
}

}  // namespace

void step_world(WorldState& w, const SceneSpec& scene, const Action& a) {
  double dx = clampd(a.dx, -kMaxStepXYZ, kMaxStepXYZ);
  double dy = clampd(a.dy, -kMaxStepXYZ, kMaxStepXYZ);
  double dz = clampd(a.dz, -kMaxStepXYZ, kMaxStepXYZ);
  double dyaw = clampd(a.dyaw, -kMaxStepYaw, kMaxStepYaw);
  double gcmd = clampd(a.g, 0.0, 1.0);

  w.grip.pos.x = clampd(w.grip.pos.x + dx, -kReachX, kReachX);
  w.grip.pos.y = clampd(w.grip.pos.y + dy, -kReachY, kReachY);
  w.grip.pos.z = clampd(w.grip.pos.z + dz, kZMin, kZMax);
  w.grip.yaw = wrap_angle(w.grip.yaw + dyaw);

  double g_old = w.grip.open_frac;
  double g_new = g_old + clampd(gcmd - g_old, -kGripSlew, kGripSlew);
  w.grip.open_frac = g_new;
  w.peak_open = std::max(w.peak_open, g_new);

  if (g_old >= kCloseThresh && g_new < kCloseThresh) {
    SimEvent ev;
    ev.step = w.step;
    ev.close = true;
    ev.grip_z = w.grip.pos.z;
    if (w.held < 0) {
      double a_eval = w.peak_open * kMaxAperture;
      ev.grasped = resolve_grasp(w, scene, a_eval, ev.aligned);
      if (ev.grasped >= 0) {
        w.held = ev.grasped;
        double c = std::cos(-w.grip.yaw), s = std::sin(-w.grip.yaw);
        double rx = w.obj_pos[w.held].x - w.grip.pos.x;
        double ry = w.obj_pos[w.held].y - w.grip.pos.y;
        w.held_offset = {rx * c - ry * s, rx * s + ry * c, w.obj_pos[w.held].z - w.grip.pos.z};
        w.held_dtheta = w.obj_theta[w.held] - w.grip.yaw;
        w.grasp_z = w.grip.pos.z;
        w.max_lift = w.grip.pos.z;
      }
    }
    w.events.push_back(ev);
    w.peak_open = g_new;
  } else if (g_old <= kOpenThresh && g_new > kOpenThresh) {
    SimEvent ev;
    ev.step = w.step;
    ev.close = false;
    ev.grip_z = w.grip.pos.z;
    if (w.held >= 0) {
      w.obj_pos[w.held].z = 0;  // settle onto the table at the release point
      w.held = -1;
    }
    w.events.push_back(ev);
    w.peak_open = g_new;
  }

  if (w.held >= 0) {
    double c = std::cos(w.grip.yaw), s = std::sin(w.grip.yaw);
    w.obj_pos[w.held].x = w.grip.pos.x + w.held_offset.x * c - w.held_offset.y * s;
    w.obj_pos[w.held].y = w.grip.pos.y + w.held_offset.x * s + w.held_offset.y * c;
    w.obj_pos[w.held].z = std::max(0.0, w.grip.pos.z + w.held_offset.z);
    w.obj_theta[w.held] = wrap_angle(w.grip.yaw + w.held_dtheta);
    w.max_lift = std::max(w.max_lift, w.grip.pos.z);
  }
  ++w.step;
}

Outcome score_episode(const WorldState& w, const SceneSpec& scene, bool timed_out) {
  int closes = count_events(w, true);
  int opens = count_events(w, false);
  if (closes >= 2 || opens >= 2) return Outcome::RuleViolation;
  if (closes == 0) return Outcome::Timeout;

  const SimEvent* close_ev = nullptr;
  for (const auto& e : w.events)
    if (e.close) {
      close_ev = &e;
      break;
    }
  if (close_ev->grasped < 0)
    return close_ev->aligned ? Outcome::MissedGrasp : Outcome::EarlyClose;
  if (close_ev->grasped != scene.target_index) return Outcome::WrongObject;
  if (opens == 0) return Outcome::Timeout;
  if (w.max_lift - w.grasp_z < 0.05) return Outcome::MissedGrasp;  // grasp never confirmed

  const Vec3& p = w.obj_pos[scene.target_index];
  bool on_pad = std::abs(p.x - scene.goal.center.x) <= scene.goal.half &&
                std::abs(p.y - scene.goal.center.y) <= scene.goal.half && p.z < 0.001;
  if (on_pad) return Outcome::Success;
  return timed_out ? Outcome::Timeout : Outcome::Drop;
}

EpisodeRecord expert_rollout(const SceneSpec& scene, const CameraRig& rig, Rng& rng,
                             const SimConfig& cfg) {
  EpisodeRecord rec;
  rec.scene = scene;
  rec.rig = rig;

  WorldState w = init_world(scene);
  w.grip.pos.x += rng.uniform(-0.01, 0.01);
  w.grip.pos.y += rng.uniform(-0.01, 0.01);
  w.grip.pos.z += rng.uniform(-0.01, 0.01);

  const ObjectSpec& tgt = scene.objects[scene.target_index];
  double h = tgt.dims.z;

  // Reachability of the required poses (always satisfied in-workspace; kept as
  // an explicit contract).
  auto reachable = [](double x, double y) {
    return std::abs(x) <= kReachX && std::abs(y) <= kReachY;
  };
  if (!reachable(tgt.pos.x, tgt.pos.y) || !reachable(scene.goal.center.x, scene.goal.center.y)) {
    rec.outcome = Outcome::Infeasible;
    return rec;
  }

  // Grasp yaw: close across the object's short axis, using the pi-symmetric
  // equivalent nearest the current yaw. Discs are yaw-free.
  double psi = w.grip.yaw;
  if (tgt.shape != Shape::Disc) {
    double base = wrap_angle(tgt.theta_deg * M_PI / 180.0 + M_PI / 2);
    double alt = wrap_angle(base + M_PI);
    psi = std::abs(wrap_angle(base - w.grip.yaw)) <= std::abs(wrap_angle(alt - w.grip.yaw)) ? base
                                                                                            : alt;
  }

  const double z_hover = 0.16;
  const double z_grasp = std::max(0.30 * h, 0.0025);
  const double z_place = z_grasp + 0.004;

  struct Phase {
    RobotState pose;   // position + yaw target; open_frac is the gripper command
    bool grip_phase;   // completes on open_frac threshold instead of pose
    double grip_done;  // threshold for grip phases (<= for close, >= for open)
    bool closing;
  };
  std::vector<Phase> phases;
  auto add_move = [&](double x, double y, double z, double yaw, double g) {
    phases.push_back({{{x, y, z}, yaw, g}, false, 0, false});
  };
  add_move(tgt.pos.x, tgt.pos.y, z_hover, psi, 1);                      // approach
  add_move(tgt.pos.x, tgt.pos.y, z_grasp, psi, 1);                      // descend
  phases.push_back({{{tgt.pos.x, tgt.pos.y, z_grasp}, psi, 0}, true, 0.05, true});   // close
  add_move(tgt.pos.x, tgt.pos.y, z_hover, psi, 0);                      // lift
  add_move(scene.goal.center.x, scene.goal.center.y, z_hover, psi, 0);  // transport
  if (h < 0.035)
    add_move(scene.goal.center.x, scene.goal.center.y, z_place, psi, 0);  // place-descend
  double z_open = h < 0.035 ? z_place : z_hover;
  phases.push_back(
      {{{scene.goal.center.x, scene.goal.center.y, z_open}, psi, 1}, true, 0.95, false});  // open

  std::vector<RobotState> keyframe_at_step;  // active phase target per sim step
  size_t phase_idx = 0;
  bool timed_out = false;
  std::vector<int> snapshot_steps;

  auto snapshot = [&](int sim_step) {
    EpisodeStep st;
    st.sim_step = sim_step;
    st.frame = render_stereo(scene, w, rig);
    st.state = w.grip;
    st.keyframe = phases[std::min(phase_idx, phases.size() - 1)].pose;
    st.target_box = st.frame.object_boxes[scene.target_index];
    st.gripper_box = st.frame.gripper_box;
    st.region = interaction_region(st.gripper_box, st.target_box, 2, st.frame.W, st.frame.H);
    Rng qrng(seed_combine(scene.seed, uint64_t(sim_step), 0xdeca));
    st.queries = sample_depth_queries(st.region, st.frame.depth, st.frame.W, st.frame.H,
                                      cfg.queries_per_step, DepthMode::Interaction, qrng);
    rec.steps.push_back(std::move(st));
    snapshot_steps.push_back(sim_step);
  };

  while (phase_idx < phases.size()) {
    if (w.step >= cfg.max_steps) {
      timed_out = true;
      break;
    }
    if (w.step % kChunkLen == 0) snapshot(w.step);

    const Phase& ph = phases[phase_idx];
    Action a;
    a.dx = ph.pose.pos.x - w.grip.pos.x;
    a.dy = ph.pose.pos.y - w.grip.pos.y;
    a.dz = ph.pose.pos.z - w.grip.pos.z;
    a.dyaw = wrap_angle(ph.pose.yaw - w.grip.yaw);
    a.g = ph.pose.open_frac;
    a.dx = clampd(a.dx, -kMaxStepXYZ, kMaxStepXYZ);
    a.dy = clampd(a.dy, -kMaxStepXYZ, kMaxStepXYZ);
    a.dz = clampd(a.dz, -kMaxStepXYZ, kMaxStepXYZ);
    a.dyaw = clampd(a.dyaw, -kMaxStepYaw, kMaxStepYaw);

    step_world(w, scene, a);
    rec.actions.push_back(a);

    bool done;
    if (ph.grip_phase)
      done = ph.closing ? w.grip.open_frac <= ph.grip_done : w.grip.open_frac >= ph.grip_done;
    else
      done = std::abs(ph.pose.pos.x - w.grip.pos.x) < 0.0015 &&
             std::abs(ph.pose.pos.y - w.grip.pos.y) < 0.0015 &&
             std::abs(ph.pose.pos.z - w.grip.pos.z) < 0.0015 &&
             std::abs(wrap_angle(ph.pose.yaw - w.grip.yaw)) < 0.02;
    if (done) ++phase_idx;
  }

  rec.total_steps = w.step;
  rec.keyframe_count = int(phases.size());
  rec.outcome = score_episode(w, scene, timed_out);

  // Attach the executed chunk to each snapshot, padding the tail with holds.
  for (auto& st : rec.steps) {
    st.chunk.resize(kChunkLen);
    for (int k = 0; k < kChunkLen; ++k) {
      size_t idx = size_t(st.sim_step) + k;
      if (idx < rec.actions.size()) {
        st.chunk[k] = rec.actions[idx];
      } else {
        Action hold;
        hold.g = rec.actions.empty() ? 1.0 : rec.actions.back().g;
        st.chunk[k] = hold;
      }
    }
  }
  return rec;
}

}  // namespace svla
