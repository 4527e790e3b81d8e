#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "svla/scenegen.hpp"
#include "svla/serialize.hpp"

namespace svla {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

BlobArray f64_blob(const std::string& name, const std::vector<double>& vals) {
  BlobArray b;
  b.name = name;
  b.dtype = BlobDType::U8;
  b.shape = {int(vals.size() * sizeof(double))};
  b.u8.resize(vals.size() * sizeof(double));
  std::memcpy(b.u8.data(), vals.data(), b.u8.size());
  return b;
}

std::vector<double> f64_unblob(const BlobArray& b) {
  std::vector<double> vals(b.u8.size() / sizeof(double));
  std::memcpy(vals.data(), b.u8.data(), vals.size() * sizeof(double));
  return vals;
}

uint8_t encode_id(int id) {
  if (id >= 0 && id < 200) return uint8_t(id);
  if (id >= kIdGripperBase) return uint8_t(240 + (id - kIdGripperBase));
  if (id == kIdTable) return 254;
  if (id == kIdGoalPad) return 253;
  return 255;  // background
}

int decode_id(uint8_t v) {
  if (v < 200) return int(v);
  if (v >= 240 && v < 250) return kIdGripperBase + (v - 240);
  if (v == 254) return kIdTable;
  if (v == 253) return kIdGoalPad;
  return kIdBackground;
}

std::string episode_path(const std::string& dir, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ep_%05d.svlb", index);
  return (fs::path(dir) / buf).string();
}

void write_episode(const EpisodeRecord& rec, const std::string& path) {
  const SceneSpec& sc = rec.scene;
  std::vector<BlobArray> arrays;

  std::vector<double> scene_vals{double(int(sc.family)),
                                 double(sc.target_index),
                                 sc.goal.center.x,
                                 sc.goal.center.y,
                                 sc.goal.half,
                                 double(sc.goal.color_id),
                                 sc.gripper_home.pos.x,
                                 sc.gripper_home.pos.y,
                                 sc.gripper_home.pos.z,
                                 sc.gripper_home.yaw,
                                 double(sc.objects.size())};
  for (const auto& o : sc.objects) {
    double vals[9] = {double(int(o.shape)), double(int(o.size_class)), o.theta_deg,
                      o.pos.x,              o.pos.y,                   double(o.color_id),
                      o.dims.x,             o.dims.y,                  o.dims.z};
    scene_vals.insert(scene_vals.end(), vals, vals + 9);
  }
  arrays.push_back(f64_blob("scene_f64", scene_vals));

  const CameraRig& r = rec.rig;
  arrays.push_back(f64_blob(
      "rig_f64", {r.f, r.cx, r.cy, r.b, double(r.H), double(r.W), r.pos.x, r.pos.y, r.pos.z,
                  r.right.x, r.right.y, r.right.z, r.down.x, r.down.y, r.down.z, r.fwd.x,
                  r.fwd.y, r.fwd.z}));

  BlobArray seed{"seed_u8", BlobDType::U8, {8}, {}, {}, {}};
  seed.u8.resize(8);
  std::memcpy(seed.u8.data(), &sc.seed, 8);
  arrays.push_back(std::move(seed));

  BlobArray meta{"meta_i32", BlobDType::I32, {4}, {}, {},
                 {int(rec.outcome), rec.total_steps, int(rec.steps.size()), rec.keyframe_count}};
  arrays.push_back(std::move(meta));

  BlobArray instr{"instruction_u8", BlobDType::U8, {int(sc.instruction.size())}, {}, {}, {}};
  instr.u8.assign(sc.instruction.begin(), sc.instruction.end());
  arrays.push_back(std::move(instr));

  BlobArray acts{"actions_f32", BlobDType::F32, {int(rec.actions.size()), 5}, {}, {}, {}};
  for (const auto& a : rec.actions) {
    acts.f32.push_back(float(a.dx));
    acts.f32.push_back(float(a.dy));
    acts.f32.push_back(float(a.dz));
    acts.f32.push_back(float(a.dyaw));
    acts.f32.push_back(float(a.g));
  }
  arrays.push_back(std::move(acts));

  const int S = int(rec.steps.size());
  const int H = S ? rec.steps[0].frame.H : 0, W = S ? rec.steps[0].frame.W : 0;
  const int nobj = int(sc.objects.size());
  const int Q = S ? int(rec.steps[0].queries.size()) : 0;

  BlobArray left{"left_u8", BlobDType::U8, {S, H, W, 3}, {}, {}, {}};
  BlobArray right{"right_u8", BlobDType::U8, {S, H, W, 3}, {}, {}, {}};
  BlobArray depth{"depth_f32", BlobDType::F32, {S, H, W}, {}, {}, {}};
  BlobArray ids{"ids_u8", BlobDType::U8, {S, H, W}, {}, {}, {}};
  BlobArray state{"state_f32", BlobDType::F32, {S, 5}, {}, {}, {}};
  BlobArray keyf{"keyframe_f32", BlobDType::F32, {S, 5}, {}, {}, {}};
  BlobArray chunk{"chunk_f32", BlobDType::F32, {S, kChunkLen, 5}, {}, {}, {}};
  BlobArray boxes{"boxes_i32", BlobDType::I32, {S, 3 + nobj, 4}, {}, {}, {}};
  BlobArray queries{"queries_f32", BlobDType::F32, {S, Q, 3}, {}, {}, {}};
  BlobArray steps{"steps_i32", BlobDType::I32, {S}, {}, {}, {}};

  auto push_state = [](BlobArray& dst, const RobotState& st) {
    dst.f32.push_back(float(st.pos.x));
    dst.f32.push_back(float(st.pos.y));
    dst.f32.push_back(float(st.pos.z));
    dst.f32.push_back(float(st.yaw));
    dst.f32.push_back(float(st.open_frac));
  };
  auto push_box = [](BlobArray& dst, const BBox& b) {
    dst.i32.push_back(b.x0);
    dst.i32.push_back(b.y0);
    dst.i32.push_back(b.x1);
    dst.i32.push_back(b.y1);
  };

  for (const auto& st : rec.steps) {
    for (float v : st.frame.left) left.u8.push_back(uint8_t(std::lround(v * 255.0f)));
    for (float v : st.frame.right) right.u8.push_back(uint8_t(std::lround(v * 255.0f)));
    depth.f32.insert(depth.f32.end(), st.frame.depth.begin(), st.frame.depth.end());
    for (int16_t id : st.frame.ids) ids.u8.push_back(encode_id(id));
    push_state(state, st.state);
    push_state(keyf, st.keyframe);
    for (const auto& a : st.chunk) {
      chunk.f32.push_back(float(a.dx));
      chunk.f32.push_back(float(a.dy));
      chunk.f32.push_back(float(a.dz));
      chunk.f32.push_back(float(a.dyaw));
      chunk.f32.push_back(float(a.g));
    }
    push_box(boxes, st.target_box);
    push_box(boxes, st.gripper_box);
    push_box(boxes, st.region);
    for (const auto& ob : st.frame.object_boxes) push_box(boxes, ob);
    if (int(st.queries.size()) != Q)
      throw std::logic_error("write_episode: inconsistent query count");
    for (const auto& q : st.queries) {
      queries.f32.push_back(float(q.u));
      queries.f32.push_back(float(q.v));
      queries.f32.push_back(q.depth);
    }
    steps.i32.push_back(st.sim_step);
  }
  for (auto* b : {&left, &right, &depth, &ids, &state, &keyf, &chunk, &boxes, &queries, &steps})
    arrays.push_back(std::move(*b));

  write_blob_file(path, arrays);
}

}  // namespace

EpisodeRecord read_episode(const std::string& path) {
  auto arrays = read_blob_file(path);
  auto find = [&](const std::string& name) -> const BlobArray& {
    for (const auto& a : arrays)
      if (a.name == name) return a;
    throw std::runtime_error("episode blob missing array '" + name + "': " + path);
  };

  EpisodeRecord rec;
  auto scene_vals = f64_unblob(find("scene_f64"));
  size_t k = 0;
  auto next = [&]() { return scene_vals.at(k++); };
  SceneSpec& sc = rec.scene;
  sc.family = TaskFamily(int(next()));
  sc.target_index = int(next());
  sc.goal.center.x = next();
  sc.goal.center.y = next();
  sc.goal.half = next();
  sc.goal.color_id = int(next());
  sc.gripper_home.pos.x = next();
  sc.gripper_home.pos.y = next();
  sc.gripper_home.pos.z = next();
  sc.gripper_home.yaw = next();
  int nobj = int(next());
  for (int i = 0; i < nobj; ++i) {
    ObjectSpec o;
    o.shape = Shape(int(next()));
    o.size_class = SizeClass(int(next()));
    o.theta_deg = next();
    o.pos.x = next();
    o.pos.y = next();
    o.color_id = int(next());
    o.dims.x = next();
    o.dims.y = next();
    o.dims.z = next();
    sc.objects.push_back(o);
  }

  auto rig_vals = f64_unblob(find("rig_f64"));
  CameraRig& r = rec.rig;
  r.f = rig_vals[0];
  r.cx = rig_vals[1];
  r.cy = rig_vals[2];
  r.b = rig_vals[3];
  r.H = int(rig_vals[4]);
  r.W = int(rig_vals[5]);
  r.pos = {rig_vals[6], rig_vals[7], rig_vals[8]};
  r.right = {rig_vals[9], rig_vals[10], rig_vals[11]};
  r.down = {rig_vals[12], rig_vals[13], rig_vals[14]};
  r.fwd = {rig_vals[15], rig_vals[16], rig_vals[17]};

  std::memcpy(&sc.seed, find("seed_u8").u8.data(), 8);

  const auto& meta = find("meta_i32").i32;
  rec.outcome = Outcome(meta.at(0));
  rec.total_steps = meta.at(1);
  int S = meta.at(2);
  rec.keyframe_count = meta.at(3);

  const auto& instr = find("instruction_u8").u8;
  sc.instruction.assign(instr.begin(), instr.end());

  const auto& acts = find("actions_f32");
  for (int i = 0; i < acts.shape[0]; ++i) {
    const float* p = acts.f32.data() + size_t(i) * 5;
    rec.actions.push_back({p[0], p[1], p[2], p[3], p[4]});
  }

  const auto& left = find("left_u8");
  const auto& right = find("right_u8");
  const auto& depth = find("depth_f32");
  const auto& ids = find("ids_u8");
  const auto& state = find("state_f32");
  const auto& keyf = find("keyframe_f32");
  const auto& chunk = find("chunk_f32");
  const auto& boxes = find("boxes_i32");
  const auto& queries = find("queries_f32");
  const auto& steps = find("steps_i32");
  const int H = S ? left.shape[1] : 0, W = S ? left.shape[2] : 0;
  const int Q = S ? queries.shape[1] : 0;
  const int npix = H * W;

  auto pull_state = [](const BlobArray& src, int i) {
    const float* p = src.f32.data() + size_t(i) * 5;
    return RobotState{{p[0], p[1], p[2]}, p[3], p[4]};
  };
  auto pull_box = [&](int i, int slot) {
    const int32_t* p = boxes.i32.data() + (size_t(i) * (3 + nobj) + slot) * 4;
    return BBox{p[0], p[1], p[2], p[3]};
  };

  for (int i = 0; i < S; ++i) {
    EpisodeStep st;
    st.sim_step = steps.i32.at(i);
    StereoFrame& fr = st.frame;
    fr.H = H;
    fr.W = W;
    fr.rig = r;
    fr.left.resize(size_t(npix) * 3);
    fr.right.resize(size_t(npix) * 3);
    for (int j = 0; j < npix * 3; ++j) {
      fr.left[j] = left.u8[size_t(i) * npix * 3 + j] / 255.0f;
      fr.right[j] = right.u8[size_t(i) * npix * 3 + j] / 255.0f;
    }
    fr.depth.assign(depth.f32.begin() + size_t(i) * npix,
                    depth.f32.begin() + size_t(i + 1) * npix);
    fr.disparity.resize(npix);
    for (int j = 0; j < npix; ++j) fr.disparity[j] = float(r.f * r.b / fr.depth[j]);
    fr.ids.resize(npix);
    for (int j = 0; j < npix; ++j) fr.ids[j] = int16_t(decode_id(ids.u8[size_t(i) * npix + j]));
    st.state = pull_state(state, i);
    st.keyframe = pull_state(keyf, i);
    for (int j = 0; j < kChunkLen; ++j) {
      const float* p = chunk.f32.data() + (size_t(i) * kChunkLen + j) * 5;
      st.chunk.push_back({p[0], p[1], p[2], p[3], p[4]});
    }
    st.target_box = pull_box(i, 0);
    st.gripper_box = pull_box(i, 1);
    st.region = pull_box(i, 2);
    for (int j = 0; j < nobj; ++j) fr.object_boxes.push_back(pull_box(i, 3 + j));
    st.gripper_box = pull_box(i, 1);
    fr.gripper_box = st.gripper_box;
    for (int j = 0; j < Q; ++j) {
      const float* p = queries.f32.data() + (size_t(i) * Q + j) * 3;
      st.queries.push_back({int(p[0]), int(p[1]), p[2]});
    }
    rec.steps.push_back(std::move(st));
  }
  return rec;
}

void write_dataset(const std::vector<EpisodeRecord>& episodes, const std::string& dir,
                   const DatasetManifest& manifest) {
  fs::create_directories(dir);
  json j;
  j["version"] = manifest.version;
  j["base_seed"] = manifest.base_seed;
  j["shell"] = manifest.shell;
  j["families"] = manifest.families;
  j["episode_count"] = int(episodes.size());
  j["image_size"] = manifest.image_size;
  j["nominal_f"] = manifest.nominal_f;
  j["nominal_b"] = manifest.nominal_b;
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw std::runtime_error("cannot write manifest in " + dir);
  os << j.dump(2) << "\n";
  for (size_t i = 0; i < episodes.size(); ++i)
    write_episode(episodes[i], episode_path(dir, int(i)));
}

DatasetManifest read_manifest(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw std::runtime_error("no manifest.json in " + dir);
  json j = json::parse(is);
  if (j.at("version").get<int>() != 1)
    throw std::runtime_error("unsupported dataset version in " + dir);
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  m.base_seed = j.at("base_seed").get<uint64_t>();
  m.shell = j.at("shell").get<std::string>();
  m.families = j.at("families").get<std::vector<std::string>>();
  m.episode_count = j.at("episode_count").get<int>();
  m.image_size = j.at("image_size").get<int>();
  m.nominal_f = j.at("nominal_f").get<double>();
  m.nominal_b = j.at("nominal_b").get<double>();
  return m;
}

std::vector<EpisodeRecord> read_dataset(const std::string& dir) {
  DatasetManifest m = read_manifest(dir);
  std::vector<EpisodeRecord> eps;
  eps.reserve(m.episode_count);
  for (int i = 0; i < m.episode_count; ++i) eps.push_back(read_episode(episode_path(dir, i)));
  return eps;
}

}  // namespace svla
