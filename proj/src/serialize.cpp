#include "svla/serialize.hpp"

#include <cstring>
#include <fstream>

namespace svla {

namespace {

// Assumes a little-endian host (x86/aarch64); data is written verbatim.
template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error(std::string("truncated file while reading ") + what);
  return v;
}

void put_name(std::ostream& os, const std::string& name) {
  put<uint32_t>(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
}

std::string get_name(std::istream& is) {
  uint32_t len = get<uint32_t>(is, "name length");
  if (len > (1u << 20)) throw std::runtime_error("corrupt file: implausible name length");
  std::string name(len, '\0');
  is.read(name.data(), len);
  if (!is) throw std::runtime_error("truncated file while reading name");
  return name;
}

std::vector<int> get_shape(std::istream& is) {
  uint32_t rank = get<uint32_t>(is, "rank");
  if (rank > 16) throw std::runtime_error("corrupt file: implausible rank");
  std::vector<int> shape(rank);
  for (auto& d : shape) {
    uint32_t v = get<uint32_t>(is, "shape");
    d = static_cast<int>(v);
  }
  return shape;
}

int64_t shape_count(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

}  // namespace

void write_param_file(const std::string& path, const std::vector<NamedArrayF32>& arrays) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("SVLA", 4);
  put<uint32_t>(os, kCheckpointVersion);
  put<uint32_t>(os, static_cast<uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (shape_count(a.shape) != static_cast<int64_t>(a.data.size()))
      throw std::logic_error("array '" + a.name + "' shape/data mismatch");
    put_name(os, a.name);
    put<uint32_t>(os, static_cast<uint32_t>(a.shape.size()));
    for (int d : a.shape) put<uint32_t>(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(a.data.data()),
             static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<NamedArrayF32> read_param_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SVLA", 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  uint32_t version = get<uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint version mismatch: file has " + std::to_string(version) +
                             ", expected " + std::to_string(kCheckpointVersion));
  uint32_t count = get<uint32_t>(is, "param count");
  std::vector<NamedArrayF32> arrays(count);
  for (auto& a : arrays) {
    a.name = get_name(is);
    a.shape = get_shape(is);
    a.data.resize(shape_count(a.shape));
    is.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(float)));
    if (!is) throw std::runtime_error("truncated file while reading data of '" + a.name + "'");
  }
  return arrays;
}

void write_blob_file(const std::string& path, const std::vector<BlobArray>& arrays) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("SVLB", 4);
  put<uint32_t>(os, kCheckpointVersion);
  put<uint32_t>(os, static_cast<uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    put_name(os, a.name);
    put<uint8_t>(os, static_cast<uint8_t>(a.dtype));
    put<uint32_t>(os, static_cast<uint32_t>(a.shape.size()));
    for (int d : a.shape) put<uint32_t>(os, static_cast<uint32_t>(d));
    int64_t n = a.numel();
    switch (a.dtype) {
      case BlobDType::F32:
        if (static_cast<int64_t>(a.f32.size()) != n)
          throw std::logic_error("blob '" + a.name + "' shape/data mismatch");
        os.write(reinterpret_cast<const char*>(a.f32.data()), n * sizeof(float));
        break;
      case BlobDType::U8:
        if (static_cast<int64_t>(a.u8.size()) != n)
          throw std::logic_error("blob '" + a.name + "' shape/data mismatch");
        os.write(reinterpret_cast<const char*>(a.u8.data()), n);
        break;
      case BlobDType::I32:
        if (static_cast<int64_t>(a.i32.size()) != n)
          throw std::logic_error("blob '" + a.name + "' shape/data mismatch");
        os.write(reinterpret_cast<const char*>(a.i32.data()), n * sizeof(int32_t));
        break;
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<BlobArray> read_blob_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SVLB", 4) != 0)
    throw std::runtime_error("not an episode blob file: " + path);
  uint32_t version = get<uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("blob version mismatch: file has " + std::to_string(version));
  uint32_t count = get<uint32_t>(is, "array count");
  std::vector<BlobArray> arrays(count);
  for (auto& a : arrays) {
    a.name = get_name(is);
    a.dtype = static_cast<BlobDType>(get<uint8_t>(is, "dtype"));
    a.shape = get_shape(is);
    int64_t n = a.numel();
    switch (a.dtype) {
      case BlobDType::F32:
        a.f32.resize(n);
        is.read(reinterpret_cast<char*>(a.f32.data()), n * sizeof(float));
        break;
      case BlobDType::U8:
        a.u8.resize(n);
        is.read(reinterpret_cast<char*>(a.u8.data()), n);
        break;
      case BlobDType::I32:
        a.i32.resize(n);
        is.read(reinterpret_cast<char*>(a.i32.data()), n * sizeof(int32_t));
        break;
      default:
        throw std::runtime_error("blob '" + a.name + "' has unknown dtype");
    }
    if (!is) throw std::runtime_error("truncated file while reading data of '" + a.name + "'");
  }
  return arrays;
}

std::vector<NamedArrayF32> pack_params(const ParamRegistry& params) {
  std::vector<NamedArrayF32> out;
  out.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.tensors()[i];
    NamedArrayF32 a;
    a.name = params.names()[i];
    a.shape = t.shape();
    a.data.assign(t.data().begin(), t.data().end());
    out.push_back(std::move(a));
  }
  return out;
}

void unpack_params(const std::vector<NamedArrayF32>& arrays, ParamRegistry& params) {
  if (arrays.size() != params.size())
    throw std::runtime_error("checkpoint parameter count mismatch: file has " +
                             std::to_string(arrays.size()) + ", model has " +
                             std::to_string(params.size()));
  for (const auto& a : arrays) {
    Tensor t = params.get(a.name);
    if (t.shape() != a.shape)
      throw std::runtime_error("parameter '" + a.name + "' shape mismatch: file " +
                               shape_str(a.shape) + " vs model " + shape_str(t.shape()));
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<real_t>(a.data[i]);
  }
}

std::vector<NamedArrayF32> pack_optim(const ParamRegistry& params, const OptimState& state) {
  std::vector<NamedArrayF32> out;
  if (!state.initialized()) return out;
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.tensors()[i];
    NamedArrayF32 m{"opt.m." + params.names()[i], t.shape(), {}};
    m.data.assign(state.m[i].begin(), state.m[i].end());
    NamedArrayF32 v{"opt.v." + params.names()[i], t.shape(), {}};
    v.data.assign(state.v[i].begin(), state.v[i].end());
    out.push_back(std::move(m));
    out.push_back(std::move(v));
  }
  NamedArrayF32 meta{"opt.meta", {4}, {static_cast<float>(state.step), static_cast<float>(state.lr),
                                       static_cast<float>(state.beta1),
                                       static_cast<float>(state.beta2)}};
  out.push_back(std::move(meta));
  return out;
}

void unpack_optim(const std::vector<NamedArrayF32>& arrays, const ParamRegistry& params,
                  OptimState& state) {
  state.init(params);
  for (const auto& a : arrays) {
    if (a.name == "opt.meta") {
      state.step = static_cast<int64_t>(a.data.at(0));
      state.lr = static_cast<real_t>(a.data.at(1));
      state.beta1 = static_cast<real_t>(a.data.at(2));
      state.beta2 = static_cast<real_t>(a.data.at(3));
      continue;
    }
    bool is_m = a.name.rfind("opt.m.", 0) == 0;
    bool is_v = a.name.rfind("opt.v.", 0) == 0;
    if (!is_m && !is_v) continue;
    std::string pname = a.name.substr(6);
    if (!params.has(pname))
      throw std::runtime_error("optimizer state for unknown parameter '" + pname + "'");
    for (size_t i = 0; i < params.size(); ++i) {
      if (params.names()[i] != pname) continue;
      auto& dst = is_m ? state.m[i] : state.v[i];
      if (dst.size() != a.data.size())
        throw std::runtime_error("optimizer moment size mismatch for '" + pname + "'");
      for (size_t j = 0; j < a.data.size(); ++j) dst[j] = static_cast<real_t>(a.data[j]);
      break;
    }
  }
}

}  // namespace svla
