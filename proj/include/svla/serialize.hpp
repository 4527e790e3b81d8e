#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svla/optim.hpp"
#include "svla/tensor.hpp"

namespace svla {

// Checkpoint container: little-endian, header {magic "SVLA", version u32,
// param count u32}, then per-param {name length u32 + UTF-8 name, rank u32,
// shape u32s, f32 data}. Round trips bit-exactly.
struct NamedArrayF32 {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

constexpr uint32_t kCheckpointVersion = 1;

void write_param_file(const std::string& path, const std::vector<NamedArrayF32>& arrays);
std::vector<NamedArrayF32> read_param_file(const std::string& path);

// Episode-blob container: same record layout with a dtype tag per array so
// image planes can be stored compactly. Magic "SVLB".
enum class BlobDType : uint8_t { F32 = 0, U8 = 1, I32 = 2 };

struct BlobArray {
  std::string name;
  BlobDType dtype = BlobDType::F32;
  std::vector<int> shape;
  std::vector<float> f32;
  std::vector<uint8_t> u8;
  std::vector<int32_t> i32;

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
};

void write_blob_file(const std::string& path, const std::vector<BlobArray>& arrays);
std::vector<BlobArray> read_blob_file(const std::string& path);

// Convenience: snapshot / restore a registry plus optimizer moments.
std::vector<NamedArrayF32> pack_params(const ParamRegistry& params);
void unpack_params(const std::vector<NamedArrayF32>& arrays, ParamRegistry& params);
std::vector<NamedArrayF32> pack_optim(const ParamRegistry& params, const OptimState& state);
void unpack_optim(const std::vector<NamedArrayF32>& arrays, const ParamRegistry& params,
                  OptimState& state);

}  // namespace svla
