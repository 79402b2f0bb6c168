#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tss/ad/tensor.hpp"

namespace tss::ad {

enum class DType { kFloat64, kFloat32 };

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Container layout:
//   line 1: "TSSCKPT/1"
//   line 2: JSON header {"tensors": [{name, shape, dtype, offset, bytes}...], "data_bytes": n}
//   then the concatenated little-endian arrays; offsets are relative to the
//   first byte after the header line.
// float64 round-trips bit-exactly; float32 is a lossy storage option.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays,
                     DType dtype = DType::kFloat64);
std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path);

}  // namespace tss::ad
