#pragma once

#include <filesystem>
#include <iosfwd>

#include "mexflow/tensor.hpp"

namespace mex::nn {

// MXTN container: "MXTN", u8 version (1), u8 dtype (0 = f32, 1 = f64), u8 rank,
// rank x u32 extents, row-major payload. All little-endian.
enum class StorageType : std::uint8_t { f32 = 0, f64 = 1 };

void write_tensor(std::ostream& out, const Tensor& tensor, StorageType type = StorageType::f32);
Tensor read_tensor(std::istream& in, const std::string& source = "<stream>");

void save_tensor(const std::filesystem::path& path, const Tensor& tensor, StorageType type = StorageType::f32);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace mex::nn
