#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "adaradar/tensor.hpp"

namespace adaradar {

// Binary tensor blob:
//   "ADRT" | u8 version (1) | u8 dtype (0 = f32, 1 = f64) | u8 rank |
//   rank x u64 dims (LE) | raw LE scalars, row-major.
enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline constexpr std::uint8_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& os, const Tensor& t, DType dtype = DType::F64);
/// Reads one blob; f32 payloads are widened to double.
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::F64);
/// Throws std::runtime_error naming the file on any I/O or format error.
Tensor load_tensor(const std::filesystem::path& path);

} // namespace adaradar
