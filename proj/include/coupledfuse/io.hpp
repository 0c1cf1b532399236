#pragma once

#include "coupledfuse/tensor.hpp"

#include <filesystem>

namespace cfuse {

/// Binary tensor container ("TNSR" version 1), little-endian throughout:
///   bytes 0-3   magic 54 4E 53 52 ("TNSR")
///   bytes 4-5   u16 version, must be 1
///   bytes 6-7   u16 order N
///   then        N x u64 dimensions
///   then        IEEE-754 f64 values, row-major (last index fastest)
void write_tnsr(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor read_tnsr(const std::filesystem::path& path);

/// Matrices travel as order-2 TNSR tensors.
void write_matrix_tnsr(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_tnsr(const std::filesystem::path& path);

/// Plain CSV matrix: one row per line, values comma-separated, no header.
/// Values are written with enough digits to round-trip (%.17g).
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// %.17g rendering used for every CSV value we emit, locale-independent.
std::string format_csv_double(double v);

}  // namespace cfuse
