#pragma once

#include <filesystem>
#include <string>

#include "habench/types.hpp"

namespace habench::nifti {

enum class ElementType { Float32, Float64 };

/// Read a single-file NIfTI-1 volume (.nii or .nii.gz). Byte order is
/// auto-detected; int16, float32 and float64 element types are
/// supported; scl_slope/scl_inter scaling is applied.
Volume read_volume(const std::filesystem::path& path);

/// Write a single-file NIfTI-1 volume; gzip-compressed when the path
/// ends in .gz. The affine goes out through the s-form with code 1.
void write_volume(const Volume& volume, const std::filesystem::path& path,
                  ElementType element_type);

}  // namespace habench::nifti
