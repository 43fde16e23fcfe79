#pragma once

#include "gpa/volume.hpp"

namespace gpa {

// Minimal uncompressed single-file NIfTI-1 support: dims, spacing, and the
// voxel payload for uint8 / int16 / float32, with header endianness detected
// from sizeof_hdr. Orientation metadata is ignored. The writer always emits
// little-endian float32 with vox_offset 352.
Volume read_nifti(const std::string& path);
void write_nifti(const Volume& v, const std::string& path);

// Raw little-endian float32 payload (<name>) plus a text manifest
// (<name>.meta) holding dims, spacing, dtype.
Volume read_raw(const std::string& path);
void write_raw(const Volume& v, const std::string& path);

// Container selection by extension: ".nii" or raw otherwise.
Volume read_volume(const std::string& path);
void write_volume(const Volume& v, const std::string& path);

inline LabelVolume to_labels(const Volume& v) {
  LabelVolume out;
  out.dims = v.dims;
  out.spacing = v.spacing;
  out.voxels.resize(v.voxels.size());
  for (size_t i = 0; i < v.voxels.size(); ++i)
    out.voxels[i] = static_cast<int32_t>(std::lround(v.voxels[i]));
  return out;
}

inline Volume from_labels(const LabelVolume& l) {
  Volume out;
  out.dims = l.dims;
  out.spacing = l.spacing;
  out.voxels.resize(l.voxels.size());
  for (size_t i = 0; i < l.voxels.size(); ++i)
    out.voxels[i] = static_cast<float>(l.voxels[i]);
  return out;
}

}  // namespace gpa
