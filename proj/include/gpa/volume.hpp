#pragma once

#include <array>
#include <string>

#include "gpa/common.hpp"
#include "gpa/tensor.hpp"

namespace gpa {

// Dense 3D scalar field, row-major [d][h][w], with voxel spacing in mm.
template <class T>
struct VolumeT {
  GridDims dims;
  std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
  std::vector<T> voxels;

  VolumeT() = default;
  VolumeT(GridDims d, T fill = T(0))
      : dims(d), voxels(static_cast<size_t>(d.count()), fill) {}

  int64_t count() const { return dims.count(); }
  T& at(int64_t d, int64_t h, int64_t w) {
    return voxels[static_cast<size_t>((d * dims.h + h) * dims.w + w)];
  }
  T at(int64_t d, int64_t h, int64_t w) const {
    return voxels[static_cast<size_t>((d * dims.h + h) * dims.w + w)];
  }
};

using Volume = VolumeT<float>;
using LabelVolume = VolumeT<int32_t>;

struct LabeledSample {
  std::string id;
  Volume image;
  LabelVolume labels;

  void check_consistent(int64_t num_classes = -1) const {
    check_shape(image.dims == labels.dims,
                "sample " + id + ": image " + grid_str(image.dims) +
                    " vs labels " + grid_str(labels.dims));
    if (num_classes > 0)
      for (int32_t v : labels.voxels)
        check_shape(v >= 0 && v < num_classes,
                    "sample " + id + ": label " + std::to_string(v) +
                        " outside [0," + std::to_string(num_classes) + ")");
  }
};

// Converts between the data-layer volume and the model's tensor layout.
inline Tensor<float> image_tensor(const Volume& v, int64_t channels = 1) {
  check_shape(channels == 1, "image_tensor: multi-channel volumes not stored");
  return Tensor<float>::from({1, v.dims.d, v.dims.h, v.dims.w}, v.voxels);
}

}  // namespace gpa
