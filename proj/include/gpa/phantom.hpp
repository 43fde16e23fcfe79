#pragma once

#include <random>

#include "gpa/volume.hpp"

namespace gpa {

struct Ellipsoid {
  std::array<double, 3> center;     // (d, h, w), voxel-index units
  std::array<double, 3> semi_axes;  // (d, h, w)

  bool contains(int64_t d, int64_t h, int64_t w) const {
    const double a = (static_cast<double>(d) - center[0]) / semi_axes[0];
    const double b = (static_cast<double>(h) - center[1]) / semi_axes[1];
    const double c = (static_cast<double>(w) - center[2]) / semi_axes[2];
    return a * a + b * b + c * c <= 1.0;
  }
};

// Fills label voxels inside the ellipsoid with cls and gives matching image
// voxels intensities around `intensity`. Returns the painted voxel count.
int64_t paint_ellipsoid(Volume& image, LabelVolume& labels,
                        const Ellipsoid& e, int32_t cls, float intensity,
                        std::mt19937_64& rng);

// Noisy background plus per-class ellipsoids in disjoint intensity bands;
// everything is a pure function of the seed. When placement keeps colliding
// the object is dropped and the id records how many were actually placed.
LabeledSample phantom_generate(uint64_t seed, GridDims dims,
                               int64_t num_classes,
                               int64_t objects_per_class);

}  // namespace gpa
