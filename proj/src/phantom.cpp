#include "gpa/phantom.hpp"

#include <algorithm>

namespace gpa {

int64_t paint_ellipsoid(Volume& image, LabelVolume& labels, const Ellipsoid& e,
                        int32_t cls, float intensity, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> speckle(-0.02f, 0.02f);
  const auto lo = [&](int axis, int64_t extent) {
    return std::max<int64_t>(
        0, static_cast<int64_t>(std::floor(e.center[axis] - e.semi_axes[axis])));
  };
  const auto hi = [&](int axis, int64_t extent) {
    return std::min<int64_t>(
        extent - 1,
        static_cast<int64_t>(std::ceil(e.center[axis] + e.semi_axes[axis])));
  };
  int64_t painted = 0;
  for (int64_t d = lo(0, image.dims.d); d <= hi(0, image.dims.d); ++d)
    for (int64_t h = lo(1, image.dims.h); h <= hi(1, image.dims.h); ++h)
      for (int64_t w = lo(2, image.dims.w); w <= hi(2, image.dims.w); ++w)
        if (e.contains(d, h, w)) {
          labels.at(d, h, w) = cls;
          image.at(d, h, w) = intensity + speckle(rng);
          ++painted;
        }
  return painted;
}

LabeledSample phantom_generate(uint64_t seed, GridDims dims,
                               int64_t num_classes,
                               int64_t objects_per_class) {
  check_shape(num_classes >= 2,
              "phantom: need at least background and one foreground class");
  check_shape(dims.d >= 8 && dims.h >= 8 && dims.w >= 8,
              "phantom: dims too small, need at least 8 per axis");
  check_shape(objects_per_class >= 0, "phantom: negative object count");

  std::mt19937_64 rng(seed);
  LabeledSample s;
  s.image = Volume(dims);
  s.labels = LabelVolume(dims);

  std::uniform_real_distribution<float> bg_noise(-0.07f, 0.07f);
  for (auto& v : s.image.voxels) v = 0.12f + bg_noise(rng);

  const double max_axis =
      std::min({8.0, dims.d / 4.0, dims.h / 4.0, dims.w / 4.0});
  const double min_axis = std::min(3.5, max_axis);
  std::uniform_real_distribution<double> axis_draw(min_axis, max_axis);
  std::uniform_real_distribution<float> band_jitter(-0.06f, 0.06f);

  std::vector<Ellipsoid> placed;
  auto overlaps = [&](const Ellipsoid& e) {
    const double re = *std::max_element(e.semi_axes.begin(), e.semi_axes.end());
    for (const auto& o : placed) {
      const double ro =
          *std::max_element(o.semi_axes.begin(), o.semi_axes.end());
      const double dd = e.center[0] - o.center[0];
      const double dh = e.center[1] - o.center[1];
      const double dw = e.center[2] - o.center[2];
      if (std::sqrt(dd * dd + dh * dh + dw * dw) <= re + ro + 1.0) return true;
    }
    return false;
  };

  int64_t total_placed = 0;
  for (int32_t cls = 1; cls < num_classes; ++cls) {
    // class-specific intensity band, well separated from the background
    const float band =
        0.5f + 0.3f * static_cast<float>(cls - 1) /
                   static_cast<float>(std::max<int64_t>(1, num_classes - 2));
    for (int64_t obj = 0; obj < objects_per_class; ++obj) {
      bool ok = false;
      for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
        Ellipsoid e;
        for (int a = 0; a < 3; ++a) e.semi_axes[a] = axis_draw(rng);
        const std::array<int64_t, 3> extent{dims.d, dims.h, dims.w};
        bool fits = true;
        for (int a = 0; a < 3; ++a) {
          const double margin = e.semi_axes[a] + 1.0;
          if (2.0 * margin >= static_cast<double>(extent[a])) {
            fits = false;
            break;
          }
          std::uniform_real_distribution<double> pos(
              margin, static_cast<double>(extent[a]) - margin);
          e.center[a] = pos(rng);
        }
        if (!fits || overlaps(e)) continue;
        paint_ellipsoid(s.image, s.labels, e, cls, band + band_jitter(rng),
                        rng);
        placed.push_back(e);
        ++total_placed;
        ok = true;
      }
    }
  }
  s.id = "phantom-" + std::to_string(seed) + "-o" + std::to_string(total_placed);
  return s;
}

}  // namespace gpa
