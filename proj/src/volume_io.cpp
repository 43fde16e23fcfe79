#include "gpa/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gpa {

namespace {

constexpr int64_t kHeaderSize = 348;
constexpr int16_t kDtUint8 = 2;
constexpr int16_t kDtInt16 = 4;
constexpr int16_t kDtFloat32 = 16;

template <class T>
T swab(T v) {
  auto* b = reinterpret_cast<unsigned char*>(&v);
  for (size_t i = 0; i < sizeof(T) / 2; ++i)
    std::swap(b[i], b[sizeof(T) - 1 - i]);
  return v;
}

struct HeaderView {
  const unsigned char* bytes;
  bool swapped;

  int32_t i32(size_t off) const {
    int32_t v;
    std::memcpy(&v, bytes + off, 4);
    return swapped ? swab(v) : v;
  }
  int16_t i16(size_t off) const {
    int16_t v;
    std::memcpy(&v, bytes + off, 2);
    return swapped ? swab(v) : v;
  }
  float f32(size_t off) const {
    float v;
    std::memcpy(&v, bytes + off, 4);
    return swapped ? swab(v) : v;
  }
};

void put_i32(unsigned char* b, size_t off, int32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = swab(v);
  std::memcpy(b + off, &v, 4);
}
void put_i16(unsigned char* b, size_t off, int16_t v) {
  if constexpr (std::endian::native == std::endian::big) v = swab(v);
  std::memcpy(b + off, &v, 2);
}
void put_f32(unsigned char* b, size_t off, float v) {
  if constexpr (std::endian::native == std::endian::big) v = swab(v);
  std::memcpy(b + off, &v, 4);
}

}  // namespace

Volume read_nifti(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("nifti: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (static_cast<int64_t>(data.size()) < kHeaderSize)
    throw ParseError("nifti: file shorter than the 348-byte header: " + path);

  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  int32_t size_native;
  std::memcpy(&size_native, bytes, 4);
  bool swapped;
  if (size_native == kHeaderSize) {
    swapped = false;
  } else if (swab(size_native) == kHeaderSize) {
    swapped = true;
  } else {
    throw ParseError("nifti: sizeof_hdr is " + std::to_string(size_native) +
                     ", expected 348 in either byte order: " + path);
  }
  HeaderView h{bytes, swapped};

  if (std::memcmp(bytes + 344, "n+1\0", 4) != 0)
    throw ParseError("nifti: magic is not 'n+1' (single-file): " + path);

  const int16_t ndim = h.i16(40);
  if (ndim < 3)
    throw ParseError("nifti: dim[0]=" + std::to_string(ndim) +
                     ", need a 3-D volume: " + path);
  GridDims dims{h.i16(40 + 2 * 3), h.i16(40 + 2 * 2), h.i16(40 + 2 * 1)};
  if (dims.d < 1 || dims.h < 1 || dims.w < 1)
    throw ParseError("nifti: non-positive extent in dim[1..3]: " + path);
  for (int e = 4; e <= ndim && e <= 7; ++e)
    if (h.i16(40 + 2 * e) > 1)
      throw ParseError("nifti: dim[" + std::to_string(e) +
                       "]>1, only single 3-D volumes are supported: " + path);

  const int16_t dtype = h.i16(70);
  int64_t elem = 0;
  switch (dtype) {
    case kDtUint8: elem = 1; break;
    case kDtInt16: elem = 2; break;
    case kDtFloat32: elem = 4; break;
    default:
      throw ParseError("nifti: datatype code " + std::to_string(dtype) +
                       " unsupported (uint8/int16/float32 only): " + path);
  }

  const float vox_offset = h.f32(108);
  const int64_t offset = static_cast<int64_t>(vox_offset);
  if (offset < kHeaderSize)
    throw ParseError("nifti: vox_offset " + std::to_string(vox_offset) +
                     " points inside the header: " + path);
  const int64_t n = dims.count();
  if (static_cast<int64_t>(data.size()) < offset + n * elem)
    throw ParseError("nifti: data truncated: need " +
                     std::to_string(offset + n * elem) + " bytes, file has " +
                     std::to_string(data.size()) + ": " + path);

  Volume v(dims);
  v.spacing = {h.f32(76 + 4 * 3), h.f32(76 + 4 * 2), h.f32(76 + 4 * 1)};
  const unsigned char* payload = bytes + offset;
  for (int64_t i = 0; i < n; ++i) {
    switch (dtype) {
      case kDtUint8:
        v.voxels[static_cast<size_t>(i)] = static_cast<float>(payload[i]);
        break;
      case kDtInt16: {
        int16_t raw;
        std::memcpy(&raw, payload + 2 * i, 2);
        if (swapped) raw = swab(raw);
        v.voxels[static_cast<size_t>(i)] = static_cast<float>(raw);
        break;
      }
      case kDtFloat32: {
        float raw;
        std::memcpy(&raw, payload + 4 * i, 4);
        if (swapped) raw = swab(raw);
        v.voxels[static_cast<size_t>(i)] = raw;
        break;
      }
    }
  }
  return v;
}

void write_nifti(const Volume& v, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("nifti: cannot write " + path);
  unsigned char header[352] = {};
  put_i32(header, 0, 348);
  put_i16(header, 40, 3);
  put_i16(header, 40 + 2 * 1, static_cast<int16_t>(v.dims.w));
  put_i16(header, 40 + 2 * 2, static_cast<int16_t>(v.dims.h));
  put_i16(header, 40 + 2 * 3, static_cast<int16_t>(v.dims.d));
  for (int e = 4; e <= 7; ++e) put_i16(header, 40 + 2 * e, 1);
  put_i16(header, 70, kDtFloat32);
  put_i16(header, 72, 32);  // bitpix
  put_f32(header, 76, 1.0f);
  put_f32(header, 76 + 4 * 1, v.spacing[2]);
  put_f32(header, 76 + 4 * 2, v.spacing[1]);
  put_f32(header, 76 + 4 * 3, v.spacing[0]);
  put_f32(header, 108, 352.0f);  // vox_offset
  put_f32(header, 112, 1.0f);    // scl_slope
  std::memcpy(header + 344, "n+1\0", 4);
  out.write(reinterpret_cast<const char*>(header), 352);

  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.voxels.data()),
              static_cast<std::streamsize>(v.voxels.size() * 4));
  } else {
    for (float f : v.voxels) {
      const float s = swab(f);
      out.write(reinterpret_cast<const char*>(&s), 4);
    }
  }
  if (!out) throw IoError("nifti: write failed for " + path);
}

Volume read_raw(const std::string& path) {
  std::ifstream meta(path + ".meta");
  if (!meta) throw IoError("raw: cannot open manifest " + path + ".meta");
  GridDims dims{0, 0, 0};
  std::array<float, 3> spacing{1, 1, 1};
  std::string dtype, line;
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("raw: manifest line '" + line + "' is not key=value");
    const std::string key = line.substr(0, eq);
    std::stringstream val(line.substr(eq + 1));
    std::string item;
    if (key == "dims") {
      std::vector<int64_t> d;
      while (std::getline(val, item, ',')) d.push_back(std::stoll(item));
      if (d.size() != 3) throw ParseError("raw: dims needs three extents");
      dims = {d[0], d[1], d[2]};
    } else if (key == "spacing") {
      std::vector<float> s;
      while (std::getline(val, item, ',')) s.push_back(std::stof(item));
      if (s.size() != 3) throw ParseError("raw: spacing needs three values");
      spacing = {s[0], s[1], s[2]};
    } else if (key == "dtype") {
      dtype = val.str();
    } else {
      throw ParseError("raw: unknown manifest key '" + key + "'");
    }
  }
  if (dims.count() <= 0) throw ParseError("raw: manifest missing dims");
  if (dtype != "float32")
    throw ParseError("raw: dtype '" + dtype + "' unsupported (float32 only)");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("raw: cannot open payload " + path);
  in.seekg(0, std::ios::end);
  const int64_t bytes = in.tellg();
  in.seekg(0);
  if (bytes != dims.count() * 4)
    throw ParseError("raw: payload holds " + std::to_string(bytes / 4) +
                     " values, manifest dims need " +
                     std::to_string(dims.count()));
  Volume v(dims);
  v.spacing = spacing;
  in.read(reinterpret_cast<char*>(v.voxels.data()), bytes);
  if constexpr (std::endian::native == std::endian::big)
    for (auto& f : v.voxels) f = swab(f);
  return v;
}

void write_raw(const Volume& v, const std::string& path) {
  {
    std::ofstream meta(path + ".meta");
    if (!meta) throw IoError("raw: cannot write manifest " + path + ".meta");
    meta << "dims=" << v.dims.d << "," << v.dims.h << "," << v.dims.w << "\n";
    meta << "spacing=" << v.spacing[0] << "," << v.spacing[1] << ","
         << v.spacing[2] << "\n";
    meta << "dtype=float32\n";
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("raw: cannot write payload " + path);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.voxels.data()),
              static_cast<std::streamsize>(v.voxels.size() * 4));
  } else {
    for (float f : v.voxels) {
      const float s = swab(f);
      out.write(reinterpret_cast<const char*>(&s), 4);
    }
  }
  if (!out) throw IoError("raw: write failed for " + path);
}

namespace {
bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}
}  // namespace

Volume read_volume(const std::string& path) {
  return has_suffix(path, ".nii") ? read_nifti(path) : read_raw(path);
}

void write_volume(const Volume& v, const std::string& path) {
  if (has_suffix(path, ".nii"))
    write_nifti(v, path);
  else
    write_raw(v, path);
}

}  // namespace gpa
