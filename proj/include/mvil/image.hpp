#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvil {

using Planef = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskPlane = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// H x W x 3 raster with values in [0,1], stored as planar channels.
// Row 0 is the top of the image.
struct Image {
  Planef r, g, b;

  Image() = default;
  Image(int h, int w) { resize(h, w); }

  void resize(int h, int w) {
    r.setZero(h, w);
    g.setZero(h, w);
    b.setZero(h, w);
  }
  int height() const { return static_cast<int>(r.rows()); }
  int width() const { return static_cast<int>(r.cols()); }
  bool same_size(const Image& o) const { return height() == o.height() && width() == o.width(); }

  void fill(float fr, float fg, float fb) {
    r.setConstant(fr);
    g.setConstant(fg);
    b.setConstant(fb);
  }
  void set(int y, int x, float fr, float fg, float fb) {
    r(y, x) = fr;
    g(y, x) = fg;
    b(y, x) = fb;
  }
  Planef& plane(int c) { return c == 0 ? r : (c == 1 ? g : b); }
  const Planef& plane(int c) const { return c == 0 ? r : (c == 1 ? g : b); }

  void clamp01() {
    r = r.min(1.0f).max(0.0f);
    g = g.min(1.0f).max(0.0f);
    b = b.min(1.0f).max(0.0f);
  }

  bool bit_identical(const Image& o) const {
    return same_size(o) && (r == o.r).all() && (g == o.g).all() && (b == o.b).all();
  }
};

// H x W binary raster; 1 marks task-related pixels.
struct Mask {
  MaskPlane m;

  Mask() = default;
  Mask(int h, int w) { m.setZero(h, w); }

  int height() const { return static_cast<int>(m.rows()); }
  int width() const { return static_cast<int>(m.cols()); }
  bool empty_mask() const { return m.size() == 0 || !(m != 0).any(); }
  int count() const { return static_cast<int>((m != 0).count()); }
  bool same_size(const Mask& o) const { return height() == o.height() && width() == o.width(); }

  bool operator==(const Mask& o) const { return same_size(o) && (m == o.m).all(); }
};

inline double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_size(b)) throw std::invalid_argument("mask_iou: size mismatch");
  int inter = 0, uni = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      const bool pa = a.m(y, x) != 0, pb = b.m(y, x) != 0;
      inter += (pa && pb);
      uni += (pa || pb);
    }
  if (uni == 0) return 1.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height() || x0 + w > img.width())
    throw std::invalid_argument("crop: window out of bounds");
  Image out(h, w);
  out.r = img.r.block(y0, x0, h, w);
  out.g = img.g.block(y0, x0, h, w);
  out.b = img.b.block(y0, x0, h, w);
  return out;
}

inline Mask crop(const Mask& mask, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > mask.height() || x0 + w > mask.width())
    throw std::invalid_argument("crop: window out of bounds");
  Mask out;
  out.m = mask.m.block(y0, x0, h, w);
  return out;
}

// Bilinear upsample of a single-channel map to (h, w), edge-clamped.
inline Planef bilinear_resize(const Planef& src, int h, int w) {
  Planef out(h, w);
  const int sh = static_cast<int>(src.rows()), sw = static_cast<int>(src.cols());
  const float sy = static_cast<float>(sh) / static_cast<float>(h);
  const float sx = static_cast<float>(sw) / static_cast<float>(w);
  for (int y = 0; y < h; ++y) {
    float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
    fy = std::max(0.0f, std::min(fy, static_cast<float>(sh - 1)));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const float wy = fy - static_cast<float>(y0);
    for (int x = 0; x < w; ++x) {
      float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
      fx = std::max(0.0f, std::min(fx, static_cast<float>(sw - 1)));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const float wx = fx - static_cast<float>(x0);
      out(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                  wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
    }
  }
  return out;
}

}  // namespace mvil
