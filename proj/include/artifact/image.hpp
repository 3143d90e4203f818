#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "artifact/types.hpp"

namespace artifact {

// Dense RGB image, channel-planar, values in [0,1].
template <typename S>
struct ImageT {
  std::array<ArrayT<S>, 3> ch;

  ImageT() = default;
  ImageT(Index height, Index width) {
    for (auto& c : ch) c = ArrayT<S>::Zero(height, width);
  }

  static ImageT constant(Index height, Index width, S value) {
    ImageT img(height, width);
    for (auto& c : img.ch) c.setConstant(value);
    return img;
  }

  Index height() const { return ch[0].rows(); }
  Index width() const { return ch[0].cols(); }
  Index pixels() const { return height() * width(); }

  S& at(Index c, Index y, Index x) { return ch[c](y, x); }
  S at(Index c, Index y, Index x) const { return ch[c](y, x); }
};

using Image = ImageT<Scalar>;

template <typename S>
bool same_shape(const ImageT<S>& a, const ImageT<S>& b) {
  return a.height() == b.height() && a.width() == b.width();
}

template <typename S>
ImageT<S> clamp01(ImageT<S> img) {
  for (auto& c : img.ch) c = c.max(S(0)).min(S(1));
  return img;
}

template <typename S>
bool all_finite(const ImageT<S>& img) {
  for (const auto& c : img.ch)
    if (!c.isFinite().all()) return false;
  return true;
}

template <typename S>
bool bit_equal(const ImageT<S>& a, const ImageT<S>& b) {
  if (!same_shape(a, b)) return false;
  for (int c = 0; c < 3; ++c)
    if ((a.ch[c] != b.ch[c]).any()) return false;
  return true;
}

// Flattening order: index = (c * H + y) * W + x.
template <typename S>
VectorT<S> flatten(const ImageT<S>& img) {
  const Index h = img.height(), w = img.width();
  VectorT<S> v(3 * h * w);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) v[(c * h + y) * w + x] = img.ch[c](y, x);
  return v;
}

template <typename S>
ImageT<S> unflatten(const VectorT<S>& v, Index height, Index width) {
  ImageT<S> img(height, width);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x)
        img.ch[c](y, x) = v[(c * height + y) * width + x];
  return img;
}

// 8-bit conversion used by all image I/O: value*255 rounded half-up.
inline std::uint8_t to_byte(Scalar v) {
  const Scalar c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

inline Scalar from_byte(std::uint8_t b) { return static_cast<Scalar>(b) / 255.0; }

// Interleaved RGB rows, as stored in PNG scanlines.
inline std::vector<std::uint8_t> to_rgb8(const Image& img) {
  const Index h = img.height(), w = img.width();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(3 * h * w));
  std::size_t i = 0;
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out[i++] = to_byte(img.ch[c](y, x));
  return out;
}

inline Image from_rgb8(const std::vector<std::uint8_t>& rgb, Index height, Index width) {
  Image img(height, width);
  std::size_t i = 0;
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) img.ch[c](y, x) = from_byte(rgb[i++]);
  return img;
}

// Mean over all channels and pixels of (a-b)^2.
template <typename S>
S mean_squared_error(const ImageT<S>& a, const ImageT<S>& b) {
  S acc = 0;
  for (int c = 0; c < 3; ++c) acc += ((a.ch[c] - b.ch[c]) * (a.ch[c] - b.ch[c])).sum();
  return acc / static_cast<S>(3 * a.pixels());
}

// Block-average downsample by an integer factor (truncates ragged edges).
template <typename S>
ImageT<S> downsample(const ImageT<S>& img, Index factor) {
  const Index h = img.height() / factor, w = img.width() / factor;
  ImageT<S> out(h, w);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x)
        out.ch[c](y, x) =
            img.ch[c].block(y * factor, x * factor, factor, factor).mean();
  return out;
}

}  // namespace artifact
