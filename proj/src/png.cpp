#include <zlib.h>

#include <cstring>

#include "artifact/io.hpp"

// Minimal PNG codec. The encoder emits exactly IHDR + one IDAT + IEND with
// filter 0 on every scanline and a fixed zlib level, so output bytes depend
// only on pixel content. The decoder handles the 8-bit non-interlaced
// subset (gray, gray+alpha, RGB, RGBA) with all five scanline filters.

namespace artifact {

namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint32_t get_u32be(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t size) {
  put_u32be(out, static_cast<std::uint32_t>(size));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  if (size > 0) out.insert(out.end(), data, data + size);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + size));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  const Index h = img.height(), w = img.width();
  if (h <= 0 || w <= 0) throw Error("encode_png: empty image");
  const auto rgb = to_rgb8(img);

  // Scanlines, each prefixed with filter byte 0.
  const std::size_t stride = static_cast<std::size_t>(w) * 3;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (stride + 1));
  for (Index y = 0; y < h; ++y) {
    std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
    row[0] = 0;
    std::memcpy(row + 1, rgb.data() + static_cast<std::size_t>(y) * stride, stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> deflated(bound);
  if (compress2(deflated.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw Error("encode_png: deflate failed");
  deflated.resize(bound);

  std::vector<std::uint8_t> out(kSignature, kSignature + 8);
  std::uint8_t ihdr[13];
  std::vector<std::uint8_t> tmp;
  put_u32be(tmp, static_cast<std::uint32_t>(w));
  put_u32be(tmp, static_cast<std::uint32_t>(h));
  std::memcpy(ihdr, tmp.data(), 8);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: truecolor
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter method
  ihdr[12] = 0;  // no interlace
  append_chunk(out, "IHDR", ihdr, 13);
  append_chunk(out, "IDAT", deflated.data(), deflated.size());
  append_chunk(out, "IEND", nullptr, 0);
  return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
    throw Error("decode_png: not a PNG file");

  std::size_t pos = 8;
  std::uint32_t width = 0, height = 0;
  int channels = 0;
  bool seen_ihdr = false;
  std::vector<std::uint8_t> idat;

  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = get_u32be(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) throw Error("decode_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* data = bytes.data() + pos + 8;

    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data() + pos + 4, 4 + len);
    if (static_cast<std::uint32_t>(crc) != get_u32be(data + len))
      throw Error("decode_png: chunk CRC mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw Error("decode_png: bad IHDR");
      width = get_u32be(data);
      height = get_u32be(data + 4);
      const int depth = data[8], color = data[9], interlace = data[12];
      if (depth != 8) throw Error("decode_png: only 8-bit depth supported");
      if (interlace != 0) throw Error("decode_png: interlaced PNG not supported");
      switch (color) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 4: channels = 2; break;
        case 6: channels = 4; break;
        default: throw Error("decode_png: unsupported color type " + std::to_string(color));
      }
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || idat.empty() || width == 0 || height == 0)
    throw Error("decode_png: missing IHDR or IDAT");

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(height) * (stride + 1));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw Error("decode_png: inflate failed");

  // Unfilter in place into a contiguous pixel buffer.
  std::vector<std::uint8_t> pix(static_cast<std::size_t>(height) * stride);
  const int bpp = channels;
  for (std::uint32_t y = 0; y < height; ++y) {
    const std::uint8_t f = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* dst = pix.data() + y * stride;
    const std::uint8_t* up = y > 0 ? pix.data() + (y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
      int v = src[i];
      switch (f) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw Error("decode_png: unknown filter " + std::to_string(f));
      }
      dst[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }

  Image img(height, width);
  for (std::uint32_t y = 0; y < height; ++y)
    for (std::uint32_t x = 0; x < width; ++x) {
      const std::uint8_t* p = pix.data() + y * stride + static_cast<std::size_t>(x) * channels;
      if (channels <= 2) {
        const Scalar v = from_byte(p[0]);
        for (int c = 0; c < 3; ++c) img.ch[c](y, x) = v;
      } else {
        for (int c = 0; c < 3; ++c) img.ch[c](y, x) = from_byte(p[c]);
      }
    }
  return img;
}

}  // namespace artifact
