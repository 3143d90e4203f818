#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "artifact/image.hpp"
#include "artifact/latent.hpp"

namespace artifact {

// Latent file format: k*dim IEEE-754 binary32 values, little-endian,
// style-major (all of style 0, then style 1, ...). A text sidecar
// "<path>.meta" records the shape as "num_styles=<k>\ndim=<d>\n".
void save_latent(const std::filesystem::path& path, const Latent& w);
Latent load_latent(const std::filesystem::path& path);

std::vector<std::uint8_t> latent_to_bytes(const Latent& w);
Latent latent_from_bytes(const std::vector<std::uint8_t>& bytes, Index num_styles, Index dim);

// 8-bit RGB PNG. Writing is deterministic: fixed filter and zlib settings,
// no ancillary chunks. Reading accepts 8-bit gray/RGB/RGBA, non-interlaced.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const void* data, std::size_t size);
std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace artifact
