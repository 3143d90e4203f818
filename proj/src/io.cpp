#include "artifact/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace artifact {

namespace {

void put_f32le(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  out.push_back(static_cast<std::uint8_t>(u & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
}

float get_f32le(const std::uint8_t* p) {
  std::uint32_t u = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                    (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace

std::vector<std::uint8_t> latent_to_bytes(const Latent& w) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(4 * w.num_styles() * w.dim()));
  for (Index i = 0; i < w.num_styles(); ++i)
    for (Index j = 0; j < w.dim(); ++j)
      put_f32le(out, static_cast<float>(w.codes(i, j)));
  return out;
}

Latent latent_from_bytes(const std::vector<std::uint8_t>& bytes, Index num_styles, Index dim) {
  if (static_cast<Index>(bytes.size()) != 4 * num_styles * dim)
    throw ShapeError("latent payload size " + std::to_string(bytes.size()) +
                     " does not match shape (" + std::to_string(num_styles) + "," +
                     std::to_string(dim) + ")");
  Latent w(num_styles, dim);
  const std::uint8_t* p = bytes.data();
  for (Index i = 0; i < num_styles; ++i)
    for (Index j = 0; j < dim; ++j, p += 4) w.codes(i, j) = get_f32le(p);
  return w;
}

void save_latent(const std::filesystem::path& path, const Latent& w) {
  const auto bytes = latent_to_bytes(w);
  write_file(path, bytes.data(), bytes.size());
  std::ostringstream meta;
  meta << "num_styles=" << w.num_styles() << "\n"
       << "dim=" << w.dim() << "\n";
  const std::string m = meta.str();
  write_file(path.string() + ".meta", m.data(), m.size());
}

Latent load_latent(const std::filesystem::path& path) {
  std::ifstream meta(path.string() + ".meta");
  if (!meta) throw Error("cannot open latent sidecar: " + path.string() + ".meta");
  Index num_styles = -1, dim = -1;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const long long value = std::stoll(line.substr(eq + 1));
    if (key == "num_styles") num_styles = value;
    else if (key == "dim") dim = value;
    else throw Error("unknown latent sidecar key: " + key);
  }
  if (num_styles <= 0 || dim <= 0)
    throw Error("latent sidecar missing num_styles/dim: " + path.string());
  return latent_from_bytes(read_file(path), num_styles, dim);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error("write failed: " + path.string());
}

std::uint64_t file_digest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return fnv1a64(bytes.data(), bytes.size());
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  write_file(path, bytes.data(), bytes.size());
}

Image read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

}  // namespace artifact
