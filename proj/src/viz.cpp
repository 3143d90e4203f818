#include "artifact/viz.hpp"

#include <cmath>

#include "artifact/io.hpp"

namespace artifact::viz {

Matrix normalize_map(const Matrix& m) {
  const Scalar lo = m.minCoeff(), hi = m.maxCoeff();
  if (hi - lo <= 0.0) return Matrix::Zero(m.rows(), m.cols());
  return (m.array() - lo) / (hi - lo);
}

HeatMap residual_map(const Image& original, const Image& counterfactual) {
  if (!same_shape(original, counterfactual))
    throw ShapeError("residual_map: image shapes differ");
  Matrix acc = Matrix::Zero(original.height(), original.width());
  for (int c = 0; c < 3; ++c)
    acc += (original.ch[c] - counterfactual.ch[c]).abs().matrix();
  acc /= 3.0;
  return {normalize_map(acc), "viridis"};
}

HeatMap gradcam_map(const DetectorHandle& d, const Image& x, const std::string& layer) {
  const LayerMaps maps = gradcam_activations(d, x, layer);
  if (maps.activations.empty()) throw BackendError("gradcam_map: empty activation stack");
  Matrix weighted = Matrix::Zero(maps.activations[0].rows(), maps.activations[0].cols());
  for (std::size_t c = 0; c < maps.activations.size(); ++c)
    weighted += maps.gradients[c].mean() * maps.activations[c];
  weighted = weighted.cwiseMax(0.0);  // rectification
  const Matrix up = upsample_bilinear(weighted, x.height(), x.width());
  return {normalize_map(up), "viridis"};
}

Matrix upsample_bilinear(const Matrix& src, Index rows, Index cols) {
  Matrix out(rows, cols);
  const Scalar sy = Scalar(src.rows()) / rows, sx = Scalar(src.cols()) / cols;
  for (Index y = 0; y < rows; ++y)
    for (Index x = 0; x < cols; ++x) {
      const Scalar fy = std::max(0.0, std::min(Scalar(src.rows() - 1), (y + 0.5) * sy - 0.5));
      const Scalar fx = std::max(0.0, std::min(Scalar(src.cols() - 1), (x + 0.5) * sx - 0.5));
      const Index y0 = static_cast<Index>(fy), x0 = static_cast<Index>(fx);
      const Index y1 = std::min(y0 + 1, src.rows() - 1), x1 = std::min(x0 + 1, src.cols() - 1);
      const Scalar wy = fy - y0, wx = fx - x0;
      out(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                  wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
    }
  return out;
}

namespace {

// Anchor points of the viridis ramp, linearly interpolated.
constexpr Scalar kViridis[9][3] = {
    {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
    {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558}, {0.128, 0.567, 0.551},
    {0.135, 0.659, 0.518}, {0.478, 0.821, 0.318}, {0.993, 0.906, 0.144}};

void viridis(Scalar v, Scalar rgb[3]) {
  v = std::max(0.0, std::min(1.0, v));
  const Scalar pos = v * 8.0;
  const int i = std::min(7, static_cast<int>(pos));
  const Scalar t = pos - i;
  for (int c = 0; c < 3; ++c) rgb[c] = (1 - t) * kViridis[i][c] + t * kViridis[i + 1][c];
}

// 5x7 uppercase glyphs, one row per byte (5 low bits).
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
    {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
    {'D', {0x1e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1e}},
    {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
    {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
    {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
    {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
    {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
    {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
    {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
    {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11}},
    {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kFont)
    if (g.ch == c) return &g;
  return nullptr;
}

}  // namespace

void draw_text(Image& img, Index y, Index x, const std::string& text, Scalar r, Scalar g,
               Scalar b) {
  Index cx = x;
  for (char ch : text) {
    const Glyph* glyph = find_glyph(ch);
    if (glyph) {
      for (Index gy = 0; gy < 7; ++gy)
        for (Index gx = 0; gx < 5; ++gx)
          if (glyph->rows[gy] & (0x10 >> gx)) {
            const Index py = y + gy, px = cx + gx;
            if (py >= 0 && py < img.height() && px >= 0 && px < img.width()) {
              img.ch[0](py, px) = r;
              img.ch[1](py, px) = g;
              img.ch[2](py, px) = b;
            }
          }
    }
    cx += 6;
  }
}

Image render_heatmap(const HeatMap& map) {
  Image img(map.values.rows(), map.values.cols());
  Scalar rgb[3];
  for (Index y = 0; y < map.values.rows(); ++y)
    for (Index x = 0; x < map.values.cols(); ++x) {
      viridis(map.values(y, x), rgb);
      for (int c = 0; c < 3; ++c) img.ch[c](y, x) = rgb[c];
    }
  return img;
}

void save_heatmap(const std::filesystem::path& path, const HeatMap& map) {
  write_png(path, render_heatmap(map));
  const std::string meta = "colormap=" + map.colormap + "\n";
  write_file(path.string() + ".meta", meta.data(), meta.size());
}

Image comparison_grid(const std::vector<GridRow>& rows,
                      const std::vector<std::string>& method_labels) {
  if (rows.empty()) throw CorpusError("comparison_grid: no rows");
  const Index side = rows[0].original.height();
  for (const auto& row : rows) {
    if (row.original.height() != side || row.original.width() != side)
      throw ShapeError("comparison_grid: image sizes differ");
    if (row.per_method.size() != method_labels.size())
      throw ShapeError("comparison_grid: row method count does not match labels");
    for (const auto& img : row.per_method)
      if (img.height() != side || img.width() != side)
        throw ShapeError("comparison_grid: image sizes differ");
  }

  const Index cols = static_cast<Index>(method_labels.size()) + 1;
  const Index width = cols * (side + kGridGap) + kGridGap;
  const Index height = kGridHeader + static_cast<Index>(rows.size()) * (side + kGridGap) + kGridGap;
  Image grid = Image::constant(height, width, 0.15);

  auto blit = [&](const Image& tile, Index y, Index x) {
    for (int c = 0; c < 3; ++c)
      grid.ch[c].block(y, x, side, side) = tile.ch[c];
  };

  std::vector<std::string> headers;
  headers.push_back("ORIG");
  headers.insert(headers.end(), method_labels.begin(), method_labels.end());
  for (Index col = 0; col < cols; ++col)
    draw_text(grid, 2, kGridGap + col * (side + kGridGap) + 1, headers[col]);

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index y = kGridHeader + static_cast<Index>(r) * (side + kGridGap);
    blit(rows[r].original, y, kGridGap);
    for (std::size_t m = 0; m < rows[r].per_method.size(); ++m)
      blit(rows[r].per_method[m], y, kGridGap + static_cast<Index>(m + 1) * (side + kGridGap));
  }
  return grid;
}

}  // namespace artifact::viz
