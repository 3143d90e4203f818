#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "artifact/models.hpp"

namespace artifact::viz {

// Spatial map normalized into [0,1]; identically-zero maps stay all-zero.
struct HeatMap {
  Matrix values;
  std::string colormap = "viridis";
};

// Min-max normalization; a zero-range input maps to the all-zero field.
Matrix normalize_map(const Matrix& m);

// Channel-mean absolute difference, min-max normalized.
HeatMap residual_map(const Image& original, const Image& counterfactual);

// Gradient-weighted activation map at the named layer: channel weights are
// spatial means of the score gradients, the weighted activation sum is
// rectified, bilinearly upsampled to input size and normalized.
HeatMap gradcam_map(const DetectorHandle& d, const Image& x, const std::string& layer);

Matrix upsample_bilinear(const Matrix& src, Index rows, Index cols);

// Renders a heat map through its colormap.
Image render_heatmap(const HeatMap& map);

// Writes the rendered PNG plus a "<path>.meta" sidecar recording the
// colormap identifier.
void save_heatmap(const std::filesystem::path& path, const HeatMap& map);

struct GridRow {
  Image original;
  std::vector<Image> per_method;
};

// Side-by-side grid: one row per input, columns = original then one per
// method, with a text label strip above each column. Deterministic layout:
//   width  = (methods+1) * (side+gap) + gap
//   height = header + rows * (side+gap) + gap
// with gap = 2 and header = 12 pixels.
inline constexpr Index kGridGap = 2;
inline constexpr Index kGridHeader = 12;

Image comparison_grid(const std::vector<GridRow>& rows,
                      const std::vector<std::string>& method_labels);

// 5x7 uppercase bitmap text, used for the grid labels.
void draw_text(Image& img, Index y, Index x, const std::string& text,
               Scalar r = 1.0, Scalar g = 1.0, Scalar b = 1.0);

}  // namespace artifact::viz
