#include <doctest.h>

#include "artifact/attack.hpp"
#include "artifact/io.hpp"
#include "artifact/viz.hpp"
#include "support.hpp"

using namespace artifact;
using testsupport::shared_world;
using testsupport::TempDir;

namespace {

// Detector stub with scripted layer maps, for definition-level checks.
struct ScriptedCam final : DetectorHandle {
  std::vector<Matrix> acts, grads;
  std::string name() const override { return "scripted"; }
  Index input_side() const override { return acts.at(0).rows(); }
  bool reentrant() const override { return true; }
  bool gradcam_capable() const override { return true; }
  std::vector<std::string> gradcam_layers() const override { return {"layer"}; }
  Scalar score_impl(const Image&) const override { return 0.5; }
  Image score_input_grad(const Image& x) const override {
    return Image(x.height(), x.width());
  }
  LayerMaps layer_maps(const Image&, const std::string&) const override {
    return {acts, grads};
  }
};

}  // namespace

TEST_SUITE_BEGIN("viz");

TEST_CASE("residual map: identical inputs give the all-zero map") {
  const Image img = testsupport::random_image(3, 16);
  const viz::HeatMap map = viz::residual_map(img, img);
  CHECK(map.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("residual map: a single changed pixel normalizes to a lone peak") {
  Image a = Image::constant(8, 8, 0.5);
  Image b = a;
  b.ch[1](3, 5) = 0.9;
  const viz::HeatMap map = viz::residual_map(a, b);
  for (Index y = 0; y < 8; ++y)
    for (Index x = 0; x < 8; ++x)
      CHECK(map.values(y, x) == ((y == 3 && x == 5) ? 1.0 : 0.0));
}

TEST_CASE("residual map is invariant to adding a constant to both inputs") {
  // Dyadic values keep the additions exact in binary floating point.
  Image a(4, 4), b(4, 4);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x < 4; ++x) {
        a.ch[c](y, x) = Scalar(y * 4 + x) / 64.0;
        b.ch[c](y, x) = Scalar((y * 4 + x + 5) % 16) / 64.0;
      }
  const viz::HeatMap base = viz::residual_map(a, b);
  for (auto& c : a.ch) c += 0.25;
  for (auto& c : b.ch) c += 0.25;
  const viz::HeatMap lifted = viz::residual_map(a, b);
  CHECK((base.values - lifted.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("residual map rejects shape mismatches") {
  CHECK_THROWS_AS(viz::residual_map(Image(4, 4), Image(8, 8)), ShapeError);
}

TEST_CASE("gradcam definition collapse: one channel, uniform positive gradient") {
  ScriptedCam cam;
  cam.acts = {Matrix(4, 4)};
  cam.acts[0] << 1, -2, 3, 0, 4, -1, 2, 1, 0, 5, -3, 2, 1, 1, 0, -4;
  cam.grads = {Matrix::Constant(4, 4, 0.125)};
  const Image x(4, 4);
  const viz::HeatMap map = viz::gradcam_map(cam, x, "layer");
  // Expected: rectified activation, min-max normalized (scale falls out).
  const Matrix expected = viz::normalize_map(cam.acts[0].cwiseMax(0.0));
  CHECK((map.values - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("negated gradients give the complementary rectification") {
  ScriptedCam cam;
  cam.acts = {Matrix(2, 2)};
  cam.acts[0] << 1.0, -1.0, 2.0, -2.0;
  cam.grads = {Matrix::Constant(2, 2, 1.0)};
  const Image x(2, 2);
  const viz::HeatMap pos = viz::gradcam_map(cam, x, "layer");
  cam.grads[0] = Matrix::Constant(2, 2, -1.0);
  const viz::HeatMap neg = viz::gradcam_map(cam, x, "layer");
  // Positively contributing cells vanish under the negated score.
  CHECK(pos.values(0, 0) > 0.0);
  CHECK(neg.values(0, 0) == 0.0);
  CHECK(neg.values(1, 1) > 0.0);  // previously rectified away
}

TEST_CASE("gradcam on the toy detector highlights the artifact box on fakes") {
  const auto& world = shared_world();
  const auto& det = *world.detectors[0];
  const toy::Box box = world.generator->artifact_box();

  Scalar inside_pre = 0, outside_pre = 0, inside_post = 0, outside_post = 0;
  int n = 0;
  for (int round = 0; round < 6; ++round) {
    auto fake = world.make_fake("v/cam", mix_seed(60, "cam/" + std::to_string(round)));
    const viz::HeatMap pre = viz::gradcam_map(det, *fake.image, "conv2");

    AttackConfig cfg;
    cfg.epsilon = 0.02;
    cfg.max_queries = 100;
    cfg.target = Label::real;
    cfg.mask = LevelMask::full(6);
    const AttackResult res = latent_attack(encode(*world.encoder, *fake.image),
                                           *world.generator, det, cfg);
    if (res.status != AttackStatus::success) continue;
    const viz::HeatMap post = viz::gradcam_map(det, res.adversarial_image, "conv2");

    const Index side = pre.values.rows();
    for (Index y = 0; y < side; ++y)
      for (Index x = 0; x < side; ++x) {
        (box.contains(y, x) ? inside_pre : outside_pre) += pre.values(y, x);
        (box.contains(y, x) ? inside_post : outside_post) += post.values(y, x);
      }
    ++n;
  }
  REQUIRE(n >= 4);
  const Scalar box_area = 144.0, out_area = 1024.0 - 144.0;
  // Mean heat density concentrates in the box before the attack and drops
  // after the artifact is removed.
  CHECK(inside_pre / box_area > outside_pre / out_area);
  CHECK(inside_post / box_area < inside_pre / box_area);
}

TEST_CASE("heat maps normalize to [0,1] with max 1 unless identically zero") {
  const auto& world = shared_world();
  const Image fake = *world.make_fake("v/n", mix_seed(61, "nrm")).image;
  const Image real = *world.make_real("v/n2", mix_seed(62, "nrm")).image;
  const viz::HeatMap map = viz::residual_map(fake, real);
  CHECK(map.values.minCoeff() == 0.0);
  CHECK(map.values.maxCoeff() == 1.0);
}

TEST_CASE("comparison grid layout arithmetic and determinism") {
  const auto& world = shared_world();
  const Index side = 32;
  std::vector<viz::GridRow> rows;
  for (int r = 0; r < 3; ++r) {
    viz::GridRow row;
    row.original = *world.make_fake("v/g", mix_seed(63, "grid/" + std::to_string(r))).image;
    row.per_method = {testsupport::random_image(70 + r, side),
                      testsupport::random_image(80 + r, side)};
    rows.push_back(std::move(row));
  }
  const Image grid = viz::comparison_grid(rows, {"LATENT", "FGSM"});
  // Layout: width = (m+1)*(side+gap)+gap, height = header + n*(side+gap)+gap.
  CHECK(grid.width() == 3 * (side + viz::kGridGap) + viz::kGridGap);
  CHECK(grid.height() == viz::kGridHeader + 3 * (side + viz::kGridGap) + viz::kGridGap);

  const Image again = viz::comparison_grid(rows, {"LATENT", "FGSM"});
  CHECK(encode_png(grid) == encode_png(again));  // byte-identical PNG

  // One row, one method: 1x2 tile grid.
  viz::GridRow one;
  one.original = rows[0].original;
  one.per_method = {rows[0].per_method[0]};
  const Image small = viz::comparison_grid({one}, {"LATENT"});
  CHECK(small.width() == 2 * (side + viz::kGridGap) + viz::kGridGap);
  CHECK(small.height() == viz::kGridHeader + (side + viz::kGridGap) + viz::kGridGap);

  CHECK_THROWS_AS(viz::comparison_grid({}, {"LATENT"}), CorpusError);
  viz::GridRow bad;
  bad.original = Image(16, 16);
  bad.per_method = {Image(32, 32)};
  CHECK_THROWS_AS(viz::comparison_grid({bad}, {"X"}), ShapeError);
}

TEST_CASE("heatmap png sidecar records the colormap") {
  TempDir tmp("heat");
  viz::HeatMap map;
  map.values = Matrix::Zero(8, 8);
  map.values(2, 2) = 1.0;
  viz::save_heatmap(tmp.path / "m.png", map);
  const auto meta = read_file(tmp.path / "m.png.meta");
  const std::string text(meta.begin(), meta.end());
  CHECK(text == "colormap=viridis\n");
  const Image rendered = read_png(tmp.path / "m.png");
  CHECK(rendered.height() == 8);
}

TEST_CASE("bilinear upsample preserves constants") {
  const Matrix src = Matrix::Constant(4, 4, 0.7);
  const Matrix up = viz::upsample_bilinear(src, 32, 32);
  CHECK((up.array() - 0.7).abs().maxCoeff() < 1e-12);
}

TEST_SUITE_END();
