#include <doctest.h>

#include <cmath>
#include <random>

#include "artifact/metrics.hpp"
#include "artifact/toy.hpp"
#include "support.hpp"

using namespace artifact;
using testsupport::shared_world;

namespace {

// Smooth two-way luminance ramp; patch-level texture is near zero.
Image gradient_image(Index side) {
  Image img(side, side);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < side; ++y)
      for (Index x = 0; x < side; ++x)
        img.ch[c](y, x) = 0.2 + 0.5 * (Scalar(x) + Scalar(y)) / (2.0 * side);
  return img;
}

Image add_gaussian_noise(const Image& img, Scalar sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> gauss(0.0, sigma);
  Image out = img;
  for (auto& c : out.ch)
    for (Index y = 0; y < c.rows(); ++y)
      for (Index x = 0; x < c.cols(); ++x) c(y, x) += gauss(rng);
  return out;  // unclamped by construction: base stays well inside [0,1]
}

struct HalfEmbedder final : IdentityEmbedderHandle {
  // Similarity = 1 - 2 * |first pixel difference|; crafted to straddle the
  // retention threshold.
  Index embedding_dim() const override { return 2; }
  Vector embed(const Image& x) const override {
    const Scalar t = x.ch[0](0, 0);
    Vector e(2);
    e << std::cos(t), std::sin(t);
    return e;
  }
};

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("attack_success_rate: unanimous outcomes and both denominators") {
  toy::PixelMeanDetector det(2);
  std::vector<AttackResult> records(4);
  for (int i = 0; i < 4; ++i) {
    records[i].adversarial_image = Image::constant(2, 2, 0.1);  // verdict real
    records[i].status = i < 3 ? AttackStatus::success : AttackStatus::budget_exhausted;
  }
  const AsrReport all_real = attack_success_rate(records, det, Label::real);
  CHECK(all_real.over_all == 1.0);
  CHECK(all_real.n_all == 4);
  CHECK(all_real.n_source_success == 3);
  REQUIRE(all_real.over_source_success.has_value());
  CHECK(*all_real.over_source_success == 1.0);

  const AsrReport none = attack_success_rate(records, det, Label::fake);
  CHECK(none.over_all == 0.0);

  std::vector<AttackResult> empty;
  CHECK_THROWS_AS(attack_success_rate(empty, det, Label::real), CorpusError);
}

TEST_CASE("total_variation: constant image is zero") {
  CHECK(total_variation(Image::constant(8, 8, 0.37)) == 0.0);
}

TEST_CASE("total_variation: single vertical edge matches direct summation") {
  // 4x4, channel 0 steps from 0 to 1 between columns 1 and 2.
  Image img(4, 4);
  for (Index y = 0; y < 4; ++y)
    for (Index x = 0; x < 4; ++x) img.ch[0](y, x) = x >= 2 ? 1.0 : 0.0;

  // Direct summation of the definition, written independently.
  Scalar acc = 0;
  for (int c = 0; c < 3; ++c) {
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x + 1 < 4; ++x)
        acc += std::abs(img.ch[c](y, x + 1) - img.ch[c](y, x));
    for (Index y = 0; y + 1 < 4; ++y)
      for (Index x = 0; x < 4; ++x)
        acc += std::abs(img.ch[c](y + 1, x) - img.ch[c](y, x));
  }
  const Scalar expected = 1e4 * acc / 16.0;
  CHECK(total_variation(img) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(acc == 4.0);  // one unit jump per row, vertical edges only
}

TEST_CASE("total_variation scales linearly with amplitude") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
  Image img(8, 8);
  for (auto& c : img.ch)
    for (Index y = 0; y < 8; ++y)
      for (Index x = 0; x < 8; ++x) c(y, x) = unif(rng);
  const Scalar tv1 = total_variation(img);
  for (Scalar alpha : {0.5, 0.25, 0.75}) {
    Image scaled = img;
    for (auto& c : scaled.ch) c *= alpha;
    CHECK(total_variation(scaled) == doctest::Approx(alpha * tv1).epsilon(1e-12));
  }
}

TEST_CASE("total_variation is invariant to period-length circular shifts") {
  // Periodic tile (period 4 in both axes) on a 16x16 canvas, shifted by one
  // full period: the image is bit-identical, hence TV equal exactly.
  Image img(16, 16);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < 16; ++y)
      for (Index x = 0; x < 16; ++x)
        img.ch[c](y, x) = 0.25 + 0.5 * (((x % 4) < 2) ^ ((y % 4) < 2));
  Image shifted(16, 16);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < 16; ++y)
      for (Index x = 0; x < 16; ++x)
        shifted.ch[c](y, x) = img.ch[c]((y + 4) % 16, (x + 4) % 16);
  CHECK(bit_equal(img, shifted));
  CHECK(total_variation(shifted) == total_variation(img));
}

TEST_CASE("esnle: near zero on a clean smooth gradient") {
  const Image img = gradient_image(96);
  CHECK(esnle(img) <= 0.005);
}

TEST_CASE("esnle: recovers an injected gaussian sigma within 20 percent") {
  const Image base = gradient_image(96);
  const Scalar sigma = 0.05;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Scalar est = esnle(add_gaussian_noise(base, sigma, seed));
    CHECK(est >= 0.8 * sigma);
    CHECK(est <= 1.2 * sigma);
  }
}

TEST_CASE("esnle is invariant to adding a constant") {
  const Image base = add_gaussian_noise(gradient_image(48), 0.03, 9);
  Image lifted = base;
  for (auto& c : lifted.ch) c += 0.125;
  // Mean removal cancels the shift; only last-ulp rounding differs.
  CHECK(esnle(lifted) == doctest::Approx(esnle(base)).epsilon(1e-10));
}

TEST_CASE("esnle rejects images smaller than the patch") {
  CHECK_THROWS_AS(esnle(Image::constant(5, 5, 0.5)), ShapeError);
}

TEST_CASE("id_retention: identity pairs retain, orthogonal probes do not") {
  const auto& world = shared_world();
  const Image a = *world.make_real("m/a", mix_seed(1, "idr")).image;
  const Image b = *world.make_real("m/b", mix_seed(2, "idr")).image;
  std::vector<const Image*> orig = {&a, &b};
  std::vector<const Image*> same = {&a, &b};
  CHECK(id_retention(orig, same, *world.embedder) == 1.0);

  // Orthogonal-by-construction probe embeddings.
  struct OrthoEmbedder final : IdentityEmbedderHandle {
    Index embedding_dim() const override { return 2; }
    Vector embed(const Image& x) const override {
      Vector e = Vector::Zero(2);
      e[x.ch[0](0, 0) > 0.5 ? 1 : 0] = 1.0;
      return e;
    }
  } ortho;
  const Image black = Image::constant(4, 4, 0.0);
  const Image white = Image::constant(4, 4, 1.0);
  std::vector<const Image*> o1 = {&black}, o2 = {&white};
  CHECK(id_retention(o1, o2, ortho) == 0.0);

  std::vector<const Image*> empty;
  CHECK_THROWS_AS(id_retention(empty, empty, *world.embedder), CorpusError);
}

TEST_CASE("quality report pins id_retained to the 0.75 threshold") {
  HalfEmbedder embedder;
  toy::MsGradPerceptual perceptual;
  // Angle difference of acos(0.75) is the exact boundary; probe both sides.
  const Scalar boundary = std::acos(0.75);
  for (Scalar delta : {boundary * 0.9, boundary * 1.1}) {
    Image a(8, 8), b(8, 8);
    for (auto& c : a.ch) c.setConstant(0.2);
    for (auto& c : b.ch) c.setConstant(0.2);
    b.ch[0](0, 0) = 0.2 + delta;
    const QualityReport q = make_quality_report(a, b, perceptual, embedder);
    CHECK(q.id_retained == (q.id_similarity >= 0.75));
    CHECK(q.tv >= 0.0);
    CHECK(q.esnle >= 0.0);
  }
}

TEST_CASE("video verdict thresholds the mean frame score") {
  CHECK(video_verdict({0.9, 0.8, 0.1}) == Label::fake);   // mean 0.6
  CHECK(video_verdict({0.4, 0.45, 0.5}) == Label::real);  // mean 0.45
  CHECK(video_verdict({0.5, 0.5}) == Label::real);        // exactly 0.5 is real
  CHECK_THROWS_AS(video_verdict({}), CorpusError);
}

TEST_SUITE_END();
