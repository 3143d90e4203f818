#include <doctest.h>

#include <random>

#include "artifact/latent.hpp"
#include "artifact/image.hpp"

using namespace artifact;

TEST_SUITE_BEGIN("core");

TEST_CASE("predefined_mask thirds partition for k=18") {
  const LevelMask s = predefined_mask(Level::S, 18);
  // Styles w1..w6 (1-based) selected, everything else frozen.
  for (Index i = 0; i < 18; ++i) CHECK(s[i] == (i < 6));

  const LevelMask full = predefined_mask(Level::Full, 18);
  for (Index i = 0; i < 18; ++i) CHECK(full[i]);
}

TEST_CASE("predefined_mask middle third for k=6") {
  // Thirds of 6: {0,1}, {2,3}, {4,5} (0-based), computed by hand.
  const LevelMask m = predefined_mask(Level::M, 6);
  for (Index i = 0; i < 6; ++i) CHECK(m[i] == (i == 2 || i == 3));
}

TEST_CASE("predefined_mask rejects non-multiples of 3") {
  CHECK_THROWS_AS(predefined_mask(Level::S, 7), ConfigError);
  CHECK_THROWS_AS(predefined_mask(Level::Full, 0), ConfigError);
}

TEST_CASE("S/M/D partition is disjoint and covers Full") {
  for (Index k : {3, 6, 9, 18, 24}) {
    const LevelMask s = predefined_mask(Level::S, k);
    const LevelMask m = predefined_mask(Level::M, k);
    const LevelMask d = predefined_mask(Level::D, k);
    for (Index i = 0; i < k; ++i) {
      const int count = int(s[i]) + int(m[i]) + int(d[i]);
      CHECK(count == 1);  // pairwise disjoint, union = Full
    }
  }
}

TEST_CASE("label encoding is the fixed real=0 fake=1 convention") {
  CHECK(label_to_scalar(Label::real) == 0.0);
  CHECK(label_to_scalar(Label::fake) == 1.0);
  CHECK(verdict_from_score(0.49) == Label::real);
  CHECK(verdict_from_score(0.5) == Label::real);  // fake only strictly above 0.5
  CHECK(verdict_from_score(0.51) == Label::fake);
}

TEST_CASE("latent arithmetic is value-semantic and shape preserving") {
  std::mt19937_64 rng(11);
  std::normal_distribution<Scalar> gauss;
  Latent a(6, 4), b(6, 4);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 4; ++j) {
      a.codes(i, j) = gauss(rng);
      b.codes(i, j) = gauss(rng);
    }
  const Latent a_copy = a;
  Latent sum(6, 4);
  sum.codes = a.codes + 2.0 * b.codes;
  CHECK(bit_equal(a, a_copy));
  CHECK(sum.num_styles() == 6);
  CHECK(sum.dim() == 4);

  const Matrix s = sign_of<Scalar>(a.codes);
  CHECK(bit_equal(a, a_copy));
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 4; ++j)
      CHECK(s(i, j) == (a.codes(i, j) > 0 ? 1.0 : a.codes(i, j) < 0 ? -1.0 : 0.0));
}

TEST_CASE("sign_of maps zero to zero") {
  Latent z(2, 2);
  z.codes << 0.0, -3.5, 1e-300, 0.0;
  const Matrix s = sign_of<Scalar>(z.codes);
  CHECK(s(0, 0) == 0.0);
  CHECK(s(0, 1) == -1.0);
  CHECK(s(1, 0) == 1.0);
  CHECK(s(1, 1) == 0.0);
}

TEST_CASE("image clamp keeps values in range and 8-bit rounding is half-up") {
  Image img(2, 2);
  img.ch[0] << -0.5, 0.25, 1.5, 1.0;
  const Image c = clamp01(img);
  CHECK(c.ch[0](0, 0) == 0.0);
  CHECK(c.ch[0](1, 0) == 1.0);

  CHECK(to_byte(0.0) == 0);
  CHECK(to_byte(1.0) == 255);
  // 0.5/255 boundary rounds up.
  CHECK(to_byte(0.5 / 255.0) == 1);
  CHECK(to_byte(0.499 / 255.0) == 0);
}

TEST_SUITE_END();
