#pragma once

#include <string>
#include <vector>

#include "artifact/types.hpp"

namespace artifact {

// Stack of style vectors in the generator's extended latent space.
// Row i holds style vector i; shape is (num_styles, dim).
template <typename S>
struct LatentT {
  MatrixT<S> codes;

  LatentT() = default;
  LatentT(Index num_styles, Index dim) : codes(MatrixT<S>::Zero(num_styles, dim)) {}
  explicit LatentT(MatrixT<S> m) : codes(std::move(m)) {}

  Index num_styles() const { return codes.rows(); }
  Index dim() const { return codes.cols(); }
};

using Latent = LatentT<Scalar>;

template <typename S>
bool same_shape(const LatentT<S>& a, const LatentT<S>& b) {
  return a.num_styles() == b.num_styles() && a.dim() == b.dim();
}

template <typename S>
bool bit_equal(const LatentT<S>& a, const LatentT<S>& b) {
  return same_shape(a, b) && !(a.codes.array() != b.codes.array()).any();
}

template <typename S>
bool all_finite(const LatentT<S>& v) {
  return v.codes.array().isFinite().all();
}

// Entrywise sign with sign(0) = 0.
template <typename S>
MatrixT<S> sign_of(const MatrixT<S>& m) {
  return ((m.array() > S(0)).template cast<S>() -
          (m.array() < S(0)).template cast<S>())
      .matrix();
}

// Per-style update gate; flag j tells whether style vector j may move.
struct LevelMask {
  std::vector<bool> flags;

  LevelMask() = default;
  explicit LevelMask(std::vector<bool> f) : flags(std::move(f)) {}

  static LevelMask full(Index num_styles) {
    return LevelMask(std::vector<bool>(static_cast<std::size_t>(num_styles), true));
  }
  static LevelMask none(Index num_styles) {
    return LevelMask(std::vector<bool>(static_cast<std::size_t>(num_styles), false));
  }

  Index size() const { return static_cast<Index>(flags.size()); }
  bool operator[](Index i) const { return flags[static_cast<std::size_t>(i)]; }
  bool operator==(const LevelMask& o) const { return flags == o.flags; }
};

// Style-stack thirds: shallow, middle, deep, or the whole stack.
enum class Level { S, M, D, Full };

inline const char* to_string(Level l) {
  switch (l) {
    case Level::S: return "S";
    case Level::M: return "M";
    case Level::D: return "D";
    case Level::Full: return "Full";
  }
  return "?";
}

inline Level level_from_string(const std::string& s) {
  if (s == "S") return Level::S;
  if (s == "M") return Level::M;
  if (s == "D") return Level::D;
  if (s == "Full") return Level::Full;
  throw ConfigError("unknown level: " + s);
}

// Thirds partition of the style stack. For 18 styles: S = styles 1-6,
// M = styles 7-12, D = styles 13-18 (1-based).
inline LevelMask predefined_mask(Level level, Index num_styles) {
  if (num_styles <= 0 || num_styles % 3 != 0)
    throw ConfigError("predefined_mask: num_styles must be a positive multiple of 3, got " +
                      std::to_string(num_styles));
  if (level == Level::Full) return LevelMask::full(num_styles);
  const Index third = num_styles / 3;
  const Index begin = third * (level == Level::S ? 0 : level == Level::M ? 1 : 2);
  LevelMask m = LevelMask::none(num_styles);
  for (Index i = begin; i < begin + third; ++i)
    m.flags[static_cast<std::size_t>(i)] = true;
  return m;
}

// Binary verdict labels. Numeric encoding real -> 0, fake -> 1 is the single
// source of truth for every loss target and verdict threshold.
enum class Label { real, fake };

inline Scalar label_to_scalar(Label l) { return l == Label::fake ? 1.0 : 0.0; }

// Detector verdict: fake iff score strictly above 0.5.
inline Label verdict_from_score(Scalar score) {
  return score > 0.5 ? Label::fake : Label::real;
}

inline const char* to_string(Label l) { return l == Label::fake ? "fake" : "real"; }

inline Label label_from_string(const std::string& s) {
  if (s == "real") return Label::real;
  if (s == "fake") return Label::fake;
  throw ConfigError("unknown label: " + s);
}

}  // namespace artifact
