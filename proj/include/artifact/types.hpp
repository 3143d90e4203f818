#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace artifact {

using Index = Eigen::Index;
using Scalar = double;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <typename S>
using VectorT = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using ArrayT = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor/latent geometry between caller and handle.
struct ShapeError : Error {
  using Error::Error;
};

// Bad or rejected configuration (unknown key, invalid value, usage).
struct ConfigError : Error {
  using Error::Error;
};

// A model backend failed or lacks a required capability.
struct BackendError : Error {
  using Error::Error;
};

// Empty or unusable input corpus.
struct CorpusError : Error {
  using Error::Error;
};

// FNV-1a over raw bytes; used for parameter digests and reproducibility checks.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

// splitmix64; derives stable per-item seeds from (experiment seed, item id).
inline std::uint64_t mix_seed(std::uint64_t seed, const std::string& id) {
  std::uint64_t z = seed ^ fnv1a64(id);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace artifact
