#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "artifact/image.hpp"
#include "artifact/latent.hpp"
#include "artifact/toy.hpp"

namespace testsupport {

using namespace artifact;

// One toy world shared by every suite in the binary; built on first use.
inline const toy::ToyWorld& shared_world() {
  static const toy::ToyWorld world = [] {
    BackendOptions opts;
    opts.seed = 42;
    opts.train_per_class = 250;
    opts.heldout_per_class = 80;
    return toy::make_toy_world(opts);
  }();
  return world;
}

inline Image random_image(std::uint64_t seed, Index side) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
  Image img(side, side);
  for (auto& c : img.ch)
    for (Index y = 0; y < side; ++y)
      for (Index x = 0; x < side; ++x) c(y, x) = unif(rng);
  return img;
}

inline Latent random_latent(std::uint64_t seed, Index num_styles, Index dim,
                            Scalar scale = 0.7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> gauss(0.0, scale);
  Latent w(num_styles, dim);
  for (Index i = 0; i < num_styles; ++i)
    for (Index j = 0; j < dim; ++j) w.codes(i, j) = gauss(rng);
  return w;
}

// Unique scratch directory under the system temp root, removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("artifact-test-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testsupport
