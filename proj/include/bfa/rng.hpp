#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace bfa {

// Stateless 64-bit mixer (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t v) noexcept;

// Derives a child key from a parent key and an index path, e.g.
// derive_key(seed, {image, iteration, sample}).
std::uint64_t derive_key(std::uint64_t key, std::initializer_list<std::uint64_t> path) noexcept;

using Engine = std::mt19937_64;

// A named, reproducible random stream. Children are index-derived so work
// can be split across threads without changing results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key() const noexcept { return key_; }
  RngStream child(std::uint64_t index) const noexcept { return RngStream(derive_key(key_, {index})); }
  Engine engine() const { return Engine(mix64(key_)); }

 private:
  std::uint64_t key_;
};

// i.i.d. N(0, sigma^2) coordinates.
Eigen::VectorXd gaussian_vector(Engine& engine, Eigen::Index dim, double sigma);

}  // namespace bfa
