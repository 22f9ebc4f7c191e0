#include "bfa/rng.hpp"

namespace bfa {

std::uint64_t mix64(std::uint64_t v) noexcept {
  v += 0x9E3779B97F4A7C15ULL;
  v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ULL;
  v = (v ^ (v >> 27)) * 0x94D049BB133111EBULL;
  return v ^ (v >> 31);
}

std::uint64_t derive_key(std::uint64_t key, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(key);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

Eigen::VectorXd gaussian_vector(Engine& engine, Eigen::Index dim, double sigma) {
  std::normal_distribution<double> normal(0.0, sigma);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(engine);
  return v;
}

}  // namespace bfa
