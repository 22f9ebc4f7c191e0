#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bfa/model.hpp"

namespace bfa {

struct Dataset {
  std::string name;
  std::vector<LabeledPoint> points;
  std::size_t num_classes = 0;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t gen_seed = 0;

  std::size_t dim() const { return points.empty() ? 0 : static_cast<std::size_t>(points.front().x.size()); }
  std::vector<LabeledPoint> train() const;
  std::vector<LabeledPoint> test() const;

  // Unit cube membership, label range, split partition, class coverage.
  void validate() const;
};

// Translates and uniformly scales the points into [0,1]^d. A single scale
// factor keeps every pairwise distance ratio intact.
void rescale_to_unit_cube(std::vector<Vec>& points);

// Per-class stratified split; each class with >= 2 members lands in both halves.
void stratified_split(Dataset& ds, double test_fraction, std::uint64_t seed);

Dataset gen_blobs(std::size_t classes, std::size_t dim, std::size_t n_per_class, double spread,
                  std::uint64_t seed, double test_fraction = 0.5);
Dataset gen_moons(std::size_t n_per_class, double noise, std::uint64_t seed,
                  double test_fraction = 0.5);
Dataset gen_rings(std::size_t classes, std::size_t n_per_class, double noise, std::uint64_t seed,
                  double test_fraction = 0.5);

// IDX image/label pair (magic 0x00000803 / 0x00000801). max_items == 0 keeps all.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t max_items = 0, std::size_t downscale = 1);
Dataset parse_idx(const std::string& image_bytes, const std::string& label_bytes,
                  std::size_t max_items = 0, std::size_t downscale = 1);

// Header x0..x{d-1},y then one row per point.
void write_csv(const Dataset& ds, std::ostream& out);

// Mean over coordinates of the per-coordinate standard deviation.
double coordinate_std(const Dataset& ds);

}  // namespace bfa
