#pragma once

#include <optional>
#include <span>
#include <vector>

namespace bfa {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample standard deviation / sqrt(n); 0 when n < 2
  std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> values);

// Mean and standard error of the element-wise difference a - b.
MeanSe paired_difference(std::span<const double> a, std::span<const double> b);

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> ranks(std::span<const double> values);

// Spearman rank correlation; empty when either side has no spread or n < 2.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace bfa
