#pragma once

#include <span>
#include <vector>

namespace esmd {

// Pairwise (cascade) summation: result depends only on the order of values.
double pairwise_sum(std::span<const double> values);
double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> values);
// Linear-interpolation quantile (Hyndman-Fan type 7), q in [0, 1].
double quantile(std::vector<double> values, double q);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double residual = 0.0;  // residual sum of squares
  std::size_t n_points = 0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace esmd
