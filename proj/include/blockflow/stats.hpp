#pragma once

#include <span>
#include <vector>

namespace blockflow {

double median(std::vector<double> v);
/// Sample skewness m3 / m2^(3/2); 0 for fewer than two values or no spread.
double skewness(std::span<const double> v);

struct HistogramBin {
  double lo = 0;
  double hi = 0;
  std::size_t count = 0;
};

/// Equal-width bins of `width` aligned to multiples of the width.
std::vector<HistogramBin> histogram(std::span<const double> v, double width);

}  // namespace blockflow
