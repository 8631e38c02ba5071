#include "blockflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blockflow {

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double skewness(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double m2 = 0, m3 = 0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(v.size());
  m3 /= static_cast<double>(v.size());
  if (m2 <= 0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

std::vector<HistogramBin> histogram(std::span<const double> v, double width) {
  if (!(width > 0)) throw std::invalid_argument("histogram bin width must be positive");
  std::vector<HistogramBin> bins;
  if (v.empty()) return bins;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const long first = static_cast<long>(std::floor(*lo_it / width));
  const long last = static_cast<long>(std::floor(*hi_it / width));
  for (long b = first; b <= last; ++b) {
    bins.push_back({static_cast<double>(b) * width, static_cast<double>(b + 1) * width, 0});
  }
  for (double x : v) {
    const long b = static_cast<long>(std::floor(x / width));
    bins[static_cast<std::size_t>(b - first)].count++;
  }
  return bins;
}

}  // namespace blockflow
