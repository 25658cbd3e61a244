#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace itg {

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - hi);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

// log(sum(exp(x))) without overflow; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> xs) {
  double hi = -INFINITY;
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace itg
