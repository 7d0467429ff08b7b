#pragma once

// Test-only reference implementations, independent of the library's
// production code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace oracles {

// Euclidean projection onto the probability simplex by exhaustive support
// search: every support size is tried and verified against the KKT
// conditions, so no closed-form selection rule is trusted.
inline std::vector<double> project_simplex(const std::vector<double>& z) {
  const std::size_t n = z.size();
  std::vector<double> sorted(z);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (std::size_t k = 1; k <= n; ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += sorted[j];
    const double tau = (sum - 1.0) / static_cast<double>(k);
    std::vector<double> p(n);
    double total = 0.0;
    bool valid = true;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::max(z[i] - tau, 0.0);
      total += p[i];
    }
    // KKT: the support must be exactly the coordinates above tau and the
    // result must sum to one.
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] > 0.0) ++support;
    }
    if (support != k) valid = false;
    if (std::abs(total - 1.0) > 1e-9) valid = false;
    if (valid) return p;
  }
  throw std::logic_error("simplex projection oracle found no valid support");
}

// Closed-form two-dimensional projection.
inline std::vector<double> project_simplex_2d(double a, double b) {
  const double p = std::clamp((1.0 + a - b) / 2.0, 0.0, 1.0);
  return {p, 1.0 - p};
}

// Brute-force subset enumeration (feasible for small n): tries all 2^n - 1
// candidate supports and returns the unique KKT-consistent projection.
inline std::vector<double> project_simplex_subsets(const std::vector<double>& z) {
  const std::size_t n = z.size();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    double sum = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        sum += z[i];
        ++k;
      }
    }
    const double tau = (sum - 1.0) / static_cast<double>(k);
    bool valid = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        if (z[i] - tau <= 0.0) valid = false;
      } else {
        if (z[i] - tau > 1e-12) valid = false;
      }
    }
    if (!valid) continue;
    std::vector<double> p(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) p[i] = z[i] - tau;
    }
    return p;
  }
  throw std::logic_error("subset oracle found no valid support");
}

// 1.5-entmax of one row by long-double bisection to |sum - 1| <= 1e-12.
inline std::vector<double> entmax15_reference(const std::vector<double>& z) {
  const std::size_t n = z.size();
  long double zmax = z[0];
  for (double v : z) zmax = std::max<long double>(zmax, v);
  auto mass = [&](long double tau) {
    long double s = 0.0L;
    for (double v : z) {
      const long double t = (static_cast<long double>(v) - zmax - tau) / 2.0L;
      if (t > 0.0L) s += t * t;
    }
    return s;
  };
  long double lo = -2.0L, hi = 0.0L;
  for (int it = 0; it < 200; ++it) {
    const long double mid = (lo + hi) / 2.0L;
    if (mass(mid) >= 1.0L) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const long double tau = (lo + hi) / 2.0L;
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long double t = (static_cast<long double>(z[i]) - zmax - tau) / 2.0L;
    p[i] = t > 0.0L ? static_cast<double>(t * t) : 0.0;
  }
  return p;
}

// Per-row leave-one-out codes computed directly from the raw table.
struct LooOracle {
  std::unordered_map<std::string, double> sums;
  std::unordered_map<std::string, long long> counts;
  double global_mean = 0.0;

  LooOracle(const std::vector<std::string>& cats,
            const std::vector<double>& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < cats.size(); ++i) {
      sums[cats[i]] += y[i];
      counts[cats[i]] += 1;
      total += y[i];
    }
    global_mean = total / static_cast<double>(y.size());
  }

  double train_code(const std::string& cat, double y) const {
    const long long c = counts.at(cat);
    if (c <= 1) return global_mean;
    return (sums.at(cat) - y) / static_cast<double>(c - 1);
  }

  double inference_code(const std::string& cat) const {
    auto it = counts.find(cat);
    if (it == counts.end()) return global_mean;
    return sums.at(cat) / static_cast<double>(it->second);
  }
};

}  // namespace oracles
