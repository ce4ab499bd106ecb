#pragma once

// Independent reference implementations used only by the tests. Each one is
// written from the defining formula, without calling into the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

// Cardinal cubic B-spline on unit-spaced knots t, t+1, ..., t+4, as explicit
// polynomial pieces.
inline double cardinal_cubic(double s) {
  if (s < 0.0 || s >= 4.0) return 0.0;
  if (s < 1.0) return s * s * s / 6.0;
  if (s < 2.0) return (-3.0 * s * s * s + 12.0 * s * s - 12.0 * s + 4.0) / 6.0;
  if (s < 3.0) return (3.0 * s * s * s - 24.0 * s * s + 60.0 * s - 44.0) / 6.0;
  const double r = 4.0 - s;
  return r * r * r / 6.0;
}

// Uniform cubic basis i of a grid with G intervals over [0, 1], padded by 3
// knots each side: knot k sits at (k - 3) / G.
inline double uniform_cubic_basis(double u, int i, int G) {
  return cardinal_cubic(u * G + 3.0 - i);
}

// Textbook Cox-de Boor with a half-open base interval.
inline double cox_de_boor(const std::vector<double>& U, int i, int p, double u) {
  if (p == 0) return (U[i] <= u && u < U[i + 1]) ? 1.0 : 0.0;
  double a = 0.0;
  double b = 0.0;
  const double d1 = U[i + p] - U[i];
  const double d2 = U[i + p + 1] - U[i + 1];
  if (d1 > 0.0) a = (u - U[i]) / d1 * cox_de_boor(U, i, p - 1, u);
  if (d2 > 0.0) b = (U[i + p + 1] - u) / d2 * cox_de_boor(U, i + 1, p - 1, u);
  return a + b;
}

// Rank-interpolated quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// QTL by linear scan for the interval (b_i, b_{i+1}] containing x.
inline double qtl(double x, const std::vector<double>& b) {
  const std::size_t n = b.size() - 1;
  if (x <= b.front()) return 0.0;
  if (x >= b.back()) return 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (b[i] < x && x <= b[i + 1]) {
      return (static_cast<double>(i) + (x - b[i]) / (b[i + 1] - b[i])) / static_cast<double>(n);
    }
  }
  return 1.0;
}

inline std::vector<double> ple(double x, const std::vector<double>& b) {
  std::vector<double> e(b.size() - 1);
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    if (x < b[i]) {
      e[i] = 0.0;
    } else if (x >= b[i + 1]) {
      e[i] = 1.0;
    } else {
      e[i] = (x - b[i]) / (b[i + 1] - b[i]);
    }
  }
  return e;
}

// O(P*N) pair counting with half credit for ties.
inline double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double pairs = 0.0;
  double credit = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        credit += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
  }
  return credit / pairs;
}

// KS by scanning every candidate threshold "score >= t".
inline double ks_scan(const std::vector<double>& s, const std::vector<int>& y) {
  const double P = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double N = static_cast<double>(y.size()) - P;
  double best = 0.0;
  for (double t : s) {
    double tp = 0.0;
    double fp = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] == 1 ? tp : fp) += 1.0;
    }
    best = std::max(best, tp / P - fp / N);
  }
  return best;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }

// Central difference of f at x.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
