#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kmlp::spline {

inline constexpr int kDefaultDegree = 3;
inline constexpr int kDefaultGridSize = 5;

// Non-decreasing knots u_0 ... u_m for degree-p B-splines. The spline domain
// is [u_p, u_{m-p}] and there are m - p basis functions; for the uniform
// construction m = G + 2p, giving G + p functions over G interior intervals.
class KnotVector {
 public:
  KnotVector(std::vector<double> knots, int degree);

  // G uniform intervals over [lo, hi], padded with p uniformly spaced knots on
  // each side.
  static KnotVector uniform(int grid_size, int degree = kDefaultDegree, double lo = 0.0,
                            double hi = 1.0);

  const std::vector<double>& knots() const { return knots_; }
  int degree() const { return degree_; }
  int grid_size() const { return static_cast<int>(knots_.size()) - 1 - 2 * degree_; }
  std::size_t num_basis() const { return knots_.size() - 1 - static_cast<std::size_t>(degree_); }
  double domain_lo() const { return knots_[static_cast<std::size_t>(degree_)]; }
  double domain_hi() const { return knots_[knots_.size() - 1 - static_cast<std::size_t>(degree_)]; }

  // Knot span index k with u_k <= u < u_{k+1}, restricted to the domain; the
  // right domain end maps to the last non-empty span.
  std::size_t span(double u) const;

  friend bool operator==(const KnotVector&, const KnotVector&) = default;

 private:
  std::vector<double> knots_;
  int degree_;
};

// N_{i,p}(u) by the two-term recursion, with 0/0 := 0. The degree-0 indicator
// is half-open [u_i, u_{i+1}) except on the final knot span, which is closed.
double basis(double u, std::size_t i, int p, const KnotVector& kv);

// All num_basis() values N_{i,p}(u) at once, u clamped to the domain. At most
// p + 1 entries are non-zero.
std::vector<double> basis_row(double u, const KnotVector& kv);
void basis_row_into(double u, const KnotVector& kv, std::span<double> out);

// d/du of basis_row; zero outside the domain (the clamp is flat there) and for
// p = 0.
std::vector<double> basis_row_derivative(double u, const KnotVector& kv);
void basis_row_derivative_into(double u, const KnotVector& kv, std::span<double> out);

}  // namespace kmlp::spline
