#include "kmlp/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "kmlp/error.hpp"

namespace kmlp::spline {

namespace {

constexpr int kMaxDegree = 15;

// Non-vanishing degree-`deg` basis values N_{k-deg}, ..., N_{k} at u on span k
// (triangular Cox-de Boor scheme).
void local_basis(double u, std::size_t k, int deg, const std::vector<double>& U,
                 std::span<double> N) {
  std::array<double, kMaxDegree + 1> left{};
  std::array<double, kMaxDegree + 1> right{};
  N[0] = 1.0;
  for (int j = 1; j <= deg; ++j) {
    left[j] = u - U[k + 1 - static_cast<std::size_t>(j)];
    right[j] = U[k + static_cast<std::size_t>(j)] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom == 0.0 ? 0.0 : N[r] / denom;
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
}

void require_domain(const KnotVector& kv) {
  if (!(kv.domain_lo() < kv.domain_hi())) {
    throw Error(ErrorCode::InvalidConfig, "knot vector has an empty spline domain");
  }
}

}  // namespace

KnotVector::KnotVector(std::vector<double> knots, int degree)
    : knots_(std::move(knots)), degree_(degree) {
  if (degree_ < 0 || degree_ > kMaxDegree) {
    throw Error(ErrorCode::InvalidConfig, "spline degree must be in [0, 15]");
  }
  if (knots_.size() < static_cast<std::size_t>(degree_) + 2) {
    throw Error(ErrorCode::InvalidConfig, "knot vector too short for its degree");
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i]) || (i > 0 && knots_[i] < knots_[i - 1])) {
      throw Error(ErrorCode::InvalidConfig, "knots must be finite and non-decreasing");
    }
  }
}

KnotVector KnotVector::uniform(int grid_size, int degree, double lo, double hi) {
  if (grid_size < 1) throw Error(ErrorCode::InvalidConfig, "grid size must be positive");
  if (!(lo < hi)) throw Error(ErrorCode::InvalidConfig, "grid range must satisfy lo < hi");
  if (degree < 0) throw Error(ErrorCode::InvalidConfig, "spline degree must be non-negative");
  const double width = hi - lo;
  std::vector<double> knots(static_cast<std::size_t>(grid_size + 2 * degree + 1));
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const double steps = static_cast<double>(static_cast<int>(k) - degree);
    knots[k] = lo + width * steps / static_cast<double>(grid_size);
  }
  knots[static_cast<std::size_t>(degree)] = lo;
  knots[static_cast<std::size_t>(degree + grid_size)] = hi;
  return KnotVector(std::move(knots), degree);
}

std::size_t KnotVector::span(double u) const {
  const auto p = static_cast<std::size_t>(degree_);
  const std::size_t m = knots_.size() - 1;
  if (u >= domain_hi()) {
    for (std::size_t k = m - p - 1; k > p; --k) {
      if (knots_[k] < knots_[k + 1]) return k;
    }
    return p;
  }
  if (u <= domain_lo()) u = domain_lo();
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), u);
  const auto k = static_cast<std::size_t>(it - knots_.begin()) - 1;
  return std::clamp(k, p, m - p - 1);
}

double basis(double u, std::size_t i, int p, const KnotVector& kv) {
  const auto& U = kv.knots();
  const std::size_t m = U.size() - 1;
  if (p < 0 || i + static_cast<std::size_t>(p) + 1 > m) {
    throw Error(ErrorCode::InvalidIndex, "basis index " + std::to_string(i) + " out of range");
  }
  if (p == 0) {
    if (U[i] <= u && u < U[i + 1]) return 1.0;
    // The final non-empty span is closed so the last knot is covered.
    if (u == U[i + 1] && U[i + 1] == U[m] && U[i] < U[i + 1]) return 1.0;
    return 0.0;
  }
  const auto sp = static_cast<std::size_t>(p);
  double value = 0.0;
  const double d1 = U[i + sp] - U[i];
  if (d1 != 0.0) value += (u - U[i]) / d1 * basis(u, i, p - 1, kv);
  const double d2 = U[i + sp + 1] - U[i + 1];
  if (d2 != 0.0) value += (U[i + sp + 1] - u) / d2 * basis(u, i + 1, p - 1, kv);
  return value;
}

void basis_row_into(double u, const KnotVector& kv, std::span<double> out) {
  if (out.size() != kv.num_basis()) {
    throw Error(ErrorCode::ShapeError, "basis row span has wrong length");
  }
  require_domain(kv);
  std::fill(out.begin(), out.end(), 0.0);
  const double uc = std::clamp(u, kv.domain_lo(), kv.domain_hi());
  const int p = kv.degree();
  const std::size_t k = kv.span(uc);
  std::array<double, kMaxDegree + 1> local{};
  local_basis(uc, k, p, kv.knots(), local);
  const std::size_t first = k - static_cast<std::size_t>(p);
  for (int r = 0; r <= p; ++r) out[first + static_cast<std::size_t>(r)] = local[r];
}

std::vector<double> basis_row(double u, const KnotVector& kv) {
  std::vector<double> out(kv.num_basis());
  basis_row_into(u, kv, out);
  return out;
}

void basis_row_derivative_into(double u, const KnotVector& kv, std::span<double> out) {
  if (out.size() != kv.num_basis()) {
    throw Error(ErrorCode::ShapeError, "basis derivative span has wrong length");
  }
  require_domain(kv);
  std::fill(out.begin(), out.end(), 0.0);
  const int p = kv.degree();
  if (p == 0 || u < kv.domain_lo() || u > kv.domain_hi()) return;

  const auto& U = kv.knots();
  const auto sp = static_cast<std::size_t>(p);
  const std::size_t k = kv.span(u);
  std::array<double, kMaxDegree + 1> lower{};
  local_basis(u, k, p - 1, U, lower);
  // lower[r] = N_{k-p+1+r, p-1}
  auto lower_at = [&](std::size_t i) -> double {
    if (i + sp < k + 1 || i > k) return 0.0;
    return lower[i + sp - k - 1];
  };
  for (std::size_t i = k - sp; i <= k; ++i) {
    double d = 0.0;
    const double d1 = U[i + sp] - U[i];
    if (d1 != 0.0) d += lower_at(i) / d1;
    const double d2 = U[i + sp + 1] - U[i + 1];
    if (d2 != 0.0) d -= lower_at(i + 1) / d2;
    out[i] = static_cast<double>(p) * d;
  }
}

std::vector<double> basis_row_derivative(double u, const KnotVector& kv) {
  std::vector<double> out(kv.num_basis());
  basis_row_derivative_into(u, kv, out);
  return out;
}

}  // namespace kmlp::spline
