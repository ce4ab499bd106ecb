#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "kmlp/error.hpp"
#include "kmlp/spline.hpp"
#include "oracles.hpp"

using namespace kmlp;
using spline::KnotVector;

TEST_CASE("degree-0 indicator") {
  const KnotVector kv({0.0, 1.0}, 0);
  CHECK(spline::basis(0.5, 0, 0, kv) == 1.0);
  CHECK(spline::basis(1.5, 0, 0, kv) == 0.0);
}

TEST_CASE("degree-1 hat on knots 0,1,2") {
  const KnotVector kv({0.0, 1.0, 2.0}, 1);
  CHECK(spline::basis(1.0, 0, 1, kv) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spline::basis(0.5, 0, 1, kv) == doctest::Approx(0.5).epsilon(1e-15));
  const double fd = oracle::central_difference(
      [&](double u) { return spline::basis(u, 0, 1, kv); }, 0.5, 1e-6);
  CHECK(fd == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("cubic on knots 0..4 at the centre") {
  const KnotVector kv({0.0, 1.0, 2.0, 3.0, 4.0}, 3);
  CHECK(spline::basis(2.0, 0, 3, kv) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(oracle::cardinal_cubic(2.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("index out of range") {
  const auto kv = KnotVector::uniform(5, 3);
  CHECK_THROWS_AS(spline::basis(0.5, kv.num_basis(), 3, kv), Error);
  try {
    spline::basis(0.5, 100, 3, kv);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidIndex);
  }
}

TEST_CASE("uniform knot vector layout") {
  for (int G : {1, 5, 10}) {
    for (int p : {0, 1, 2, 3}) {
      const auto kv = KnotVector::uniform(G, p);
      CHECK(kv.knots().size() == static_cast<std::size_t>(G + 2 * p + 1));
      CHECK(kv.num_basis() == static_cast<std::size_t>(G + p));
      CHECK(kv.grid_size() == G);
      CHECK(kv.domain_lo() == 0.0);
      CHECK(kv.domain_hi() == 1.0);
    }
  }
}

TEST_CASE("knot vector validation") {
  CHECK_THROWS_AS(KnotVector({1.0, 0.0, 2.0}, 1), Error);
  CHECK_THROWS_AS(KnotVector({0.0, 1.0}, 1), Error);
  CHECK_THROWS_AS(KnotVector({0.0, 1.0, std::nan("")}, 1), Error);
  CHECK_THROWS_AS(KnotVector::uniform(5, -1), Error);
}

TEST_CASE("basis_row matches the explicit cubic pieces and the recursion") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int G : {5, 10}) {
    const auto kv = KnotVector::uniform(G, 3);
    for (int k = 0; k < 100; ++k) {
      const double u = U(rng);
      const auto row = spline::basis_row(u, kv);
      REQUIRE(row.size() == static_cast<std::size_t>(G + 3));
      for (int i = 0; i < G + 3; ++i) {
        CHECK(std::abs(row[i] - oracle::uniform_cubic_basis(u, i, G)) <= 1e-14);
        CHECK(std::abs(row[i] - oracle::cox_de_boor(kv.knots(), i, 3, u)) <= 1e-14);
        CHECK(std::abs(row[i] - spline::basis(u, static_cast<std::size_t>(i), 3, kv)) <= 1e-14);
      }
    }
  }
}

TEST_CASE("partition of unity, non-negativity, local support") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int G : {5, 10}) {
    for (int p : {1, 2, 3}) {
      const auto kv = KnotVector::uniform(G, p);
      for (int k = 0; k < 1000; ++k) {
        const double u = U(rng);
        const auto row = spline::basis_row(u, kv);
        CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
        int nonzero = 0;
        for (std::size_t i = 0; i < row.size(); ++i) {
          CHECK(row[i] >= 0.0);
          if (row[i] != 0.0) {
            ++nonzero;
            CHECK(u >= kv.knots()[i]);
            CHECK(u <= kv.knots()[i + static_cast<std::size_t>(p) + 1]);
          }
        }
        CHECK(nonzero <= p + 1);
      }
    }
  }
}

TEST_CASE("domain endpoints and clamping") {
  const auto kv = KnotVector::uniform(5, 3);
  const auto lo = spline::basis_row(0.0, kv);
  const auto hi = spline::basis_row(1.0, kv);
  CHECK(std::accumulate(lo.begin(), lo.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::accumulate(hi.begin(), hi.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spline::basis_row(-3.0, kv) == lo);
  CHECK(spline::basis_row(7.5, kv) == hi);
  for (std::size_t i = 0; i < hi.size(); ++i) {
    CHECK(std::abs(hi[i] - oracle::uniform_cubic_basis(1.0, static_cast<int>(i), 5)) <= 1e-14);
  }
}

TEST_CASE("derivative row against finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.01, 0.99);
  for (int G : {5, 10}) {
    const auto kv = KnotVector::uniform(G, 3);
    for (int k = 0; k < 10; ++k) {
      const double u = U(rng);
      const auto d = spline::basis_row_derivative(u, kv);
      CHECK(std::abs(std::accumulate(d.begin(), d.end(), 0.0)) <= 1e-10);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double fd = oracle::central_difference(
            [&](double v) { return oracle::uniform_cubic_basis(v, static_cast<int>(i), G); }, u,
            1e-6);
        CHECK(oracle::rel_err(d[i], fd, 1e-6) <= 1e-5);
      }
    }
  }
}

TEST_CASE("derivative special cases") {
  const auto kv0 = KnotVector::uniform(5, 0);
  for (double v : spline::basis_row_derivative(0.37, kv0)) CHECK(v == 0.0);
  const auto kv = KnotVector::uniform(5, 3);
  for (double v : spline::basis_row_derivative(-0.5, kv)) CHECK(v == 0.0);
  for (double v : spline::basis_row_derivative(1.5, kv)) CHECK(v == 0.0);
}

TEST_CASE("hat derivative at the rising edge") {
  // Knots -1,0,1,2 put the hat of knots 0,1,2 at index 1 with its rising
  // edge inside the domain [0, 1].
  const KnotVector kv({-1.0, 0.0, 1.0, 2.0}, 1);
  const auto d = spline::basis_row_derivative(0.5, kv);
  REQUIRE(d.size() == 2);
  CHECK(d[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d[0] == doctest::Approx(-1.0).epsilon(1e-15));
}
