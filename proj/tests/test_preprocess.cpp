#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "kmlp/error.hpp"
#include "kmlp/preprocess.hpp"
#include "oracles.hpp"

using namespace kmlp;
using namespace kmlp::preprocess;

namespace {

QuantileBins five_point_bins() { return fit_quantile_bins(std::vector<double>{0, 10, 20, 30, 40}, 4); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::NumericalError;
}

std::vector<double> random_sample(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("fit_quantile_bins on evenly spaced order statistics") {
  const auto b = five_point_bins();
  CHECK(b.boundaries == std::vector<double>{0, 10, 20, 30, 40});
  CHECK(b.effective_bins() == 4);
  CHECK(b.requested_bins == 4);
}

TEST_CASE("fit_quantile_bins merges tied quantiles") {
  const auto b = fit_quantile_bins(std::vector<double>{1, 1, 1, 1, 2}, 4);
  CHECK(b.boundaries == std::vector<double>{1, 2});
  CHECK(b.effective_bins() == 1);
}

TEST_CASE("fit_quantile_bins errors") {
  CHECK(code_of([] { fit_quantile_bins(std::vector<double>(10, 7.0), 4); }) == ErrorCode::ConstantColumn);
  CHECK(code_of([] { fit_quantile_bins(std::vector<double>{1, 2, 3}, 0); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { fit_quantile_bins(std::vector<double>{std::nan(""), 3.0}, 4); }) ==
        ErrorCode::ConstantColumn);
}

TEST_CASE("bin boundaries match the rank-interpolation oracle") {
  const auto v = random_sample(997, 1);
  const auto b = fit_quantile_bins(v, 100);
  REQUIRE(b.effective_bins() == 100);
  for (std::size_t i = 0; i <= 100; ++i) {
    const double expect = oracle::quantile(v, static_cast<double>(i) / 100.0);
    CHECK(std::abs(b.boundaries[i] - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
  }
  CHECK(b.lower() == *std::min_element(v.begin(), v.end()));
  CHECK(b.upper() == *std::max_element(v.begin(), v.end()));
  for (std::size_t i = 0; i < 100; ++i) CHECK(b.boundaries[i] < b.boundaries[i + 1]);
}

TEST_CASE("subsampled fit is seeded") {
  const auto v = random_sample(5000, 2);
  const auto a = fit_quantile_bins(v, 20, 1000, 9);
  const auto b = fit_quantile_bins(v, 20, 1000, 9);
  const auto c = fit_quantile_bins(v, 20, 1000, 10);
  CHECK(a.boundaries == b.boundaries);
  CHECK(a.boundaries != c.boundaries);
}

TEST_CASE("qtl_transform examples") {
  const auto b = five_point_bins();
  CHECK(qtl_transform(15, b) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(qtl_transform(0, b) == 0.0);
  CHECK(qtl_transform(40, b) == 1.0);
  CHECK(qtl_transform(10, b) == 0.25);
  CHECK(qtl_transform(-5, b) == 0.0);
  CHECK(qtl_transform(400, b) == 1.0);
}

TEST_CASE("quantile_transform examples") {
  const auto b = five_point_bins();
  CHECK(quantile_transform(15, b) == 0.25);
  CHECK(quantile_transform(39.9, b) == 0.75);
  CHECK(quantile_transform(0, b) == 0.0);
  CHECK(quantile_transform(-1, b) == 0.0);
  CHECK(quantile_transform(10, b) == 0.0);  // right-closed (b_0, b_1]
  CHECK(quantile_transform(100, b) == 0.75);
}

TEST_CASE("ple_encode examples") {
  const auto b = five_point_bins();
  CHECK(ple_encode(15, b) == std::vector<double>{1, 0.5, 0, 0});
  CHECK(ple_encode(40, b) == std::vector<double>{1, 1, 1, 1});
  CHECK(ple_encode(99, b) == std::vector<double>{1, 1, 1, 1});
  CHECK(ple_encode(0, b) == std::vector<double>{0, 0, 0, 0});
  CHECK(ple_encode(-3, b) == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("transforms agree with the scan oracles") {
  const auto v = random_sample(500, 3);
  const auto b = fit_quantile_bins(v, 37);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(b.lower() - 1.0, b.upper() + 1.0);
  for (int k = 0; k < 2000; ++k) {
    const double x = k < 38 ? b.boundaries[static_cast<std::size_t>(k)] : U(rng);
    CHECK(std::abs(qtl_transform(x, b) - oracle::qtl(x, b.boundaries)) <= 1e-15);
    const auto e = ple_encode(x, b);
    const auto o = oracle::ple(x, b.boundaries);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(std::abs(e[i] - o[i]) <= 1e-15);
  }
}

TEST_CASE("monotonicity of QTL, Quantile and PLE") {
  const auto v = random_sample(300, 5);
  const auto b = fit_quantile_bins(v, 50);
  std::vector<double> xs(3000);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(b.lower() - 0.5, b.upper() + 0.5);
  for (double& x : xs) x = U(rng);
  std::sort(xs.begin(), xs.end());
  for (std::size_t k = 1; k < xs.size(); ++k) {
    CHECK(qtl_transform(xs[k - 1], b) <= qtl_transform(xs[k], b));
    CHECK(quantile_transform(xs[k - 1], b) <= quantile_transform(xs[k], b));
    const auto e0 = ple_encode(xs[k - 1], b);
    const auto e1 = ple_encode(xs[k], b);
    for (std::size_t i = 0; i < e0.size(); ++i) CHECK(e0[i] <= e1[i]);
  }
}

TEST_CASE("exact knots: qtl(b_i) == i/n") {
  for (unsigned seed : {7u, 8u, 9u}) {
    const auto v = random_sample(1000, seed);
    const auto b = fit_quantile_bins(v, 100);
    const double n = static_cast<double>(b.effective_bins());
    for (std::size_t i = 0; i < b.boundaries.size(); ++i) {
      CHECK(qtl_transform(b.boundaries[i], b) == static_cast<double>(i) / n);
    }
  }
}

TEST_CASE("uniformity of QTL on its fitting sample") {
  const auto v = random_sample(10000, 10);
  const auto b = fit_quantile_bins(v, 100);
  std::vector<double> u;
  for (double x : v) u.push_back(qtl_transform(x, b));
  std::sort(u.begin(), u.end());
  const double N = static_cast<double>(u.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    sup = std::max({sup, (i + 1) / N - u[i], u[i] - i / N});
  }
  CHECK(sup <= 1.0 / b.effective_bins() + 3.0 / std::sqrt(N));
}

TEST_CASE("PLE sum equals effective_n * QTL on a dense grid") {
  const auto b = fit_quantile_bins(std::vector<double>{1, 1, 1, 2, 2, 3, 5, 8, 13, 21, 34}, 8);
  const double n = static_cast<double>(b.effective_bins());
  for (int k = 0; k <= 10000; ++k) {
    const double x = b.lower() + (b.upper() - b.lower()) * k / 10000.0;
    const auto e = ple_encode(x, b);
    CHECK(std::abs(std::accumulate(e.begin(), e.end(), 0.0) - n * qtl_transform(x, b)) <= 1e-10);
  }
}

TEST_CASE("clr_transform") {
  for (double c : {0.1, 1.0, 42.0}) {
    for (double z : clr_transform(std::vector<double>(5, c))) CHECK(std::abs(z) <= 1e-15);
  }
  const auto r = clr_transform(std::vector<double>{1, 4});
  CHECK(r[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(r[1] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(code_of([] { clr_transform(std::vector<double>{0, 1}); }) == ErrorCode::NonPositiveInput);
  CHECK(code_of([] { clr_transform(std::vector<double>{-1, 1}, 0.5); }) == ErrorCode::NonPositiveInput);
  const auto shifted = clr_transform(std::vector<double>{0, 3}, 1.0);
  CHECK(shifted[1] - shifted[0] == doctest::Approx(std::log(4.0)));

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(0.01, 100.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> row(7);
    for (double& x : row) x = U(rng);
    const auto z = clr_transform(row);
    CHECK(std::abs(std::accumulate(z.begin(), z.end(), 0.0)) <= 1e-10);
  }
}

TEST_CASE("operator names") {
  for (Operator op : {Operator::QTL, Operator::Quantile, Operator::PLE, Operator::CLR, Operator::ZScore}) {
    CHECK(parse_operator(to_string(op)) == op);
  }
  CHECK(code_of([] { parse_operator("nope"); }) == ErrorCode::InvalidConfig);
}

namespace {

FeatureTable mixed_table() {
  FeatureTable t;
  t.column_names = {"a", "b", "colour"};
  t.column_kinds = {ColumnKind::Numerical, ColumnKind::Numerical, ColumnKind::Categorical};
  t.categories = {{}, {}, {"blue", "green", "red"}};
  const int n = 40;
  t.values.resize(n, 3);
  t.missing = MissingMask::Constant(n, 3, false);
  for (int r = 0; r < n; ++r) {
    t.values(r, 0) = r * 1.5 + 2.0;
    t.values(r, 1) = std::sqrt(r + 1.0);
    t.values(r, 2) = r % 3;
  }
  return t;
}

}  // namespace

TEST_CASE("fit_transform structure") {
  const FeatureTable two = make_numeric_table(mixed_table().values.leftCols(2));
  const auto t = fit_transform(two, {.op = Operator::QTL, .bins = 4});
  REQUIRE(t.columns.size() == 2);
  CHECK(t.columns[0].encoding == Encoding::Bins);
  CHECK(t.columns[1].encoding == Encoding::Bins);
  CHECK(t.output_dim() == 2);

  const auto m = fit_transform(mixed_table(), {.op = Operator::QTL, .bins = 4});
  CHECK(m.columns[2].encoding == Encoding::OneHot);
  CHECK(m.columns[2].vocabulary == std::vector<std::string>{"blue", "green", "red"});
  CHECK(m.output_dim() == 2 + 3);

  const auto p = fit_transform(mixed_table(), {.op = Operator::PLE, .bins = 4});
  CHECK(p.output_dim() == 4 + 4 + 3);
}

TEST_CASE("apply_transform: QTL fit table is near uniform and deterministic") {
  const FeatureTable t = mixed_table();
  const auto f = fit_transform(t, {.op = Operator::QTL, .bins = 10});
  const Matrix a = apply_transform(t, f);
  const Matrix b = apply_transform(t, f);
  CHECK(a == b);
  for (int c = 0; c < 2; ++c) {
    std::vector<double> u(a.rows());
    for (Eigen::Index r = 0; r < a.rows(); ++r) u[r] = a(r, c);
    std::sort(u.begin(), u.end());
    const double N = static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      CHECK(std::abs(u[i] - (i + 0.5) / N) <= 1.0 / 10 + 1.0 / N);
    }
  }
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    CHECK(a.row(r).tail(3).sum() == 1.0);
    CHECK(a(r, 2 + r % 3) == 1.0);
  }
}

TEST_CASE("apply_transform imputes the training median and clamps") {
  FeatureTable t = mixed_table();
  const auto f = fit_transform(t, {.op = Operator::QTL, .bins = 10});
  std::vector<double> col(t.rows());
  for (std::size_t r = 0; r < col.size(); ++r) col[r] = t.values(r, 0);
  const double median = oracle::quantile(col, 0.5);
  CHECK(f.columns[0].median == median);

  FeatureTable probe = take_rows(t, std::vector<std::size_t>{0, 1});
  probe.missing(0, 0) = true;
  probe.values(0, 0) = std::nan("");
  probe.values(1, 0) = 10.0 * t.values.col(0).maxCoeff();
  const Matrix out = apply_transform(probe, f);
  CHECK(out(0, 0) == qtl_transform(median, f.columns[0].bins));
  CHECK(out(1, 0) == 1.0);
  CHECK(out.allFinite());
}

TEST_CASE("apply_transform schema checks") {
  const FeatureTable t = mixed_table();
  const auto f = fit_transform(t, {});
  FeatureTable renamed = t;
  renamed.column_names[1] = "zzz";
  CHECK(code_of([&] { apply_transform(renamed, f); }) == ErrorCode::SchemaMismatch);
  const FeatureTable narrow = make_numeric_table(t.values.leftCols(2));
  CHECK(code_of([&] { apply_transform(narrow, f); }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("constant column passes through as 0.5") {
  Matrix v(6, 2);
  v << 1, 5, 2, 5, 3, 5, 4, 5, 5, 5, 6, 5;
  const FeatureTable t = make_numeric_table(v);
  const auto f = fit_transform(t, {.op = Operator::QTL, .bins = 3});
  CHECK(f.constant_columns() == std::vector<std::string>{"x1"});
  const Matrix out = apply_transform(t, f);
  for (Eigen::Index r = 0; r < 6; ++r) CHECK(out(r, 1) == 0.5);
}

TEST_CASE("unseen and missing categories encode as all zeros") {
  FeatureTable t = mixed_table();
  const auto f = fit_transform(t, {});
  FeatureTable probe = take_rows(t, std::vector<std::size_t>{0, 1});
  probe.categories[2] = {"purple", "red"};
  probe.values(0, 2) = 0;  // purple
  probe.missing(1, 2) = true;
  const Matrix out = apply_transform(probe, f);
  CHECK(out.row(0).tail(3).sum() == 0.0);
  CHECK(out.row(1).tail(3).sum() == 0.0);
}

TEST_CASE("CLR and z-score operators") {
  Matrix v(4, 2);
  v << 1, 4, 2, 2, 3, 9, 8, 1;
  const FeatureTable t = make_numeric_table(v);
  const auto clr = fit_transform(t, {.op = Operator::CLR});
  const Matrix c = apply_transform(t, clr);
  CHECK(c(0, 0) == doctest::Approx(-std::log(2.0)));
  CHECK(c(1, 0) == doctest::Approx(0.0));
  const auto z = fit_transform(t, {.op = Operator::ZScore});
  const Matrix s = apply_transform(t, z);
  CHECK(s.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((s.col(0).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix bad(3, 2);
  bad << 1, 1, 0, 2, 3, 3;
  try {
    apply_transform(make_numeric_table(bad), clr);
    FAIL("expected NonPositiveInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveInput);
    CHECK(e.location() == std::optional<std::size_t>(2));
    CHECK(std::string(e.what()).find("'x0'") != std::string::npos);
  }
}

TEST_CASE("transform document round trip") {
  const FeatureTable t = mixed_table();
  for (Operator op : {Operator::QTL, Operator::Quantile, Operator::PLE, Operator::ZScore}) {
    const auto f = fit_transform(t, {.op = op, .bins = 7});
    const std::string doc = serialize_transform(f);
    const auto g = parse_transform(doc);
    CHECK(serialize_transform(g) == doc);
    CHECK(g.id() == f.id());
    CHECK(apply_transform(t, g) == apply_transform(t, f));
  }
  CHECK(code_of([] { parse_transform("{\"format\": 3"); }) == ErrorCode::FormatError);
  CHECK(code_of([] { parse_transform("{\"format\": \"other\"}"); }) == ErrorCode::FormatError);
  const auto a = fit_transform(t, {.bins = 7});
  const auto b = fit_transform(t, {.bins = 8});
  CHECK(a.id() != b.id());
}
