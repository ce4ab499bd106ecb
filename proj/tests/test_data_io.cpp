#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "kmlp/data_io.hpp"
#include "kmlp/error.hpp"

#ifndef KMLP_SOURCE_DIR
#error "KMLP_SOURCE_DIR must point at the repository root"
#endif

using namespace kmlp;
using namespace kmlp::io;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::NumericalError;
}

std::optional<std::size_t> location_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.location();
  }
  return std::nullopt;
}

FeatureTable numbered(std::size_t n) {
  Matrix v(static_cast<Eigen::Index>(n), 1);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    v(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    y[i] = static_cast<int>(i % 2);
  }
  return make_numeric_table(v, y);
}

}  // namespace

TEST_CASE("parse_csv quoting") {
  const auto rows = parse_csv("a,b,c\n\"x, y\",\"he said \"\"hi\"\"\",3\r\n\"multi\nline\",,\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == std::vector<std::string>{"x, y", "he said \"hi\"", "3"});
  CHECK(rows[2] == std::vector<std::string>{"multi\nline", "", ""});
  CHECK(code_of([] { parse_csv("a,b\n\"open,1\n"); }) == ErrorCode::FormatError);
}

TEST_CASE("read_csv basics") {
  const FeatureTable t = read_csv("f1,f2,label\n1.5,,0\n2,3,1\nNA,4,0\n");
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 2);
  CHECK(t.column_names == std::vector<std::string>{"f1", "f2"});
  CHECK(t.missing.count() == 2);
  CHECK(t.is_missing(0, 1));
  CHECK(t.is_missing(2, 0));
  CHECK(t.values(1, 1) == 3.0);
  CHECK(*t.labels == std::vector<int>{0, 1, 0});

  const FeatureTable one = read_csv("a,b,y\n1,,1\n2,5,0\n3,6,1\n");
  CHECK(one.missing.count() == 1);
}

TEST_CASE("label handling") {
  CHECK(location_of([] { read_csv("a,y\n1,0\n2,1\n3,2\n"); }) == std::optional<std::size_t>(3));
  CHECK(code_of([] { read_csv("a,y\n1,0\n2,yes\n"); }) == ErrorCode::LabelError);
  const FeatureTable named = read_csv("y,a\n1,0.5\n0,0.25\n", {.label_column = "y"});
  CHECK(named.column_names == std::vector<std::string>{"a"});
  CHECK(*named.labels == std::vector<int>{1, 0});
  const FeatureTable custom =
      read_csv("a,cls\n1,2\n2,1\n3,2\n", {.positive_label = std::string("2")});
  CHECK(*custom.labels == std::vector<int>{1, 0, 1});
  const FeatureTable unlabeled = read_csv("a,b\n1,2\n", {.label_column = ""});
  CHECK(!unlabeled.labels.has_value());
  CHECK(unlabeled.cols() == 2);
  CHECK(code_of([] { read_csv("a,b\n1,2\n", {.label_column = "zzz"}); }) ==
        ErrorCode::SchemaMismatch);
}

TEST_CASE("ragged rows and categorical inference") {
  CHECK(code_of([] { read_csv("a,b,y\n1,2,0\n1,0\n"); }) == ErrorCode::FormatError);
  CHECK(location_of([] { read_csv("a,b,y\n1,2,0\n1,0\n"); }) == std::optional<std::size_t>(2));
  const FeatureTable t = read_csv("n,colour,y\n1,red,0\n2,blue,1\n?,red,0\n4,,1\n");
  CHECK(t.column_kinds[0] == ColumnKind::Numerical);
  CHECK(t.column_kinds[1] == ColumnKind::Categorical);
  CHECK(t.categories[1] == std::vector<std::string>{"blue", "red"});
  CHECK(t.values(0, 1) == 1.0);
  CHECK(t.values(1, 1) == 0.0);
  CHECK(t.is_missing(3, 1));
}

TEST_CASE("load_csv from disk") {
  const auto path = std::filesystem::temp_directory_path() / "kmlp_test_load.csv";
  std::ofstream(path) << "a,b,label\n1,2,0\n3,4,1\n";
  const FeatureTable t = load_csv(path);
  CHECK(t.rows() == 2);
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_csv(path); }) == ErrorCode::IoError);
}

TEST_CASE("write then read is lossless") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1e3);
  Matrix v(50, 4);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = N(rng) * std::pow(10.0, i % 7 - 3);
  std::vector<int> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = static_cast<int>(i % 3 == 0);
  FeatureTable t = make_numeric_table(v, y);
  t.missing(5, 2) = true;
  const FeatureTable back = read_csv(write_csv(t));
  CHECK(back.column_names == t.column_names);
  CHECK(*back.labels == y);
  CHECK(back.missing(5, 2));
  for (Eigen::Index r = 0; r < 50; ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) {
      if (!t.missing(r, c)) CHECK(back.values(r, c) == t.values(r, c));
    }
  }
  CHECK(write_csv(back) == write_csv(t));
}

TEST_CASE("split sizes and partition") {
  const FeatureTable t = numbered(100);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Splits s = split(t, {.seed = seed});
    CHECK(s.train.rows() == 70);
    CHECK(s.valid.rows() == 10);
    CHECK(s.test.rows() == 20);
    std::set<double> all;
    for (const FeatureTable* f : {&s.train, &s.valid, &s.test}) {
      for (std::size_t r = 0; r < f->rows(); ++r) {
        all.insert(f->values(static_cast<Eigen::Index>(r), 0));
        CHECK((*f->labels)[r] == static_cast<int>(f->values(static_cast<Eigen::Index>(r), 0)) % 2);
      }
    }
    CHECK(all.size() == 100);
  }
  for (std::size_t n : {10u, 13u, 997u}) {
    const auto idx = split_indices(n, {.seed = 4});
    CHECK(std::abs(static_cast<double>(idx.train.size()) - 0.7 * n) <= 1.0);
    CHECK(std::abs(static_cast<double>(idx.valid.size()) - 0.1 * n) <= 1.0);
    CHECK(std::abs(static_cast<double>(idx.test.size()) - 0.2 * n) <= 1.0);
    std::vector<std::size_t> u = idx.train;
    u.insert(u.end(), idx.valid.begin(), idx.valid.end());
    u.insert(u.end(), idx.test.begin(), idx.test.end());
    std::sort(u.begin(), u.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(u[i] == i);
  }
}

TEST_CASE("split seeds and strategies") {
  const auto a = split_indices(100, {.seed = 1});
  const auto b = split_indices(100, {.seed = 1});
  const auto c = split_indices(100, {.seed = 2});
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);

  const auto ordered = split_indices(20, {.strategy = SplitStrategy::Ordered});
  for (std::size_t i = 0; i < 14; ++i) CHECK(ordered.train[i] == i);
  CHECK(ordered.valid == std::vector<std::size_t>{14, 15});

  std::vector<int> labels(200, 0);
  for (std::size_t i = 0; i < 20; ++i) labels[i * 10] = 1;
  const auto strat = split_indices(200, {.seed = 3, .strategy = SplitStrategy::Stratified}, &labels);
  auto positives = [&](const std::vector<std::size_t>& f) {
    return std::count_if(f.begin(), f.end(), [&](std::size_t i) { return labels[i] == 1; });
  };
  CHECK(positives(strat.train) == 14);
  CHECK(positives(strat.valid) == 2);
  CHECK(positives(strat.test) == 4);

  for (auto s : {SplitStrategy::Uniform, SplitStrategy::Stratified, SplitStrategy::Ordered}) {
    CHECK(parse_split_strategy(to_string(s)) == s);
  }
  CHECK(code_of([] { split(numbered(9), {}); }) == ErrorCode::EmptyDataset);
  CHECK(code_of([] { split_indices(100, {.train = 0.5, .valid = 0.1, .test = 0.1}); }) ==
        ErrorCode::InvalidConfig);
}

TEST_CASE("describe") {
  Matrix v(100, 3);
  for (Eigen::Index r = 0; r < 100; ++r) {
    v(r, 0) = static_cast<double>(r + 1);
    v(r, 1) = 4.0;
    v(r, 2) = static_cast<double>(r);
  }
  FeatureTable t = make_numeric_table(v);
  for (Eigen::Index r = 0; r < 100; r += 2) t.missing(r, 2) = true;
  const auto s = describe(t);
  REQUIRE(s.size() == 3);
  CHECK(s[0].quantiles[2] == std::pair<double, double>{0.5, 50.5});
  CHECK(s[0].min == 1.0);
  CHECK(s[0].max == 100.0);
  CHECK(s[0].distinct == 100);
  CHECK(s[1].min == s[1].max);
  CHECK(s[1].distinct == 1);
  CHECK(s[2].missing_rate == 0.5);
  CHECK(s[2].present == 50);
  const std::string tsv = describe_tsv(s);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') >= 4);
}

TEST_CASE("descriptor registry") {
  const auto& builtin = builtin_descriptors();
  CHECK(builtin.size() == 6);
  const auto mt = find_descriptor("mt");
  REQUIRE(mt.has_value());
  CHECK(mt->rows == 13376);
  CHECK(mt->features == 10);
  const auto eg = find_descriptor("EG");
  REQUIRE(eg.has_value());
  CHECK(eg->rows == 14980);
  CHECK(eg->features == 14);
  CHECK(!find_descriptor("nope").has_value());
  CHECK(parse_descriptors(serialize_descriptors(builtin)) == builtin);

  std::ifstream in(std::filesystem::path(KMLP_SOURCE_DIR) / "data" / "benchmarks.json");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(parse_descriptors(ss.str()) == builtin);

  const FeatureTable small = numbered(20);
  const auto warning = check_descriptor(*mt, small);
  REQUIRE(warning.has_value());
  CHECK(warning->rfind("DescriptorMismatch", 0) == 0);
  DatasetDescriptor fits = *mt;
  fits.rows = 20;
  fits.features = 1;
  CHECK(!check_descriptor(fits, small).has_value());
  CHECK(code_of([] { parse_descriptors("{\"format\":\"other\"}"); }) == ErrorCode::FormatError);
}
