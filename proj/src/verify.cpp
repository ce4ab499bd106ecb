#include "kmlp/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "kmlp/digest.hpp"
#include "kmlp/error.hpp"
#include "kmlp/metrics.hpp"
#include "kmlp/preprocess.hpp"
#include "kmlp/spline.hpp"
#include "kmlp/training.hpp"

namespace kmlp::verify {

namespace {

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : seed_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * unit_interval(mix64(seed_, counter_++));
  }
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

double loss_of(const KmlpModel& model, const Matrix& x, std::span<const int> y,
               const PassOptions& options) {
  const ForwardTape tape = forward_tape(model, x, options);
  return train::bce_loss(std::span<const double>(tape.probabilities.data(),
                                                 static_cast<std::size_t>(tape.probabilities.size())),
                         y);
}

void randomize_norm(nn::BatchNormState& s, Stream& rng) {
  for (Eigen::Index i = 0; i < s.features(); ++i) {
    s.gamma(i) = rng.uniform(0.5, 1.5);
    s.beta(i) = rng.uniform(-0.5, 0.5);
    s.running_mean(i) = rng.uniform(-0.5, 0.5);
    s.running_var(i) = rng.uniform(0.5, 2.0);
  }
}

PropertyResult make(std::string name, double measured, double tolerance, std::string detail = {}) {
  return {std::move(name), measured, tolerance, measured <= tolerance, std::move(detail)};
}

template <class Fn>
PropertyResult timed(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  PropertyResult r = fn();
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.1f ms", ms);
  r.detail = r.detail.empty() ? buf : r.detail + "; " + buf;
  return r;
}

PropertyResult gradient_property(const std::string& name, const KmlpConfig& config, Mode mode,
                                 const VerifyOptions& options) {
  const KmlpModel model = randomized_model(config, options.seed);
  Stream rng(mix64(options.seed, 0x58));
  const Eigen::Index rows = 16;
  Matrix x(rows, config.input_dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.uniform(0.02, 0.98);
  }
  std::vector<int> y(static_cast<std::size_t>(rows));
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
  const GradCheck g = gradient_check(model, x, y, {.mode = mode}, 1e-5, 1e-6, true,
                                     options.gradient_fault_seed);
  return make(name, g.max_rel_error, 1e-4,
              std::to_string(g.checked) + " entries, worst " + g.worst);
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

KmlpModel randomized_model(const KmlpConfig& config, std::uint64_t seed) {
  KmlpModel m = build(config);
  Stream rng(mix64(seed, 0x52414e44));
  if (m.input_norm) randomize_norm(*m.input_norm, rng);
  for (auto& k : m.kan) {
    for (Eigen::Index i = 0; i < k.spline_weights.size(); ++i) {
      k.spline_weights.data()[i] = rng.uniform(0.5, 1.5);
    }
  }
  for (auto& b : m.gmlp) randomize_norm(b.norm, rng);
  return m;
}

GradCheck gradient_check(const KmlpModel& model_in, const Matrix& x_in, std::span<const int> y,
                         const PassOptions& options, double step, double floor,
                         bool include_input, std::optional<std::uint64_t> fault_seed) {
  if (model_in.config.dropout != 0.0) {
    throw Error(ErrorCode::InvalidConfig, "gradient check needs dropout 0");
  }
  KmlpModel model = model_in;
  Matrix x = x_in;
  const ForwardTape tape = forward_tape(model, x, options);
  ModelGradients grads = backward(model, tape, y, include_input);
  auto gviews = gradient_views(grads);
  if (fault_seed) {
    Stream rng(*fault_seed);
    auto& tensor = gviews[rng.below(gviews.size())];
    double& g = tensor[rng.below(tensor.size())];
    g = g * 1.05 + 1e-4;
  }

  GradCheck out;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    const double e = relative_error(analytic, numeric, floor);
    ++out.checked;
    if (out.worst.empty() || e > out.max_rel_error) {
      out.max_rel_error = e;
      out.worst = where;
    }
  };

  auto params = parameter_views(model);
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      double& p = params[t][i];
      const double saved = p;
      p = saved + step;
      const double up = loss_of(model, x, y, options);
      p = saved - step;
      const double down = loss_of(model, x, y, options);
      p = saved;
      record(gviews[t][i], (up - down) / (2.0 * step),
             "param " + std::to_string(t) + "[" + std::to_string(i) + "]");
    }
  }
  if (include_input) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double saved = x(r, c);
        x(r, c) = saved + step;
        const double up = loss_of(model, x, y, options);
        x(r, c) = saved - step;
        const double down = loss_of(model, x, y, options);
        x(r, c) = saved;
        record(grads.input(r, c), (up - down) / (2.0 * step),
               "input(" + std::to_string(r) + "," + std::to_string(c) + ")");
      }
    }
  }
  return out;
}

bool VerifyReport::all_passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream out;
  for (const auto& r : results) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "measured %.3e  tolerance %.1e", r.measured, r.tolerance);
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  " << buf;
    if (!r.detail.empty()) out << "  (" << r.detail << ")";
    out << '\n';
  }
  return out.str();
}

VerifyReport run_suite(const VerifyOptions& options) {
  VerifyReport report;
  auto& out = report.results;

  KmlpConfig small;
  small.kan_layers = 1;
  small.mlp_layers = 1;
  small.hidden_dim = 8;
  small.input_dim = 4;
  small.seed = options.seed;
  out.push_back(timed([&] {
    return gradient_property("model gradient, frozen batch norm", small, Mode::Infer, options);
  }));
  KmlpConfig deep = small;
  deep.kan_layers = 2;
  deep.mlp_layers = 2;
  deep.input_batchnorm = true;
  out.push_back(timed([&] {
    return gradient_property("model gradient, batch statistics, 2+2 layers", deep, Mode::Train,
                             options);
  }));

  out.push_back(timed([&] {
    Stream rng(mix64(options.seed, 0x50));
    double worst = 0.0;
    for (int grid : {5, 10}) {
      const auto kv = spline::KnotVector::uniform(grid, 3);
      for (int k = 0; k < 1000; ++k) {
        const auto row = spline::basis_row(rng.uniform(), kv);
        worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
      }
    }
    return make("B-spline partition of unity (G in {5,10}, p=3)", worst, 1e-12);
  }));

  // Distinct fitting sample shared by the QTL properties.
  std::vector<double> sample(10000);
  {
    Stream rng(mix64(options.seed, 0x51));
    double acc = 0.0;
    for (double& v : sample) {
      acc += 0.01 + rng.uniform();
      v = std::exp(0.001 * acc) - 1.0;  // skewed, strictly increasing
    }
  }
  const auto bins = preprocess::fit_quantile_bins(sample, 100);

  out.push_back(timed([&] {
    double worst = 0.0;
    const std::size_t n = bins.effective_bins();
    for (std::size_t i = 0; i <= n; ++i) {
      const double expect = static_cast<double>(i) / static_cast<double>(n);
      worst = std::max(worst, std::abs(preprocess::qtl_transform(bins.boundaries[i], bins) - expect));
    }
    return make("QTL maps boundary b_i to i/n", worst, 0.0);
  }));

  out.push_back(timed([&] {
    std::vector<double> u;
    u.reserve(sample.size());
    for (double v : sample) u.push_back(preprocess::qtl_transform(v, bins));
    std::sort(u.begin(), u.end());
    const double N = static_cast<double>(u.size());
    double dist = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      dist = std::max({dist, static_cast<double>(i + 1) / N - u[i], u[i] - static_cast<double>(i) / N});
    }
    return make("QTL output uniformity on fitting sample (sup |F - U|)", dist, 0.04);
  }));

  out.push_back(timed([&] {
    double worst = 0.0;
    const double lo = bins.lower();
    const double hi = bins.upper();
    const double n = static_cast<double>(bins.effective_bins());
    for (int k = 0; k < 10000; ++k) {
      const double xv = lo + (hi - lo) * static_cast<double>(k) / 9999.0;
      const auto e = preprocess::ple_encode(xv, bins);
      const double sum = std::accumulate(e.begin(), e.end(), 0.0);
      worst = std::max(worst, std::abs(sum - n * preprocess::qtl_transform(xv, bins)));
    }
    return make("PLE sum equals n * QTL", worst, 1e-10);
  }));

  out.push_back(timed([&] {
    Stream rng(mix64(options.seed, 0x4d));
    double worst = 0.0;
    for (int set = 0; set < 100; ++set) {
      const std::size_t len = 2 + rng.below(49);
      std::vector<double> s(len);
      std::vector<int> l(len);
      for (std::size_t i = 0; i < len; ++i) {
        s[i] = std::floor(rng.uniform() * 10.0) / 10.0;  // coarse grid forces ties
        l[i] = rng.uniform() < 0.5 ? 1 : 0;
      }
      l[0] = 1;
      l[1] = 0;
      double pairs = 0.0;
      double credit = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t j = 0; j < len; ++j) {
          if (l[i] != 1 || l[j] != 0) continue;
          pairs += 1.0;
          credit += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
      }
      worst = std::max(worst, std::abs(metrics::auc(metrics::ScoredSet(s, l)) - credit / pairs));
    }
    return make("AUC trapezoid equals pair counting (100 sets)", worst, 1e-12);
  }));

  out.push_back(timed([&] {
    const std::vector<int> l1{1, 1, 0, 0};
    const std::vector<double> s1{0.9, 0.8, 0.3, 0.2};
    const std::vector<int> l2{1, 0, 1, 0};
    const std::vector<double> s2{0.9, 0.8, 0.7, 0.6};
    const metrics::ScoredSet a(s1, l1);
    const metrics::ScoredSet b(s2, l2);
    const double dev = std::max({std::abs(metrics::auc(a) - 1.0), std::abs(metrics::ks(a) - 1.0),
                                 std::abs(metrics::auc(b) - 0.75), std::abs(metrics::ks(b) - 0.5)});
    return make("AUC/KS on hand-computed examples", dev, 0.0);
  }));

  out.push_back(timed([&] {
    // Adam against its update equations, five steps on one scalar.
    double p = 1.0;
    train::AdamState state;
    double q = 1.0;
    double m = 0.0;
    double v = 0.0;
    double worst = 0.0;
    for (int t = 1; t <= 5; ++t) {
      const double g = 2.0 * p - 0.5 * t;
      double grad = g;
      std::vector<std::span<double>> ps{std::span<double>(&p, 1)};
      std::vector<std::span<const double>> gs{std::span<const double>(&grad, 1)};
      train::adam_step(ps, gs, state, 1e-3);
      const double gq = 2.0 * q - 0.5 * t;
      m = 0.9 * m + 0.1 * gq;
      v = 0.999 * v + 0.001 * gq * gq;
      q -= 1e-3 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
      worst = std::max(worst, std::abs(p - q));
    }
    return make("Adam matches update equations (5 steps)", worst, 1e-12);
  }));
  return report;
}

}  // namespace kmlp::verify
