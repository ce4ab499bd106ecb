#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kmlp/model.hpp"

namespace kmlp::verify {

struct PropertyResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> results;
  bool all_passed() const;
  // One line per property: PASS/FAIL, name, measured value, tolerance.
  std::string to_text() const;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  // When set, one seeded element of the analytic model gradient is perturbed
  // before comparison; the gradient properties must then fail.
  std::optional<std::uint64_t> gradient_fault_seed;
};

VerifyReport run_suite(const VerifyOptions& options = {});

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // tensor index and element of the largest error
};

// Central differences of the mean BCE loss against backward(), over every
// trainable parameter and (when `include_input`) every input element. The
// forward mode of `options` is used for both routes; dropout must be 0.
GradCheck gradient_check(const KmlpModel& model, const Matrix& x, std::span<const int> y,
                         const PassOptions& options, double step = 1e-5, double floor = 1e-6,
                         bool include_input = true,
                         std::optional<std::uint64_t> fault_seed = std::nullopt);

// Seeded model for gradient checks: builds `config` and then randomizes the
// batch-norm running statistics, affine terms and spline scales so no
// parameter sits at a special value.
KmlpModel randomized_model(const KmlpConfig& config, std::uint64_t seed);

}  // namespace kmlp::verify
