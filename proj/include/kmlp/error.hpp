#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kmlp {

enum class ErrorCode {
  InvalidConfig,
  ConstantColumn,
  NonPositiveInput,
  SchemaMismatch,
  InvalidIndex,
  ShapeError,
  DegenerateBatch,
  DegenerateLabels,
  FormatError,
  LabelError,
  EmptyDataset,
  IoError,
  NumericalError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library. `location` carries a byte offset
// (FormatError on binary documents) or a 1-based row number (CSV errors).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> location = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> location() const noexcept { return location_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> location_;
};

// True for errors caused by the caller's data or configuration, as opposed to
// violated internal invariants.
bool is_user_error(ErrorCode code) noexcept;

}  // namespace kmlp
