#include "kmlp/error.hpp"

namespace kmlp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InvalidIndex: return "InvalidIndex";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::LabelError: return "LabelError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NumericalError: return "NumericalError";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& message,
                    std::optional<std::size_t> location) {
  std::string out(to_string(code));
  out += ": ";
  out += message;
  if (location) {
    out += " (at " + std::to_string(*location) + ")";
  }
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> location)
    : std::runtime_error(compose(code, message, location)),
      code_(code),
      location_(location) {}

bool is_user_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidIndex:
    case ErrorCode::ShapeError:
    case ErrorCode::NumericalError:
      return false;
    default:
      return true;
  }
}

}  // namespace kmlp
