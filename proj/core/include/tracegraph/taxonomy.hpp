#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace tracegraph {

/// Failure categories. The first two are evaluation-side; the other five
/// are faults inside the memory pipeline.
enum class ErrorType {
  kAnnotation,
  kJudge,
  kExtraction,
  kUpdate,
  kDeletion,
  kRetrieval,
  kResponse,
};

inline constexpr std::array<ErrorType, 7> kAllErrorTypes = {
    ErrorType::kAnnotation, ErrorType::kJudge,     ErrorType::kExtraction, ErrorType::kUpdate,
    ErrorType::kDeletion,   ErrorType::kRetrieval, ErrorType::kResponse};

inline constexpr std::array<ErrorType, 5> kSystemErrorTypes = {
    ErrorType::kExtraction, ErrorType::kUpdate, ErrorType::kDeletion, ErrorType::kRetrieval,
    ErrorType::kResponse};

std::string_view to_string(ErrorType type);
std::optional<ErrorType> parse_error_type(std::string_view name);
bool is_system_error(ErrorType type);

/// One-line definition of each type, used in agent instructions.
std::string_view describe(ErrorType type);

}  // namespace tracegraph
