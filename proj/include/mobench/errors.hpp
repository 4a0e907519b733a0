#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mobench {

enum class ErrorKind {
  kMalformedXml,
  kMissingBounds,
  kNoActionFound,
  kBadArgument,
  kIndexOutOfRange,
  kDeviceNotFound,
  kMultipleDevices,
  kAdbUnavailable,
  kXmlAcquisitionFailed,
  kExecutionFailed,
  kNoFocusedField,
  kUnknownApp,
  kDimensionMismatch,
  kEndpointError,
  kEmptyResults,
  kNoOperationTasks,
  kNoOperations,
  kStateError,
  kNoHitElement,
  kCorruptTrace,
  kPrecondition,
  kConfig,
  kConflict,
  kIo,
};

std::string_view error_kind_name(ErrorKind kind);

// Every failure the library reports is an Error carrying its kind; callers
// branch on kind() rather than on the concrete type.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mobench
