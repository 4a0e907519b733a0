#include "mobench/errors.hpp"

namespace mobench {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMalformedXml: return "MalformedXml";
    case ErrorKind::kMissingBounds: return "MissingBounds";
    case ErrorKind::kNoActionFound: return "NoActionFound";
    case ErrorKind::kBadArgument: return "BadArgument";
    case ErrorKind::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::kDeviceNotFound: return "DeviceNotFound";
    case ErrorKind::kMultipleDevices: return "MultipleDevices";
    case ErrorKind::kAdbUnavailable: return "AdbUnavailable";
    case ErrorKind::kXmlAcquisitionFailed: return "XmlAcquisitionFailed";
    case ErrorKind::kExecutionFailed: return "ExecutionFailed";
    case ErrorKind::kNoFocusedField: return "NoFocusedField";
    case ErrorKind::kUnknownApp: return "UnknownApp";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kEndpointError: return "EndpointError";
    case ErrorKind::kEmptyResults: return "EmptyResults";
    case ErrorKind::kNoOperationTasks: return "NoOperationTasks";
    case ErrorKind::kNoOperations: return "NoOperations";
    case ErrorKind::kStateError: return "StateError";
    case ErrorKind::kNoHitElement: return "NoHitElement";
    case ErrorKind::kCorruptTrace: return "CorruptTrace";
    case ErrorKind::kPrecondition: return "Precondition";
    case ErrorKind::kConfig: return "Config";
    case ErrorKind::kConflict: return "Conflict";
    case ErrorKind::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace mobench
