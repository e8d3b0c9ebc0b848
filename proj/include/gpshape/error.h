#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gpshape {

enum class ErrorCode {
  // geometry
  DegeneratePoint,
  BehindCamera,
  InvalidTransform,
  InvalidIntrinsics,
  // dataprep / io
  EmptyCloud,
  DegenerateExtent,
  NoHits,
  InsufficientPoints,
  Io,
  Parse,
  // clustering
  InvalidK,
  DuplicateCenters,
  // gp
  NotPositiveDefinite,
  NonFiniteLoss,
  InvalidArgument,
  // template
  ClusterTooSmall,
  SchemaVersionMismatch,
  CorruptTemplate,
  // confidence
  NoUsablePoints,
  InvalidDelta,
  // metrics
  LengthMismatch,
  DegenerateVariance,
  // synthbench
  DegenerateConfiguration,
  InvalidConfig,
  Interrupted,
  Internal,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gpshape
