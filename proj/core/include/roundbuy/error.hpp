#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace roundbuy {

enum class Errc {
  DuplicateId,
  InvalidPrice,
  InvalidQuantityLimit,
  InvalidSubtype,
  NonContiguousIds,
  EmptyCatalog,
  UnknownWeapon,
  InvalidInventory,
  SchemaViolation,
  PlayerCountMismatch,
  TooFewMatches,
  EmptyInput,
  WrongArity,
  ShapeMismatch,
  MismatchedStores,
  NonFinite,
  CheckpointFormat,
  InsufficientSupport,
  InvalidConfig,
  Io,
};

std::string_view to_string(Errc code) noexcept;

// Every recoverable failure in the library is reported as an Error carrying a
// machine-checkable code; the message names the offending record or field.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace roundbuy
