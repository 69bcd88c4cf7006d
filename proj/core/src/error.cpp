#include "roundbuy/error.hpp"

namespace roundbuy {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::InvalidPrice: return "InvalidPrice";
    case Errc::InvalidQuantityLimit: return "InvalidQuantityLimit";
    case Errc::InvalidSubtype: return "InvalidSubtype";
    case Errc::NonContiguousIds: return "NonContiguousIds";
    case Errc::EmptyCatalog: return "EmptyCatalog";
    case Errc::UnknownWeapon: return "UnknownWeapon";
    case Errc::InvalidInventory: return "InvalidInventory";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::PlayerCountMismatch: return "PlayerCountMismatch";
    case Errc::TooFewMatches: return "TooFewMatches";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::WrongArity: return "WrongArity";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MismatchedStores: return "MismatchedStores";
    case Errc::NonFinite: return "NonFinite";
    case Errc::CheckpointFormat: return "CheckpointFormat";
    case Errc::InsufficientSupport: return "InsufficientSupport";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace roundbuy
