#include "mogp/error.hpp"

namespace mogp {

IngestionError::IngestionError(const std::string& what, std::optional<std::size_t> row)
    : Error(row ? what + " (row " + std::to_string(*row) + ")" : what), row_(row) {}

}  // namespace mogp
