#include "dmmv/errors.hpp"

#include <utility>

namespace dmmv {

Error::Error(std::string kind, const std::string& what)
    : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

} // namespace dmmv
