#include "pertlab/errors.hpp"

namespace pertlab {

ParseError::ParseError(const std::string& source, int line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

InvariantError::InvariantError(std::string field, const std::string& what)
    : Error(field + ": " + what), field_(std::move(field)) {}

DomainError::DomainError(std::string guard, const std::string& what)
    : Error(guard + ": " + what), guard_(std::move(guard)) {}

}  // namespace pertlab
