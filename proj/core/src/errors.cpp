#include "bwvi/errors.hpp"

namespace bwvi {

DimensionMismatch::DimensionMismatch(const std::string& where, long expected,
                                     long actual)
    : Error(where + ": dimension mismatch (expected " +
            std::to_string(expected) + ", got " + std::to_string(actual) +
            ")") {}

}  // namespace bwvi
