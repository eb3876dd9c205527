#include "decitool/error.hpp"

namespace decitool {

CallSyntaxError::CallSyntaxError(std::size_t position, std::string expected)
    : Error("call syntax error at offset " + std::to_string(position) + ": expected " + expected,
            ErrorClass::Runtime),
      position_(position),
      expected_(std::move(expected)) {}

}  // namespace decitool
