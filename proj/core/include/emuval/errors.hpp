#pragma once

#include <exception>
#include <stdexcept>
#include <string>

namespace emuval {

/// Raised when caller-supplied data or parameters violate a precondition.
/// The CLI maps this to exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rethrows the exception in flight with `context` prepended to its message.
/// InvalidInput stays InvalidInput; anything else becomes std::runtime_error.
/// Call only from inside a catch block.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const InvalidInput& e) {
    throw InvalidInput(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(context + ": " + e.what());
  }
}

}  // namespace emuval
