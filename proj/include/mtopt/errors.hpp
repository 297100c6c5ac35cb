// SPDX-License-Identifier: Apache-2.0
//
// Error types shared across the library. Precondition violations throw
// std::invalid_argument; runtime numerical failures (non-finite values,
// diverged iterations) throw NumericalError so callers can distinguish
// bad configuration from bad arithmetic.
#pragma once

#include <stdexcept>
#include <string>

namespace mtopt {

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mtopt
