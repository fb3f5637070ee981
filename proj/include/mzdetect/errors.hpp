#pragma once

#include <stdexcept>
#include <string>

namespace mzd {

/// A value handed to an operation violates its domain.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration block is inconsistent (filters, sample rates, loops).
class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested operating point cannot be realised.
class InfeasibleDesign : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough samples to form the requested estimate.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename E>
inline void require(bool ok, const std::string& what) {
  if (!ok) throw E(what);
}

}  // namespace detail
}  // namespace mzd
