#pragma once

#include <stdexcept>
#include <string>

namespace orient {

// Invalid arguments are reported with std::invalid_argument. These cover
// the remaining error kinds used across the library.

/// Object used out of sequence, e.g. a forward cache that no longer matches
/// the parameters it was produced from.
class invalid_state : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Lookup of a key that does not exist.
class not_found : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or parameter.
class numeric_divergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace orient
