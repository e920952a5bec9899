#ifndef TRIPWELL_ERRORS_HPP
#define TRIPWELL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tripwell {

// Raised when a computation cannot produce a trustworthy result (solver failure,
// norm drift, degenerate start, singular rotation time).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tripwell

#endif  // TRIPWELL_ERRORS_HPP
