#ifndef CEL_ERROR_HPP
#define CEL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cel {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A node name or index that does not exist in the model or graph.
class UnknownNodeError : public Error {
 public:
  explicit UnknownNodeError(const std::string& name)
      : Error("unknown node '" + name + "'") {}
};

/// The graph has a directed cycle; the message names one.
class CycleError : public Error {
 public:
  using Error::Error;
};

/// A formula divided by the probability of an event that has probability 0.
class PositivityError : public Error {
 public:
  explicit PositivityError(const std::string& event)
      : Error("positivity violated: P(" + event + ") = 0"), event_(event) {}

  const std::string& event() const noexcept { return event_; }

 private:
  std::string event_;
};

/// Exact enumeration refused because the state space exceeds the cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A precondition on the model or the arguments does not hold.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Intercept calibration could not reach the target prevalence.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cel

#endif  // CEL_ERROR_HPP
