#pragma once

#include <stdexcept>
#include <string>

namespace semslam {

// Invalid arguments are reported with std::invalid_argument. The classes below
// cover the domain failures callers are expected to branch on.

/// A prediction needs a point or quadric in front of the camera and it is not.
class BehindCamera : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The projected conic is not a real ellipse (camera inside or straddling the
/// quadric, or the conic's (3,3) entry vanishes).
class DegenerateProjection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few or affinely dependent points.
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AlignmentDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpec : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Residual or Jacobian evaluation produced a non-finite number.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace semslam
