#pragma once

#include <stdexcept>
#include <string>

namespace ecodrive {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The vehicle would stop (or reverse) inside a segment.
class KinematicsError : public Error {
 public:
  using Error::Error;
};

/// A segment with zero average speed has no finite traversal time.
class DegenerateSegmentError : public Error {
 public:
  using Error::Error;
};

/// Parameters or inputs violate a documented invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// No point satisfies the constraints (oracle, time budget, speed window).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// The battery window is too small for the requested daily distance.
class RangeExceededError : public Error {
 public:
  using Error::Error;
};

/// Headway gap fell to zero or below.
class CollisionError : public Error {
 public:
  using Error::Error;
};

/// Input file could not be read or parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace ecodrive
