#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace dudf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or configuration. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Worker count used by every parallel loop in the library. Zero selects the
// DUDF_THREADS environment variable, falling back to hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; callers
// write results to disjoint indices so output never depends on thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dudf
