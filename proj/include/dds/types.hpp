#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dds {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
// Batched quantities are stored column-major: one column per sample.
using Matrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Raised when training produces a non-finite loss or drift.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw InvalidArgument(msg);
}
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace dds
