#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pfmix {

// Rows are observations; row-major keeps each datum contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kProbFloor = 1e-10;
inline constexpr double kVarFloor = 1e-6;

// Error taxonomy; exit_code() is what the CLI returns for each kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept = 0;
};

class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

// Work distribution for the data-parallel kernels. Both produce results that
// do not depend on the number of OpenMP threads.
enum class Backend { serial, parallel };

}  // namespace pfmix
