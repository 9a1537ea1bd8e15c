#ifndef OPE_LAB_ERRORS_HPP
#define OPE_LAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ope_lab {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched dimensions between policies, datasets and environments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument bounds.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A logged action or embedding has zero probability under the logging policy.
class SupportError : public Error {
 public:
  using Error::Error;
};

// An exact enumeration would exceed the configured term budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Singular or otherwise unsolvable linear algebra.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ope_lab

#endif  // OPE_LAB_ERRORS_HPP
