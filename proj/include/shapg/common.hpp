#ifndef SHAPG_COMMON_HPP
#define SHAPG_COMMON_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace shapg {

/// Base error for all failures raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, malformed files, mismatched shapes.
/// The CLI maps this class to the usage exit code.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Row-major numeric matrix (rows = observations).
using Matrix = std::vector<std::vector<double>>;

}  // namespace shapg

#endif
