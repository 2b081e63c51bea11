#ifndef CSTK_ERROR_HPP
#define CSTK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cstk {

/// Base class for all toolkit errors. The CLI maps these to exit code 1
/// and prints what() verbatim.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument values (negative means, probabilities outside [0,1], ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// A computation could not be completed (divergent posterior, singular
/// covariance, truncated belt, optimizer failure, ...).
class ComputationError : public Error {
public:
    explicit ComputationError(const std::string& msg) : Error(msg) {}
};

} // namespace cstk

#endif
