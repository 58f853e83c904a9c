#pragma once
#include <Eigen/Core>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace pdcd {

using Index = std::ptrdiff_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double infinity = std::numeric_limits<double>::infinity();

/*
 * Base class of all errors raised by the library.
 */
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/* Dimensions or block layouts of two operands disagree. */
class ShapeError : public Error
{
public:
    using Error::Error;
};

/* An argument violates a documented precondition. */
class InvalidArgument : public Error
{
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw InvalidArgument(msg);
}

inline void require_shape(bool cond, const std::string& msg)
{
    if (!cond) throw ShapeError(msg);
}

} // namespace detail
} // namespace pdcd
