#ifndef RAPO_COMMON_HPP
#define RAPO_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace rapo
{

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using CRef = const Eigen::Ref<const T>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Input outside an operation's mathematical domain (non-finite values,
/// mismatched shapes, distributions off the simplex).
class DomainError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Solver knobs or run configuration that cannot be honoured.
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative method ran out of iterations.
class ConvergenceError : public std::runtime_error
{
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual)
    {
    }

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A NaN or infinity appeared where only finite numbers are meaningful.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x)
{
    return x.allFinite();
}

/// Throws DomainError unless `p` is a probability vector within `tol`.
template <class Derived>
void require_simplex(const Eigen::MatrixBase<Derived>& p, double tol, const std::string& what)
{
    using Scalar = typename Derived::Scalar;
    if (p.size() == 0) {
        throw DomainError(what + ": empty distribution");
    }
    if (!p.allFinite()) {
        throw DomainError(what + ": non-finite probability");
    }
    if ((p.array() < Scalar(0)).any()) {
        throw DomainError(what + ": negative probability");
    }
    const Scalar total = p.sum();
    if (std::abs(static_cast<double>(total) - 1.0) > tol) {
        throw DomainError(what + ": probabilities sum to " + std::to_string(static_cast<double>(total)));
    }
}

} // namespace rapo

#endif
