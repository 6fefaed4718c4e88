#pragma once

#include <stdexcept>
#include <string>

namespace anisobn {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Derivative requested at a point where the norm is not differentiable.
class SingularityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Two independent quadratures disagree, or adaptive refinement gave up.
class AccuracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Least-squares fit is rank deficient or has too few points.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative method ran out of iterations. Carries the best iterate found.
template <typename Payload>
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, Payload best)
        : std::runtime_error(what), best_(std::move(best)) {}

    [[nodiscard]] const Payload& best() const noexcept { return best_; }

private:
    Payload best_;
};

}  // namespace anisobn
