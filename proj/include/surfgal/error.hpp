#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace surfgal {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SURFGAL_DEFINE_ERROR(Name)                     \
    class Name : public Error {                        \
    public:                                            \
        explicit Name(const std::string& what)         \
            : Error(std::string(#Name ": ") + what) {} \
    }

SURFGAL_DEFINE_ERROR(NonConvergence);
SURFGAL_DEFINE_ERROR(DegenerateGradient);
SURFGAL_DEFINE_ERROR(EmptyInput);
SURFGAL_DEFINE_ERROR(UnsupportedMethod);
SURFGAL_DEFINE_ERROR(ManifoldViolation);
SURFGAL_DEFINE_ERROR(TooFewPoints);
SURFGAL_DEFINE_ERROR(CapExceeded);
SURFGAL_DEFINE_ERROR(FoldedProjection);
SURFGAL_DEFINE_ERROR(LengthMismatch);
SURFGAL_DEFINE_ERROR(SupportMismatch);
SURFGAL_DEFINE_ERROR(LinearSolveFailure);
SURFGAL_DEFINE_ERROR(ZeroDenominator);
SURFGAL_DEFINE_ERROR(ConfigError);

#undef SURFGAL_DEFINE_ERROR

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("ParseError (line " + std::to_string(line) + "): " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IllConditioned : public Error {
public:
    IllConditioned(std::size_t center, double cond_estimate)
        : Error("IllConditioned: local Gram system of center " + std::to_string(center) +
                " is not numerically positive definite (cond ~ " + std::to_string(cond_estimate) + ")"),
          center_(center), cond_(cond_estimate) {}
    std::size_t center() const noexcept { return center_; }
    double cond_estimate() const noexcept { return cond_; }

private:
    std::size_t center_;
    double cond_;
};

class SingularLocalSystem : public Error {
public:
    explicit SingularLocalSystem(std::size_t triangle)
        : Error("SingularLocalSystem: triangle " + std::to_string(triangle)), triangle_(triangle) {}
    std::size_t triangle() const noexcept { return triangle_; }

private:
    std::size_t triangle_;
};

class NonlinearDivergence : public Error {
public:
    NonlinearDivergence(int iterations, double residual)
        : Error("NonlinearDivergence: no convergence after " + std::to_string(iterations) +
                " iterations (residual " + std::to_string(residual) + ")"),
          iterations_(iterations), residual_(residual) {}
    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// Wraps a failure raised inside a time step with the step index.
class StepFailure : public Error {
public:
    StepFailure(std::size_t step, const std::string& what)
        : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace surfgal
