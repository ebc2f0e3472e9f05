#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kdvlab {

/// Base class for all kdvlab failures.  Subclasses distinguish caller
/// mistakes (invalid_input, out_of_domain, out_of_band) from numerical
/// breakdowns (numerical_failure, resolution_error, blow_up_error) so the
/// CLI can map them onto exit codes.
struct error : std::runtime_error {
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed arguments: non-finite samples, coincident amplitudes, ...
struct invalid_input : error {
    using error::error;
};

/// A quantity was requested outside its validated domain (e.g. the alpha
/// series below its convergence threshold).  Never extrapolated.
struct out_of_domain : error {
    using error::error;
};

/// Dyadic band outside the grid's resolvable frequency range.
struct out_of_band : error {
    using error::error;
};

/// Profile tails exceed the boundary budget; the box does not fake the line.
struct domain_too_small : error {
    using error::error;
};

/// Linear algebra gave up (failed factorization, unreliable conditioning).
struct numerical_failure : error {
    using error::error;
};

/// Spectral truncation tail above budget for the requested tolerance.
struct resolution_error : error {
    using error::error;
};

/// ODE integrator did not converge; carries step diagnostics in what().
struct solver_error : error {
    using error::error;
};

/// Time stepping produced NaN/overflow.  Carries the last valid state.
struct blow_up_error : error {
    blow_up_error(const std::string& what, double t, std::vector<double> last)
        : error(what), time(t), last_valid(std::move(last)) {}
    double time;
    std::vector<double> last_valid;
};

}  // namespace kdvlab
