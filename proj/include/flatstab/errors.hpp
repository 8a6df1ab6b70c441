#pragma once

#include <stdexcept>
#include <string>

namespace flatstab {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Complex construction / lookup.
struct InvalidDomainError : Error { using Error::Error; };
struct DegreeError : Error { using Error::Error; };
struct InvalidArgumentError : Error { using Error::Error; };

// Functional definitions.
struct InvalidFunctionalError : Error { using Error::Error; };

// Flat norm / filling.
struct NoFillingSpaceError : Error { using Error::Error; };
struct CapacityError : Error { using Error::Error; };
struct NotACycleError : Error { using Error::Error; };
struct NotNullHomologousError : Error { using Error::Error; };

// Raised when a flat decomposition with S != 0 is strictly cheaper than every
// pure filling, so the filling does not realize the flat norm.
struct FillingObstructionError : Error {
    FillingObstructionError(std::string msg, double filling_mass, double flat_value)
        : Error(std::move(msg)), filling_mass(filling_mass), flat_value(flat_value) {}
    double filling_mass;
    double flat_value;
};

// Geometry operations.
struct BoundaryMismatchError : Error { using Error::Error; };
struct NonRegularLevelError : Error { using Error::Error; };
struct EmptyWindowError : Error { using Error::Error; };
struct NotConeCompleteError : Error { using Error::Error; };

// Selection / minimization.
struct QuantizationError : Error { using Error::Error; };
struct NotACalibrationError : Error { using Error::Error; };

// Stability analysis.
struct BoundaryConditionError : Error { using Error::Error; };
struct NotCriticalError : Error { using Error::Error; };
struct HomologyError : Error { using Error::Error; };
struct InsufficientDataError : Error { using Error::Error; };

// Scenario / IO.
struct ConfigError : Error { using Error::Error; };
struct AbsentStageError : Error { using Error::Error; };

}  // namespace flatstab
