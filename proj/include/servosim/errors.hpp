#pragma once

#include <stdexcept>
#include <string>

namespace servosim {

// Base class for all recoverable failures raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// geometry
struct AngleAtPi : Error { using Error::Error; };
struct BehindCamera : Error { using Error::Error; };
struct NonPositiveDepth : Error { using Error::Error; };

// scene
struct InvalidBounds : Error { using Error::Error; };
struct NonFiniteCommand : Error { using Error::Error; };

// estimation
struct TooFewPoints : Error { using Error::Error; };
struct DegenerateConfiguration : Error { using Error::Error; };
struct InsufficientMatches : Error { using Error::Error; };
struct NoConsensus : Error { using Error::Error; };
struct EmptyCloud : Error { using Error::Error; };
struct PriorUnavailable : Error { using Error::Error; };
struct NoValidDepth : Error { using Error::Error; };
struct DegenerateDepth : Error { using Error::Error; };

// fusion
struct NonSPDCovariance : Error { using Error::Error; };
struct AngleWrap : Error { using Error::Error; };

// coordination
struct OutOfWorkspace : Error { using Error::Error; };
struct PreconditionViolated : Error { using Error::Error; };

// harness
struct InsufficientSamples : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace servosim
