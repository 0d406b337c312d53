#pragma once

#include <stdexcept>
#include <string>

namespace skelpaint {

// Base class for all library errors. Subclasses mirror the failure modes of
// the public operations so callers can map them to exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct MalformedFile : Error {
    explicit MalformedFile(const std::string& msg) : Error(msg) {}
};

struct NonFiniteJoint : Error {
    explicit NonFiniteJoint(const std::string& msg) : Error(msg) {}
};

struct EmptySequence : Error {
    explicit EmptySequence(const std::string& msg) : Error(msg) {}
};

struct IndexOutOfRange : Error {
    explicit IndexOutOfRange(const std::string& msg) : Error(msg) {}
};

struct EmptySet : Error {
    explicit EmptySet(const std::string& msg) : Error(msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

struct TooFewPoints : Error {
    explicit TooFewPoints(const std::string& msg) : Error(msg) {}
};

struct NonScalarLoss : Error {
    explicit NonScalarLoss(const std::string& msg) : Error(msg) {}
};

struct NaNDetected : Error {
    explicit NaNDetected(const std::string& msg) : Error(msg) {}
};

struct EmptyClass : Error {
    explicit EmptyClass(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace skelpaint
