#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pixelstorm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file content (CIFAR-10 records, PNG, weight files, manifests).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Caller violated a documented precondition.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A fitness function produced a non-finite value.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::size_t generation, std::size_t index)
        : Error(what), generation_(generation), index_(index) {}

    std::size_t generation() const noexcept { return generation_; }
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t generation_;
    std::size_t index_;
};

/// Network failure talking to a remote oracle.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Remote oracle answered, but not according to the wire protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// An attack aborted. Carries the evaluations spent before the failure.
class AttackError : public Error {
public:
    AttackError(const std::string& what, std::size_t evaluations_used)
        : Error(what), evaluations_used_(evaluations_used) {}

    std::size_t evaluations_used() const noexcept { return evaluations_used_; }

private:
    std::size_t evaluations_used_;
};

} // namespace pixelstorm
