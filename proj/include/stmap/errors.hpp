#pragma once

#include <stdexcept>
#include <string>

namespace stmap {

// Error taxonomy mirrors the CLI exit codes: input 2, fit 3, internal 4.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StructureError : std::runtime_error {
    explicit StructureError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FitError : std::runtime_error {
    explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PartitionError : std::runtime_error {
    explicit PartitionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CriteriaError : std::runtime_error {
    explicit CriteriaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PlanError : InputError {
    explicit PlanError(const std::string& msg) : InputError(msg) {}
};

}  // namespace stmap
