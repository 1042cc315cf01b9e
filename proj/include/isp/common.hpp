#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace isp {

// Error categories map one-to-one onto CLI exit codes (see cli.cpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file: bad magic, unsupported version, short header.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input violates a documented invariant or precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but degenerate for the requested computation
/// (all-zero map, no labeled pixels, no valid triplet anchor, ...).
class DegenerateInputError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss during training. Carries the epoch that produced it.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t epoch)
        : Error(what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Deterministic RNG. Wraps mt19937_64 (whose output sequence is fixed by the
// standard) and derives uniforms/normals itself, because the std
// distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    // Uniform index in [0, n).
    std::size_t index(std::size_t n);
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Runs body(i) for i in [0, n) on up to hardware_concurrency threads. Each
// index is visited exactly once; callers write results into slot i so the
// outcome does not depend on scheduling. Exceptions are rethrown (first by
// index) after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace isp
