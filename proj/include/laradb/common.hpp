#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lara {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// API misuse: schema mismatches, bad arguments, malformed input data.
struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

/// A declared algebraic law (identity, annihilator, ...) failed verification
/// or was caught violated on live data.
struct PropertyError : Error {
    explicit PropertyError(const std::string& msg) : Error(msg) {}
};

/// Plan construction / lowering rejected the plan.
struct PlanError : Error {
    explicit PlanError(const std::string& msg) : Error(msg) {}
};

/// Plan-text syntax error, with position information when known.
struct ParseError : Error {
    int line;
    int column;
    ParseError(int line_, int col_, const std::string& msg)
        : Error("line " + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg),
          line(line_), column(col_) {}
    explicit ParseError(const std::string& msg) : Error(msg), line(0), column(0) {}
};

/// Filesystem / on-disk format failure.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Internal invariant check that stays on in all build types; these guard
/// cross-module contracts (stream ordering, canonical form) that tests rely on.
#define LARA_CHECK(cond, msg)                                                     \
    do {                                                                          \
        if (!(cond)) throw ::lara::Error(std::string("internal invariant: ") + (msg)); \
    } while (0)

/// Mixes a 64-bit value into a well-distributed hash (splitmix64 finalizer).
/// Used for structural plan hashing and for counter-based parallel RNG streams,
/// where independence from thread scheduling matters.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t hashCombine(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

using Rng = std::mt19937_64;

} // namespace lara
