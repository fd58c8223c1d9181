#pragma once

#include <atomic>
#include <cstdint>
#include <string>

namespace lara {

/// Process-wide execution counters. Cheap enough to leave on everywhere;
/// several acceptance checks compare plans by these numbers rather than by
/// wall time, which keeps them machine-independent.
struct Metrics {
    std::atomic<std::uint64_t> rowsIn{0};   // rows read from storage
    std::atomic<std::uint64_t> rowsOut{0};  // rows written to stores
    std::atomic<std::uint64_t> tuplesMaterialized{0}; // rows buffered by sorts/joins
    std::atomic<std::uint64_t> bytesSorted{0};        // bytes through external sorts
    std::atomic<std::uint64_t> partialProducts{0};    // pairs emitted by merge joins

    static Metrics& global();
    void reset();
    std::string report() const; // one "name value" line per counter
};

} // namespace lara
