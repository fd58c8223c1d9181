#pragma once

#include "laradb/physplan.hpp"
#include "laradb/store.hpp"

namespace lara::exec {

struct ExecOptions {
    /// Capture every named binding as an in-memory table, not just the
    /// Store targets. Costs a tee per binding; meant for tests and the CLI.
    bool keepBindings = false;
    /// Worker threads for the parallel kernels (sort runs). 0 = one per
    /// hardware thread.
    int parallelism = 0;
    /// Rows a sort run buffers before spilling (per run).
    std::size_t memBudgetRows = 1u << 20;
    /// Rows a merge join may buffer for one left-side group before spilling.
    std::size_t joinGroupBudgetRows = 64u * 1024;
    /// Where intermediate stores (Sort/SortAgg spools, shared-scan tees)
    /// live. Empty = a fresh directory under the catalog's data dir.
    std::string spoolDir;
    /// Partition count for durable Store targets.
    int storePartitions = 1;
};

struct ExecResult {
    /// Binding name -> table, under keepBindings. Store targets are durable
    /// either way; read them back by the names in `stored`.
    std::map<std::string, core::AssociativeTable> kept;
    /// Store targets written durably, in plan order.
    std::vector<std::string> stored;
    /// Wall time per node, keyed by node id.
    std::map<int, double> nodeMillis;
    /// Pairs a merge join actually combined, summed over all joins.
    std::size_t partialProducts = 0;
    /// Rows materialized by Sort/SortAgg spools, summed.
    std::size_t tuplesMaterialized = 0;
};

/// Runs a physical plan against the catalog: Loads scan stored tables,
/// Stores write new ones. Throws PlanError on an invalid plan, IoError on
/// storage trouble.
ExecResult executePhysical(const plan::PhysPlan& plan, storage::Catalog& catalog,
                           const ExecOptions& opts = {});

/// Reads a table or view by name. Views replay their saved plan against the
/// pinned base versions; a base that moved on is an error, not silently
/// stale data.
core::AssociativeTable readTable(storage::Catalog& catalog, const std::string& name);

} // namespace lara::exec
