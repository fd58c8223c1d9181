#pragma once

#include "laradb/logical.hpp"

namespace lara::plan {

/// Physical operators. Loads scan stored tables in path order; Map/Ext/
/// Rename/MergeAgg/MergeUnion/MergeJoin stream; Sort and SortAgg materialize
/// (sort-on-write); Store materializes durably under a catalog name.
/// ExtOver is the streaming re-order form of Ext for functions monotone in
/// the leading path attribute.
enum class PhysOp {
    Load,
    Map,
    Ext,
    ExtOver,
    Sort,
    SortAgg,
    MergeAgg,
    MergeUnion,
    MergeJoin,
    Rename,
    Store,
};

const char* toText(PhysOp op);

struct PhysNode {
    PhysOp op = PhysOp::Load;
    std::string name;
    double label = 0;
    bool inserted = false; // Sort added by lowering rather than written in the source
    std::vector<int> in;
    TableSchema schema;
    AccessPath path; // the key order rows leave this node in

    std::string table;                 // Load source / Store target
    std::optional<ScalarValue> lo, hi; // Load range on the leading path attribute
    std::optional<udf::ExtFn> fn;      // Map / Ext / ExtOver
    std::vector<std::string> on;       // MergeAgg / SortAgg grouped keys, in output order
    std::map<std::string, udf::PlusFn> plus;    // MergeAgg / SortAgg / MergeUnion folds
    std::map<std::string, udf::TimesFn> times;  // MergeJoin combiners
    udf::ExprPtr joinFilter;           // MergeJoin pair filter over output keys (triangle rule)
    std::string renameFrom, renameTo;  // Rename

    bool upperTriangle = false;  // Store: the consumer accepts the upper triangle only
    bool packed = false;         // materializations write packed (untagged) value bytes
    bool deferred = false;       // Store: tail is replayed at scan time instead of written
    std::string splitsFrom;      // materializations copy this stored table's partition splits
    std::vector<std::string> tags; // one short note per rewrite that touched this node
};

struct PhysPlan {
    std::vector<PhysNode> nodes;
    std::vector<int> roots;
    bool sharedExecution = false; // execute multiply-consumed nodes once and fan out

    const PhysNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
    PhysNode& node(int id) { return nodes.at(static_cast<std::size_t>(id)); }
    std::vector<int> consumersOf(int id) const;

    /// Ids reachable from the roots, inputs before consumers. Rewrites may
    /// leave nodes out-of-order in `nodes`, so traversals use this.
    std::vector<int> topoOrder() const;

    /// Drops nodes unreachable from the roots and renumbers the rest.
    void gc();
};

/// Structural invariants: input ids in range and acyclic; every merge
/// operator's inputs sorted with the required key prefix; every node's path a
/// permutation of its key attributes consistent with its inputs; schemas
/// agree with the shape rules. Throws PlanError.
void validatePhysical(const PhysPlan& plan);

/// Lowers a logical plan: picks merge operators, infers access paths, and
/// inserts Sort nodes exactly where a merge operator's required key prefix is
/// not available. Inserted Sorts are pushed below Maps and Renames (which
/// keep key order) so equal sorts of one producer can be shared, and are
/// labeled between their producer and first consumer.
PhysPlan lowerToPhysical(const LogicalPlan& plan);

/// Reference evaluation of a physical plan (oracle operators node by node).
/// Used to cross-check the streaming executor and the rewrite rules.
std::map<std::string, AssociativeTable> oracleEvaluatePhysical(
    const PhysPlan& plan, const std::map<std::string, AssociativeTable>& inputs);

} // namespace lara::plan
