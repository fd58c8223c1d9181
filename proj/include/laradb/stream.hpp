#pragma once

#include "laradb/extsort.hpp"
#include "laradb/shape.hpp"

namespace lara::physical {

using core::AssociativeTable;
using core::ScalarValue;
using core::TableSchema;
using core::TupleRow;
using storage::AccessPath;
using storage::Catalog;
using storage::SortedTableStore;
using udf::ExtFn;
using udf::PlusFn;
using udf::TimesFn;

/// A pull-based ordered row stream. Rows carry the key attributes in path
/// order followed by the value attributes, and arrive in strictly increasing
/// path order (each operator validates what it relies on as it merges).
class RowStream {
public:
    RowStream(TableSchema schema, AccessPath path);
    virtual ~RowStream() = default;

    const TableSchema& schema() const { return schema_; }
    const AccessPath& path() const { return path_; }
    const TupleRow::Names& names() const { return names_; }

    virtual std::optional<TupleRow> next() = 0;

protected:
    TableSchema schema_;
    AccessPath path_;
    TupleRow::Names names_;
};

using StreamPtr = std::unique_ptr<RowStream>;

/// Ordered scan of a catalog table, optionally bounded (inclusive) on a
/// leading prefix of its access path.
StreamPtr loadRange(const Catalog& catalog, const std::string& name,
                    std::optional<std::vector<ScalarValue>> lo = std::nullopt,
                    std::optional<std::vector<ScalarValue>> hi = std::nullopt);

/// Ordered scan of an open store (used for temporary spools).
StreamPtr scanStore(std::shared_ptr<SortedTableStore> store,
                    std::optional<std::vector<ScalarValue>> lo = std::nullopt,
                    std::optional<std::vector<ScalarValue>> hi = std::nullopt);

/// Streams an in-memory table in `path` order (tests and tiny inputs).
StreamPtr streamTable(AssociativeTable table, AccessPath path);

/// Checks that rows come out strictly increasing in the stream's path.
/// Merge operators verify their own inputs; this wrapper is for tests and
/// for guarding externally supplied streams.
StreamPtr orderChecked(StreamPtr in);

/// Merge join: both inputs must arrive with their common key attributes as a
/// shared path prefix, in the same order. For each common-key group the
/// Cartesian product of the two groups is emitted, combining each shared
/// value attribute with its ⊗. The left group is buffered, in memory up to
/// `aGroupBudgetRows` rows and spilled to a temporary run beyond that.
/// Output path: a's path, then b's remaining key attributes.
/// `emitFilter`, when given, is a predicate over the output key attributes;
/// pairs failing it are skipped before their combiners run (the planner uses
/// this to keep only one triangle of a symmetric product).
StreamPtr mergeJoin(StreamPtr a, StreamPtr b, const std::map<std::string, TimesFn>& times,
                    std::uint64_t aGroupBudgetRows = 64 * 1024,
                    udf::ExprPtr emitFilter = nullptr);

/// Merge union/aggregate: one output row per distinct `onKeys` prefix, values
/// folded with their ⊕ (identity = output default, a's rows before b's).
/// Pass b = nullptr for the unary form (aggregation onto a key prefix).
/// Both inputs must arrive sorted with onKeys as a path prefix.
StreamPtr mergeUnionAgg(StreamPtr a, StreamPtr b, const AccessPath& onKeys,
                        const std::map<std::string, PlusFn>& plus);

/// Applies a tableau function to each row, flattening its emissions. Output
/// path: input path, then f's new keys (per-row emissions are emitted in new
/// key order). Map functions (no new keys) preserve the path exactly.
StreamPtr extMapStream(StreamPtr in, ExtFn f);

/// Ext for a function declared (and verified) monotone in the stream's
/// leading path attribute, re-ordered on the fly to `targetPath` — f's new
/// keys first, then a permutation of the input keys. Emissions are buffered
/// and re-sorted one leading-attribute group at a time, which is what makes
/// the downstream Sort removable.
StreamPtr extOverStream(StreamPtr in, ExtFn f, const AccessPath& targetPath,
                        std::uint64_t groupBudgetRows = 64 * 1024);

/// Renames attributes (names only; kinds, types, order, and data unchanged).
StreamPtr renameStream(StreamPtr in, const std::vector<std::pair<std::string, std::string>>& renames);

/// Externally sorts a stream to a fresh store at `dir` with path `target`.
/// The input must have unique keys (it comes from a canonical table).
SortedTableStore sortToStore(StreamPtr in, const std::string& dir, const AccessPath& target,
                             const storage::StoreOptions& opts);

/// Sort fused with aggregation: folds equal `target` prefixes with ⊕ inside
/// every sort buffer and merge, so at most one unfolded buffer of rows is
/// ever materialized. Requires associative + commutative ⊕ (fold order is
/// unspecified). Result equals Sort-then-MergeAgg extensionally.
SortedTableStore sortAgg(StreamPtr in, const std::string& dir, const AccessPath& targetPath,
                         const std::map<std::string, PlusFn>& plus,
                         const storage::StoreOptions& opts);

/// Materializes a stream (which must already be in path order) into a table.
AssociativeTable materialize(RowStream& in);

} // namespace lara::physical
