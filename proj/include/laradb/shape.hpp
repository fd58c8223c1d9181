#pragma once

#include <map>

#include "laradb/udf.hpp"

namespace lara::core {

/// Schema arithmetic for the three operators. The reference evaluator, the
/// streaming operators, and logical-plan inference all call these, so the
/// shape of every result is decided in exactly one place.

/// Union: keys are the intersection of the inputs' key attributes (left
/// order), values the union of their value attributes (left first). Shared
/// values must agree on type and default. `folds` binds one ⊕ per output
/// value attribute with identity = that attribute's default.
struct UnionShape {
    TableSchema schema;
    std::vector<std::string> keys;
    std::vector<std::string> values;
    std::map<std::string, udf::PlusFn> folds;
};
UnionShape unionShape(const TableSchema& a, const TableSchema& b,
                      const std::map<std::string, udf::PlusFn>& plusBy);

/// Aggregation onto `keepKeys` is a union against the empty table over that
/// key space; this returns that empty table's schema.
TableSchema aggKeySchema(const TableSchema& a, const std::vector<std::string>& keepKeys);

/// Join: keys are the union of the inputs' key attributes (left order first),
/// values the intersection, each combined by its ⊗. `combiners` are bound
/// with the input defaults as annihilators; output value types come from
/// numeric unification (builtins) or expression inference (custom ⊗), and
/// output defaults are ⊗ applied to the input defaults.
struct JoinShape {
    TableSchema schema;
    std::vector<std::string> sharedKeys;
    std::vector<std::string> bOnlyKeys;
    std::vector<std::string> values;
    std::map<std::string, udf::TimesFn> combiners;
};
JoinShape joinShape(const TableSchema& a, const TableSchema& b,
                    const std::map<std::string, udf::TimesFn>& timesBy);

/// Ext: input keys, then f's new keys; values replaced by f's outputs with
/// the defaults f inferred at bind time. `fn` must already be bound.
TableSchema extShape(const TableSchema& a, const udf::ExtFn& fn);

TableSchema renameShape(const TableSchema& a, const std::string& from, const std::string& to);

/// Int64 and Float64 unify to Float64; anything else must match exactly.
ScalarType unifyTypes(ScalarType a, ScalarType b, const std::string& what);

} // namespace lara::core
