#pragma once

#include <map>
#include <string>
#include <vector>

#include "laradb/udf.hpp"

namespace lara::core {

// Reference implementations of the logical operators, written as direct
// nested loops over table supports with no regard for cost. The streaming
// engine is tested against these; keep them obviously correct.

/// Key attributes: intersection (in a's order). Value attributes: union (a's
/// then b-only). Rows project onto the common keys; collisions fold with the
/// per-attribute plus, whose identity is bound to the attribute default.
/// `plusBy` must name every output value attribute. Shared value attributes
/// must agree on type and default between the inputs.
AssociativeTable oracleUnion(const AssociativeTable& a, const AssociativeTable& b,
                             const std::map<std::string, udf::PlusFn>& plusBy);

/// Aggregation is union with an empty table over the kept key space: project
/// to `keepKeys` (a subset of a's keys) and fold collisions.
AssociativeTable oracleAgg(const AssociativeTable& a, const std::vector<std::string>& keepKeys,
                           const std::map<std::string, udf::PlusFn>& plusBy);

/// Key attributes: union (a's order, then b-only in b's order). Value
/// attributes: intersection; each is combined with the per-attribute times,
/// whose annihilators are bound to the two input defaults. Support pairs
/// match on shared key attributes. Rows left unmatched on either side are
/// checked against the annihilator law; a violation means the true result is
/// not finitely representable and raises PropertyError.
AssociativeTable oracleJoin(const AssociativeTable& a, const AssociativeTable& b,
                            const std::map<std::string, udf::TimesFn>& timesBy);

/// Applies the tableau to every support row; emitted keys append after the
/// input keys. The value schema is replaced by the function's output schema.
/// The function is bound (and its empty-support law enforced) against a's
/// schema.
AssociativeTable oracleExt(const AssociativeTable& a, udf::ExtFn fn);

/// Map is ext with no new keys and a single tableau row.
AssociativeTable oracleMap(const AssociativeTable& a, udf::ExtFn fn);

/// Renames one attribute (key or value); data is untouched.
AssociativeTable oracleRename(const AssociativeTable& a, const std::string& from,
                              const std::string& to);

} // namespace lara::core
