#pragma once

#include <memory>
#include <string>
#include <vector>

#include "laradb/table.hpp"

namespace lara::udf {

using core::ScalarType;
using core::ScalarValue;
using core::TupleRow;

/// Expression tree over attribute references, literals, arithmetic,
/// comparisons, boolean connectives, if/isNull, and the builtins bin / ntz.
/// Expressions are the only form user code takes: they serialize with the
/// plan and the optimizer can inspect them structurally.
struct ScalarExpr;
using ExprPtr = std::shared_ptr<const ScalarExpr>;

struct ScalarExpr {
    enum class Kind {
        Lit, Ref,
        Add, Sub, Mul, Div,
        Eq, Ne, Lt, Le, Gt, Ge,
        And, Or, Not,
        If, IsNull,
        Bin, Ntz,
    };

    Kind kind;
    ScalarValue lit;          // Lit
    std::string ref;          // Ref
    std::vector<ExprPtr> args;

    static ExprPtr literal(ScalarValue v);
    static ExprPtr attr(std::string name);
    static ExprPtr node(Kind k, std::vector<ExprPtr> args);

    /// Source form; parseExpr(print()) reproduces the tree.
    std::string print() const;
    /// All attribute names referenced anywhere in the tree.
    std::vector<std::string> referencedAttrs() const;
    /// Structural equality (used by rewrite-rule pattern matching).
    bool equals(const ScalarExpr& o) const;
    std::uint64_t hash() const;
};

/// Parses the textual expression syntax:
///   literals      42, 3.5, true, false, null, 'text'
///   references    identifiers, optionally with trailing apostrophes (t', c')
///   operators     * /  + -  = != < <= > >=  !  &&  ||  (by rising scope)
///   calls         if(c, x, y), isNull(x), bin(t), ntz(v)
ExprPtr parseExpr(const std::string& text);

/// Evaluates with every referenced attribute bound by `row`.
///   - arithmetic on null yields null; division by zero yields null
///   - int64 op int64 stays int64 (division truncates toward zero);
///     mixing with float64 promotes to float64
///   - comparisons yield int64 0/1 and yield 0 when either side is null
///     (isNull is the only null test)
///   - if(c, x, y) takes a bool or a numeric condition (nonzero = true);
///     a null condition selects y
ScalarValue evalScalarExpr(const ScalarExpr& expr, const TupleRow& row);

/// Static result type given attribute types from `schema` (keys and values
/// both visible). Null unifies with any type; errors on unknown attributes.
ScalarType inferExprType(const ScalarExpr& expr, const core::TableSchema& schema);

/// The null-to-zero map: null becomes a zero of `numericType`, everything
/// else passes through. Exposed for rule-Z machinery and tests.
ScalarValue ntz(const ScalarValue& v, ScalarType numericType);

/// Rounds t to the nearest multiple of 60 (ties upward), e.g. 466 -> 480.
std::int64_t binToNearestMinute(std::int64_t t);

} // namespace lara::udf
