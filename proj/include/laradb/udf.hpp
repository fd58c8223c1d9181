#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "laradb/expr.hpp"

namespace lara::udf {

using core::AttributeSchema;
using core::TableSchema;

/// Widens Int64 to Float64 when `want` is Float64, passes null through, and
/// rejects anything else that does not already match. Applied to every UDF
/// evaluation result so runtime values always agree with inferred schemas.
ScalarValue coerceTo(ScalarValue v, ScalarType want);

/// Outcome of checking one algebraic law on sampled inputs.
struct LawCheck {
    std::string law;
    bool passed = true;
    std::string counterexample; // filled when passed == false
};

struct VerifyReport {
    std::string subject;
    std::vector<LawCheck> checks;

    bool allPassed() const;
    const LawCheck* failing() const;
    std::string toText() const;
    /// Throws PropertyError with the first counterexample if any law failed.
    void require() const;
};

/// Number of samples and seed used by all randomized law verification.
constexpr int kDefaultSamples = 1000;
constexpr std::uint64_t kVerifySeed = 42;

// ---------------------------------------------------------------------------

/// A binary "plus": folds colliding values in unions and aggregations.
/// Its identity must equal the default of the attribute it folds; the
/// identity is therefore bound at plan time, not at definition time.
class PlusFn {
public:
    enum class Builtin { None, Sum, Any, Max, Or };

    /// Builtins: sum (null-skipping addition), any (first non-identity
    /// argument), max (null-skipping maximum), or (null-skipping boolean or).
    static PlusFn builtin(const std::string& name);
    /// Expression form: `expr` sees the left operand as `attr` and the right
    /// operand as `attr'` (one appended apostrophe).
    static PlusFn fromExpr(std::string attr, ExprPtr expr, bool associative, bool commutative,
                           bool idempotent);

    const std::string& name() const { return name_; }
    bool isBuiltin() const { return builtin_ != Builtin::None; }
    const ExprPtr& expr() const { return expr_; } // null for builtins
    bool associative() const { return associative_; }
    bool commutative() const { return commutative_; }
    bool idempotent() const { return idempotent_; }
    const ScalarValue& identity() const;
    bool hasIdentity() const { return identityBound_; }

    /// Returns a copy with the identity (the attribute default) filled in.
    PlusFn withIdentity(ScalarValue identity) const;
    /// Rebinds the operand attribute name used by the expression form.
    PlusFn withAttr(const std::string& attr) const;

    ScalarValue apply(const ScalarValue& a, const ScalarValue& b) const;

    std::string serialize() const;
    static PlusFn deserialize(const std::string& text, const std::string& attr);

private:
    std::string name_;
    Builtin builtin_ = Builtin::None;
    std::string attr_;
    ExprPtr expr_;
    ScalarValue identity_;
    bool identityBound_ = false;
    bool associative_ = false;
    bool commutative_ = false;
    bool idempotent_ = false;
};

/// A binary "times": combines matching values in joins. Its annihilators are
/// the two input defaults; the combined default is apply(left, right).
class TimesFn {
public:
    enum class Builtin { None, Times, Minus };

    /// Builtins: times (null-propagating multiplication), minus
    /// (null-propagating subtraction).
    static TimesFn builtin(const std::string& name);
    /// Expression form: `expr` sees the left operand as `attr` and the right
    /// operand as `attr'`; any output key attributes are also in scope.
    static TimesFn fromExpr(std::string attr, ExprPtr expr, bool commutative,
                            std::string distributesOver = "");

    const std::string& name() const { return name_; }
    bool isBuiltin() const { return builtin_ != Builtin::None; }
    const ExprPtr& expr() const { return expr_; } // null for builtins
    bool commutative() const { return commutative_; }
    const std::string& distributesOver() const { return distributesOver_; }
    bool hasAnnihilators() const { return annihilatorsBound_; }
    const ScalarValue& leftAnnihilator() const;
    const ScalarValue& rightAnnihilator() const;

    TimesFn withAnnihilators(ScalarValue left, ScalarValue right) const;
    TimesFn withAttr(const std::string& attr) const;

    /// `keys` supplies the output key bindings visible to expression forms.
    ScalarValue apply(const ScalarValue& a, const ScalarValue& b,
                      const TupleRow* keys = nullptr) const;

    std::string serialize() const;
    static TimesFn deserialize(const std::string& text, const std::string& attr);

private:
    std::string name_;
    Builtin builtin_ = Builtin::None;
    std::string attr_;
    ExprPtr expr_;
    ScalarValue leftAnn_, rightAnn_;
    bool annihilatorsBound_ = false;
    bool commutative_ = false;
    std::string distributesOver_;
};

// ---------------------------------------------------------------------------

/// One output row of an ext tableau: expressions for the new key attributes
/// and for the value attributes, evaluated against the full input row.
struct TableauRow {
    std::vector<ExprPtr> keyExprs;
    std::vector<ExprPtr> valExprs;
};

/// The table-valued function applied by ext: for each input row it emits the
/// tableau rows, whose new keys append after the input keys. A legal ExtFn
/// must yield only default values when the input values are all defaults, so
/// that non-measured inputs never create support.
class ExtFn {
public:
    ExtFn() = default;
    ExtFn(std::vector<std::string> newKeyNames, std::vector<std::string> valueNames,
          std::vector<TableauRow> rows, std::vector<std::string> monotoneIn = {});

    /// A Map: zero new keys, one tableau row.
    static ExtFn map(std::vector<std::string> valueNames, std::vector<ExprPtr> valExprs);

    const std::vector<std::string>& newKeyNames() const { return newKeyNames_; }
    const std::vector<std::string>& valueNames() const { return valueNames_; }
    const std::vector<TableauRow>& rows() const { return rows_; }
    const std::vector<std::string>& monotoneIn() const { return monotoneIn_; }
    bool isMap() const { return newKeyNames_.empty() && rows_.size() == 1; }

    /// Resolves output types and defaults against the input schema. Output
    /// value defaults are the value expressions evaluated over default
    /// values; bind() verifies (by sampling key bindings) that they do not
    /// depend on the keys.
    void bind(const TableSchema& input);
    bool bound() const { return bound_; }

    const std::vector<ScalarType>& newKeyTypes() const { return newKeyTypes_; }
    const std::vector<ScalarType>& valueTypes() const { return valueTypes_; }
    const std::vector<ScalarValue>& outputDefaults() const { return outputDefaults_; }
    const TableSchema& inputSchema() const { return input_; }

    /// Evaluates the tableau on one input row: per tableau row, the new key
    /// values and the output values (coerced to the bound types).
    struct Emitted {
        std::vector<ScalarValue> newKeys;
        std::vector<ScalarValue> values;
    };
    std::vector<Emitted> applyToRow(const TupleRow& row) const;

    std::string serialize() const;
    static ExtFn deserialize(const std::string& text);

private:
    std::vector<std::string> newKeyNames_;
    std::vector<std::string> valueNames_;
    std::vector<TableauRow> rows_;
    std::vector<std::string> monotoneIn_;

    bool bound_ = false;
    TableSchema input_;
    std::vector<ScalarType> newKeyTypes_;
    std::vector<ScalarType> valueTypes_;
    std::vector<ScalarValue> outputDefaults_;
};

// ---------------------------------------------------------------------------
// Law verification. All verification is randomized sampling under a fixed
// seed: a pass is evidence, not proof, and is reproducible.

/// Checks the identity law against the bound identity plus each declared flag
/// (associativity, commutativity, idempotence) on sampled values.
VerifyReport verifyPlusProperties(const PlusFn& fn, int samples = kDefaultSamples,
                                  ScalarType valueType = ScalarType::Float64);

/// Checks both annihilator laws, the commutativity flag, and (when declared)
/// distribution over `plus` on sampled values.
VerifyReport verifyTimesProperties(const TimesFn& fn, const PlusFn* plus = nullptr,
                                   int samples = kDefaultSamples,
                                   ScalarType valueType = ScalarType::Float64);

/// Checks empty-support-on-defaults and output schema consistency on sampled
/// rows of `inputSchema`. The ExtFn is bound to the schema as a side effect.
VerifyReport verifyExtProperties(ExtFn& fn, const TableSchema& inputSchema,
                                 int samples = kDefaultSamples);

/// Checks the output-key ordering required of a monotone declaration: for
/// sampled rows that differ only in `keyAttr` with r1 < r2, every output key
/// of f(r1) is <= every output key of f(r2).
VerifyReport checkMonotone(const ExtFn& fn, const std::string& keyAttr,
                           int samples = kDefaultSamples);

/// Samples a value of the given type (small dyadic floats and small ints, so
/// that +, -, * are exact and law checks can use exact equality). Null is
/// drawn occasionally when allowNull is set.
ScalarValue sampleValue(Rng& rng, ScalarType type, bool allowNull = true);

/// Uniform integer in [lo, hi] that is stable across standard libraries
/// (std::uniform_int_distribution is not portable across implementations).
std::int64_t randInt(Rng& rng, std::int64_t lo, std::int64_t hi);

// Text helpers shared with the plan parser. splitTopLevel splits on `delim`
// occurrences outside (), [], {} and '...' literals; parseNamedExprList
// parses "[name: expr, name: expr, ...]" (brackets included).
std::vector<std::string> splitTopLevel(const std::string& text, char delim);
std::vector<std::pair<std::string, ExprPtr>> parseNamedExprList(const std::string& text);

} // namespace lara::udf
