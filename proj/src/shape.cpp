#include "laradb/shape.hpp"

namespace lara::core {

using udf::PlusFn;
using udf::TimesFn;

namespace {

void checkKindAgreement(const TableSchema& a, const TableSchema& b) {
    for (const auto& at : a.attrs()) {
        const AttributeSchema* bt = b.find(at.name);
        if (bt && bt->kind != at.kind)
            throw UsageError("attribute " + at.name +
                             " is a key in one input and a value in the other");
    }
}

const PlusFn& plusFor(const std::map<std::string, PlusFn>& plusBy, const std::string& attr) {
    auto it = plusBy.find(attr);
    if (it == plusBy.end())
        throw UsageError("no aggregate function given for value attribute " + attr);
    return it->second;
}

} // namespace

ScalarType unifyTypes(ScalarType a, ScalarType b, const std::string& what) {
    if (a == b) return a;
    if (a == ScalarType::Null) return b;
    if (b == ScalarType::Null) return a;
    if ((a == ScalarType::Int64 && b == ScalarType::Float64) ||
        (a == ScalarType::Float64 && b == ScalarType::Int64))
        return ScalarType::Float64;
    throw UsageError("cannot unify types of " + what + ": " + typeName(a) + " vs " + typeName(b));
}

UnionShape unionShape(const TableSchema& a, const TableSchema& b,
                      const std::map<std::string, PlusFn>& plusBy) {
    checkKindAgreement(a, b);
    UnionShape shape;

    // Output keys: intersection, in a's declared order.
    std::vector<AttributeSchema> attrs;
    for (const auto& n : a.keyNames()) {
        if (b.hasKey(n)) {
            if (a.at(n).type != b.at(n).type)
                throw UsageError("common key " + n + " has different types in the two inputs");
            attrs.push_back(a.at(n));
            shape.keys.push_back(n);
        }
    }

    // Output values: union; shared attributes must agree on type and default.
    for (const auto& n : a.valueNames()) {
        AttributeSchema at = a.at(n);
        if (b.hasValue(n)) {
            const AttributeSchema& bt = b.at(n);
            if (at.type != bt.type && at.type != ScalarType::Null && bt.type != ScalarType::Null)
                throw UsageError("shared value " + n + " has different types in the two inputs");
            if (!(at.dflt == bt.dflt))
                throw UsageError("shared value " + n + " has different defaults: " +
                                 at.dflt.toLiteral() + " vs " + bt.dflt.toLiteral());
        }
        attrs.push_back(at);
        shape.values.push_back(n);
    }
    for (const auto& n : b.valueNames()) {
        if (!a.hasValue(n)) {
            attrs.push_back(b.at(n));
            shape.values.push_back(n);
        }
    }
    shape.schema = TableSchema(attrs);

    for (const auto& n : shape.values)
        shape.folds.emplace(n,
                            plusFor(plusBy, n).withAttr(n).withIdentity(shape.schema.at(n).dflt));
    return shape;
}

TableSchema aggKeySchema(const TableSchema& a, const std::vector<std::string>& keepKeys) {
    std::vector<AttributeSchema> attrs;
    for (const auto& n : keepKeys) {
        if (!a.hasKey(n))
            throw UsageError("aggregation keeps " + n + ", which is not a key of the input");
        attrs.push_back(a.at(n));
    }
    return TableSchema(attrs);
}

JoinShape joinShape(const TableSchema& a, const TableSchema& b,
                    const std::map<std::string, TimesFn>& timesBy) {
    checkKindAgreement(a, b);
    JoinShape shape;

    // Output keys: union, a's order first.
    std::vector<AttributeSchema> attrs;
    for (const auto& n : a.keyNames()) {
        attrs.push_back(a.at(n));
        if (b.hasKey(n)) {
            if (a.at(n).type != b.at(n).type)
                throw UsageError("common key " + n + " has different types in the two inputs");
            shape.sharedKeys.push_back(n);
        }
    }
    for (const auto& n : b.keyNames())
        if (!a.hasKey(n)) {
            attrs.push_back(b.at(n));
            shape.bOnlyKeys.push_back(n);
        }

    // Output values: intersection, each combined by its times function.
    for (const auto& n : a.valueNames())
        if (b.hasValue(n)) shape.values.push_back(n);
    if (shape.values.empty()) throw UsageError("join inputs share no value attributes");

    const std::vector<AttributeSchema> keyAttrs = attrs; // keys only, for type inference
    for (const auto& n : shape.values) {
        auto it = timesBy.find(n);
        if (it == timesBy.end())
            throw UsageError("no join combiner given for value attribute " + n);
        TimesFn fn = it->second.withAttr(n).withAnnihilators(a.at(n).dflt, b.at(n).dflt);
        // Output type: infer over a schema exposing keys, n (left), n' (right).
        ScalarType ty;
        ScalarValue dflt;
        if (fn.isBuiltin()) {
            ty = unifyTypes(a.at(n).type, b.at(n).type, n);
            dflt = fn.apply(a.at(n).dflt, b.at(n).dflt);
        } else {
            std::vector<AttributeSchema> env = keyAttrs;
            env.push_back(AttributeSchema::value(n, a.at(n).type, a.at(n).dflt));
            env.push_back(AttributeSchema::value(n + "'", b.at(n).type, b.at(n).dflt));
            ty = udf::inferExprType(*fn.expr(), TableSchema(env));
            try {
                dflt = fn.apply(a.at(n).dflt, b.at(n).dflt, nullptr);
            } catch (const UsageError&) {
                throw PropertyError("join combiner default for " + n +
                                    " depends on key attributes");
            }
        }
        dflt = udf::coerceTo(dflt, ty);
        attrs.push_back(AttributeSchema::value(n, ty, dflt));
        shape.combiners.emplace(n, std::move(fn));
    }
    shape.schema = TableSchema(attrs);
    return shape;
}

TableSchema extShape(const TableSchema& a, const udf::ExtFn& fn) {
    LARA_CHECK(fn.bound(), "extShape requires a bound tableau function");
    std::vector<AttributeSchema> attrs;
    for (const auto& n : a.keyNames()) attrs.push_back(a.at(n));
    for (std::size_t i = 0; i < fn.newKeyNames().size(); ++i)
        attrs.push_back(AttributeSchema::key(fn.newKeyNames()[i], fn.newKeyTypes()[i]));
    for (std::size_t i = 0; i < fn.valueNames().size(); ++i)
        attrs.push_back(AttributeSchema::value(fn.valueNames()[i], fn.valueTypes()[i],
                                               fn.outputDefaults()[i]));
    return TableSchema(attrs);
}

TableSchema renameShape(const TableSchema& a, const std::string& from, const std::string& to) {
    if (a.find(from) == nullptr) throw UsageError("rename: no attribute named " + from);
    if (a.find(to) != nullptr) throw UsageError("rename: attribute " + to + " already exists");
    std::vector<AttributeSchema> attrs = a.attrs();
    for (auto& at : attrs)
        if (at.name == from) at.name = to;
    return TableSchema(attrs);
}

} // namespace lara::core
