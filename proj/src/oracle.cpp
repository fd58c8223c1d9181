#include "laradb/oracle.hpp"

#include <algorithm>
#include <set>

#include "laradb/shape.hpp"

namespace lara::core {

using udf::PlusFn;
using udf::TimesFn;

AssociativeTable oracleUnion(const AssociativeTable& a, const AssociativeTable& b,
                             const std::map<std::string, PlusFn>& plusBy) {
    UnionShape shape = unionShape(a.schema(), b.schema(), plusBy);

    // Contributions in deterministic order: all of a's support (in key
    // order), then all of b's. Missing attributes contribute nothing, which
    // under the identity law equals contributing the default.
    AssociativeTable result(shape.schema);
    std::map<std::vector<ScalarValue>, std::vector<ScalarValue>, KeyLess> acc;
    auto fold = [&](const AssociativeTable& t) {
        const TableSchema& s = t.schema();
        for (const auto& row : t.rows()) {
            std::vector<ScalarValue> key;
            for (const auto& n : shape.keys) key.push_back(row.get(n));
            auto it = acc.find(key);
            if (it == acc.end())
                it = acc.emplace(std::move(key), shape.schema.defaultValues()).first;
            for (std::size_t i = 0; i < shape.values.size(); ++i) {
                if (!s.hasValue(shape.values[i])) continue;
                it->second[i] = shape.folds.at(shape.values[i])
                                    .apply(it->second[i], row.get(shape.values[i]));
            }
        }
    };
    fold(a);
    fold(b);
    for (auto& [k, v] : acc) result.put(k, std::move(v));
    return result;
}

AssociativeTable oracleAgg(const AssociativeTable& a, const std::vector<std::string>& keepKeys,
                           const std::map<std::string, PlusFn>& plusBy) {
    // Union against the empty table over the kept key space.
    AssociativeTable empty(aggKeySchema(a.schema(), keepKeys));
    return oracleUnion(a, empty, plusBy);
}

AssociativeTable oracleJoin(const AssociativeTable& a, const AssociativeTable& b,
                            const std::map<std::string, TimesFn>& timesBy) {
    const TableSchema& sa = a.schema();
    const TableSchema& sb = b.schema();
    JoinShape shape = joinShape(sa, sb, timesBy);
    const TableSchema& out = shape.schema;
    AssociativeTable result(out);

    // Index b's support by shared-key projection.
    std::map<std::vector<ScalarValue>, std::vector<TupleRow>, KeyLess> bBySharedKey;
    for (const auto& row : b.rows()) {
        std::vector<ScalarValue> k;
        for (const auto& n : shape.sharedKeys) k.push_back(row.get(n));
        bBySharedKey[std::move(k)].push_back(row);
    }

    auto outKeyNames = out.keyNames();
    std::set<std::vector<ScalarValue>, KeyLess> matchedBShared;
    auto annihilatorCheck = [&](const TupleRow& row, bool rowIsLeft) {
        // An unmatched row meets only defaults on the other side; if the
        // combiner does not send that to the combined default, the result
        // has unbounded support and cannot be produced.
        for (const auto& n : shape.values) {
            const TimesFn& fn = shape.combiners.at(n);
            ScalarValue got;
            try {
                got = rowIsLeft ? fn.apply(row.get(n), sb.at(n).dflt, nullptr)
                                : fn.apply(sa.at(n).dflt, row.get(n), nullptr);
            } catch (const UsageError&) {
                continue; // combiner reads keys of the absent side; cannot check
            }
            if (!(got == out.at(n).dflt))
                throw PropertyError(
                    "join combiner for " + n + " violates the annihilator law on row " +
                    row.toText() + ": got " + got.toLiteral() + ", the combined default is " +
                    out.at(n).dflt.toLiteral() + "; the result is not finitely representable");
        }
    };

    for (const auto& arow : a.rows()) {
        std::vector<ScalarValue> shared;
        for (const auto& n : shape.sharedKeys) shared.push_back(arow.get(n));
        auto it = bBySharedKey.find(shared);
        if (it == bBySharedKey.end()) {
            annihilatorCheck(arow, true);
            continue;
        }
        matchedBShared.insert(shared);
        for (const TupleRow& brow : it->second) {
            std::vector<ScalarValue> key;
            for (const auto& n : sa.keyNames()) key.push_back(arow.get(n));
            for (const auto& n : shape.bOnlyKeys) key.push_back(brow.get(n));
            TupleRow keyRow(TupleRow::shareNames(outKeyNames), key);
            std::vector<ScalarValue> vals;
            for (const auto& n : shape.values) {
                ScalarValue v = shape.combiners.at(n).apply(arow.get(n), brow.get(n), &keyRow);
                vals.push_back(udf::coerceTo(std::move(v), out.at(n).type));
            }
            result.put(std::move(key), std::move(vals));
        }
    }
    for (const auto& [k, rows] : bBySharedKey)
        if (!matchedBShared.count(k))
            for (const auto& brow : rows) annihilatorCheck(brow, false);
    return result;
}

AssociativeTable oracleExt(const AssociativeTable& a, udf::ExtFn fn) {
    if (!fn.bound()) fn.bind(a.schema());
    udf::VerifyReport rep = verifyExtProperties(fn, a.schema(), 64);
    rep.require();

    TableSchema out = extShape(a.schema(), fn);
    AssociativeTable result(out);

    std::set<std::vector<ScalarValue>, KeyLess> seen;
    for (const auto& row : a.rows()) {
        std::vector<ScalarValue> baseKey;
        for (const auto& n : a.schema().keyNames()) baseKey.push_back(row.get(n));
        for (auto& e : fn.applyToRow(row)) {
            std::vector<ScalarValue> key = baseKey;
            key.insert(key.end(), e.newKeys.begin(), e.newKeys.end());
            if (!seen.insert(key).second)
                throw UsageError("tableau emitted the same key twice for input row " +
                                 row.toText());
            result.put(std::move(key), std::move(e.values));
        }
    }
    return result;
}

AssociativeTable oracleMap(const AssociativeTable& a, udf::ExtFn fn) {
    LARA_CHECK(fn.isMap(), "oracleMap requires a map function (no new keys, one tableau row)");
    return oracleExt(a, std::move(fn));
}

AssociativeTable oracleRename(const AssociativeTable& a, const std::string& from,
                              const std::string& to) {
    AssociativeTable result{renameShape(a.schema(), from, to)};
    for (const auto& [k, v] : a.support()) result.put(k, v);
    return result;
}

} // namespace lara::core
