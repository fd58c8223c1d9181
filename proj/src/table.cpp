#include "laradb/table.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace lara::core {

AttributeSchema AttributeSchema::key(std::string name, ScalarType type) {
    if (type == ScalarType::Null) throw UsageError("key attribute may not be null-typed: " + name);
    AttributeSchema a;
    a.name = std::move(name);
    a.kind = AttrKind::Key;
    a.type = type;
    return a;
}

AttributeSchema AttributeSchema::value(std::string name, ScalarType type, ScalarValue dflt) {
    if (!dflt.isNull() && dflt.type() != type)
        throw UsageError("default for " + name + " has type " + typeName(dflt.type()) +
                         ", expected " + typeName(type));
    AttributeSchema a;
    a.name = std::move(name);
    a.kind = AttrKind::Value;
    a.type = type;
    a.dflt = std::move(dflt);
    return a;
}

TableSchema::TableSchema(std::vector<AttributeSchema> attrs) {
    // Normalize to keys-first order, preserving relative order within each group.
    std::vector<AttributeSchema> keys, vals;
    std::set<std::string> seen;
    for (auto& a : attrs) {
        if (!seen.insert(a.name).second)
            throw UsageError("duplicate attribute name in schema: " + a.name);
        (a.kind == AttrKind::Key ? keys : vals).push_back(std::move(a));
    }
    nKeys_ = keys.size();
    attrs_ = std::move(keys);
    attrs_.insert(attrs_.end(), std::make_move_iterator(vals.begin()),
                  std::make_move_iterator(vals.end()));
}

std::vector<std::string> TableSchema::keyNames() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < nKeys_; ++i) out.push_back(attrs_[i].name);
    return out;
}

std::vector<std::string> TableSchema::valueNames() const {
    std::vector<std::string> out;
    for (std::size_t i = nKeys_; i < attrs_.size(); ++i) out.push_back(attrs_[i].name);
    return out;
}

const AttributeSchema* TableSchema::find(const std::string& name) const {
    for (const auto& a : attrs_)
        if (a.name == name) return &a;
    return nullptr;
}

const AttributeSchema& TableSchema::at(const std::string& name) const {
    if (const auto* a = find(name)) return *a;
    throw UsageError("no attribute named " + name + " in schema " + describe());
}

bool TableSchema::hasKey(const std::string& name) const {
    const auto* a = find(name);
    return a && a->kind == AttrKind::Key;
}

bool TableSchema::hasValue(const std::string& name) const {
    const auto* a = find(name);
    return a && a->kind == AttrKind::Value;
}

std::vector<ScalarValue> TableSchema::defaultValues() const {
    std::vector<ScalarValue> out;
    for (std::size_t i = nKeys_; i < attrs_.size(); ++i) out.push_back(attrs_[i].dflt);
    return out;
}

std::string TableSchema::describe() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < attrs_.size(); ++i) {
        if (i) os << ", ";
        if (i == nKeys_) os << "-> ";
        os << attrs_[i].name << ":" << typeName(attrs_[i].type);
        if (attrs_[i].kind == AttrKind::Value) os << "=" << attrs_[i].dflt.toLiteral();
    }
    os << ")";
    return os.str();
}

TupleRow::TupleRow(Names names, std::vector<ScalarValue> values)
    : names_(std::move(names)), values_(std::move(values)) {
    LARA_CHECK(names_ && names_->size() == values_.size(), "row name/value arity mismatch");
}

TupleRow::Names TupleRow::shareNames(std::vector<std::string> names) {
    return std::make_shared<const std::vector<std::string>>(std::move(names));
}

TupleRow TupleRow::make(std::vector<std::pair<std::string, ScalarValue>> cols) {
    std::vector<std::string> names;
    std::vector<ScalarValue> values;
    for (auto& [n, v] : cols) {
        names.push_back(std::move(n));
        values.push_back(std::move(v));
    }
    return TupleRow(shareNames(std::move(names)), std::move(values));
}

const std::vector<std::string>& TupleRow::names() const {
    static const std::vector<std::string> kEmpty;
    return names_ ? *names_ : kEmpty;
}

const ScalarValue* TupleRow::tryGet(const std::string& name) const {
    const auto& ns = names();
    for (std::size_t i = 0; i < ns.size(); ++i)
        if (ns[i] == name) return &values_[i];
    return nullptr;
}

const ScalarValue& TupleRow::get(const std::string& name) const {
    if (const auto* v = tryGet(name)) return *v;
    throw UsageError("row has no attribute " + name + ": " + toText());
}

TupleRow TupleRow::concat(const TupleRow& other) const {
    std::vector<std::string> names = this->names();
    for (const auto& n : other.names()) {
        if (std::find(names.begin(), names.end(), n) != names.end())
            throw UsageError("concat would duplicate attribute " + n);
        names.push_back(n);
    }
    std::vector<ScalarValue> values = values_;
    values.insert(values.end(), other.values_.begin(), other.values_.end());
    return TupleRow(shareNames(std::move(names)), std::move(values));
}

TupleRow TupleRow::project(const std::vector<std::string>& keep) const {
    std::vector<ScalarValue> values;
    for (const auto& n : keep) values.push_back(get(n));
    return TupleRow(shareNames(keep), std::move(values));
}

bool TupleRow::operator==(const TupleRow& o) const {
    return names() == o.names() && values_ == o.values_;
}

std::string TupleRow::toText() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (i) os << ", ";
        os << nameAt(i) << ": " << values_[i].toLiteral();
    }
    os << ")";
    return os.str();
}

bool KeyLess::operator()(const std::vector<ScalarValue>& a,
                         const std::vector<ScalarValue>& b) const {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        int c = a[i].compare(b[i]);
        if (c != 0) return c < 0;
    }
    return a.size() < b.size();
}

void AssociativeTable::checkKey(const std::vector<ScalarValue>& key) const {
    if (key.size() != schema_.keyCount())
        throw UsageError("key arity " + std::to_string(key.size()) + " does not match schema " +
                         schema_.describe());
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (key[i].isNull()) throw UsageError("null key component " + schema_.attrs()[i].name);
        if (key[i].type() != schema_.attrs()[i].type)
            throw UsageError("key component " + schema_.attrs()[i].name + " has type " +
                             typeName(key[i].type()) + ", expected " +
                             typeName(schema_.attrs()[i].type));
    }
}

void AssociativeTable::put(std::vector<ScalarValue> key, std::vector<ScalarValue> values) {
    checkKey(key);
    if (values.size() != schema_.valueCount())
        throw UsageError("value arity does not match schema " + schema_.describe());
    const auto& attrs = schema_.attrs();
    bool allDefault = true;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& a = attrs[schema_.keyCount() + i];
        if (!values[i].isNull() && values[i].type() != a.type)
            throw UsageError("value " + a.name + " has type " + typeName(values[i].type()) +
                             ", expected " + typeName(a.type));
        // Nullability discipline: an attribute is nullable exactly when its
        // default is null. It is what lets law verification sample the true
        // value domain of each attribute.
        if (values[i].isNull() && !a.dflt.isNull())
            throw UsageError("null value for non-nullable attribute " + a.name +
                             " (default is " + a.dflt.toLiteral() + ")");
        if (values[i] != a.dflt) allDefault = false;
    }
    if (allDefault)
        support_.erase(key);
    else
        support_[std::move(key)] = std::move(values);
}

std::vector<ScalarValue> AssociativeTable::lookupValues(const std::vector<ScalarValue>& key) const {
    checkKey(key);
    auto it = support_.find(key);
    if (it == support_.end()) return schema_.defaultValues();
    return it->second;
}

TupleRow AssociativeTable::lookup(const TupleRow& key) const {
    const auto keyNames = schema_.keyNames();
    if (key.size() != keyNames.size())
        throw UsageError("lookup key " + key.toText() + " does not match key schema of " +
                         schema_.describe());
    std::vector<ScalarValue> kv;
    for (const auto& n : keyNames) kv.push_back(key.get(n));
    auto values = lookupValues(kv);
    return TupleRow(TupleRow::shareNames(schema_.valueNames()), std::move(values));
}

TupleRow::Names AssociativeTable::rowNames() const {
    std::vector<std::string> names = schema_.keyNames();
    for (auto& v : schema_.valueNames()) names.push_back(std::move(v));
    return TupleRow::shareNames(std::move(names));
}

std::vector<TupleRow> AssociativeTable::rows() const {
    auto names = rowNames();
    std::vector<TupleRow> out;
    out.reserve(support_.size());
    for (const auto& [k, v] : support_) {
        std::vector<ScalarValue> vals = k;
        vals.insert(vals.end(), v.begin(), v.end());
        out.emplace_back(names, std::move(vals));
    }
    return out;
}

std::string AssociativeTable::toText() const {
    std::ostringstream os;
    os << schema_.describe() << " support=" << support_.size() << "\n";
    for (const auto& row : rows()) os << "  " << row.toText() << "\n";
    return os.str();
}

AssociativeTable fromRows(const TableSchema& schema, const std::vector<TupleRow>& rows) {
    AssociativeTable t(schema);
    const auto keyNames = schema.keyNames();
    const auto valNames = schema.valueNames();
    std::set<std::vector<ScalarValue>, KeyLess> seen;
    for (const auto& row : rows) {
        std::vector<ScalarValue> key, vals;
        for (const auto& n : keyNames) key.push_back(row.get(n));
        for (const auto& n : valNames) vals.push_back(row.get(n));
        if (!seen.insert(key).second) {
            std::string keyText = "(";
            for (std::size_t i = 0; i < key.size(); ++i)
                keyText += (i ? ", " : "") + key[i].toLiteral();
            keyText += ")";
            throw UsageError("duplicate key " + keyText + " in fromRows");
        }
        t.put(std::move(key), std::move(vals)); // type checks happen here
    }
    return t;
}

bool canonicallyEqual(const AssociativeTable& a, const AssociativeTable& b, double tol,
                      std::string* whyNot) {
    auto fail = [&](const std::string& why) {
        if (whyNot) *whyNot = why;
        return false;
    };

    // Compare schemas by attribute name, ignoring declaration order.
    auto names = [](const TableSchema& s, AttrKind k) {
        std::set<std::string> out;
        for (const auto& at : s.attrs())
            if (at.kind == k) out.insert(at.name);
        return out;
    };
    if (names(a.schema(), AttrKind::Key) != names(b.schema(), AttrKind::Key))
        return fail("key attribute sets differ: " + a.schema().describe() + " vs " +
                    b.schema().describe());
    if (names(a.schema(), AttrKind::Value) != names(b.schema(), AttrKind::Value))
        return fail("value attribute sets differ: " + a.schema().describe() + " vs " +
                    b.schema().describe());
    for (const auto& at : a.schema().attrs()) {
        const auto& bt = b.schema().at(at.name);
        if (at.type != bt.type && at.type != ScalarType::Null && bt.type != ScalarType::Null)
            return fail("attribute " + at.name + " type differs");
        if (at.kind == AttrKind::Value && !at.dflt.almostEquals(bt.dflt, tol))
            return fail("attribute " + at.name + " default differs: " + at.dflt.toLiteral() +
                        " vs " + bt.dflt.toLiteral());
    }

    if (a.supportSize() != b.supportSize())
        return fail("support sizes differ: " + std::to_string(a.supportSize()) + " vs " +
                    std::to_string(b.supportSize()) + "\n" + a.toText() + b.toText());

    // Re-key b's support under a's key order, then walk a's support.
    const auto aKeyNames = a.schema().keyNames();
    const auto aValNames = a.schema().valueNames();
    std::map<std::vector<ScalarValue>, std::vector<ScalarValue>, KeyLess> bByAKey;
    for (const auto& row : b.rows()) {
        std::vector<ScalarValue> k, v;
        for (const auto& n : aKeyNames) k.push_back(row.get(n));
        for (const auto& n : aValNames) v.push_back(row.get(n));
        bByAKey[std::move(k)] = std::move(v);
    }
    for (const auto& [k, va] : a.support()) {
        auto it = bByAKey.find(k);
        if (it == bByAKey.end()) {
            std::string keyText;
            for (const auto& kv : k) keyText += kv.toLiteral() + " ";
            return fail("key present only on left: " + keyText);
        }
        for (std::size_t i = 0; i < va.size(); ++i) {
            if (!va[i].almostEquals(it->second[i], tol)) {
                std::string keyText;
                for (const auto& kv : k) keyText += kv.toLiteral() + " ";
                return fail("value " + aValNames[i] + " differs at key " + keyText + ": " +
                            va[i].toLiteral() + " vs " + it->second[i].toLiteral());
            }
        }
    }
    if (whyNot) whyNot->clear();
    return true;
}

} // namespace lara::core
