#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "laradb/scalar.hpp"

namespace lara::core {

enum class AttrKind : std::uint8_t { Key, Value };

/// One column of a table: name, key/value role, type, and (for value
/// attributes) the default returned outside the support.
struct AttributeSchema {
    std::string name;
    AttrKind kind = AttrKind::Value;
    ScalarType type = ScalarType::Null;
    ScalarValue dflt; // meaningful for Value attributes only

    static AttributeSchema key(std::string name, ScalarType type);
    static AttributeSchema value(std::string name, ScalarType type, ScalarValue dflt);

    bool operator==(const AttributeSchema& o) const {
        return name == o.name && kind == o.kind && type == o.type && dflt == o.dflt;
    }
};

/// Full table schema: key attributes (in declaration order) then value
/// attributes. Names are unique across the whole schema; key attributes are
/// never Null-typed and carry no default.
class TableSchema {
public:
    TableSchema() = default;
    explicit TableSchema(std::vector<AttributeSchema> attrs);

    const std::vector<AttributeSchema>& attrs() const { return attrs_; }
    std::vector<std::string> keyNames() const;
    std::vector<std::string> valueNames() const;
    std::size_t keyCount() const { return nKeys_; }
    std::size_t valueCount() const { return attrs_.size() - nKeys_; }

    const AttributeSchema* find(const std::string& name) const;
    const AttributeSchema& at(const std::string& name) const;
    bool hasKey(const std::string& name) const;
    bool hasValue(const std::string& name) const;

    /// Value tuple holding every value attribute's default, in schema order.
    std::vector<ScalarValue> defaultValues() const;

    bool operator==(const TableSchema& o) const { return attrs_ == o.attrs_; }

    std::string describe() const;

private:
    std::vector<AttributeSchema> attrs_; // keys first, then values
    std::size_t nKeys_ = 0;
};

/// An ordered list of (name, value) pairs. Rows flowing through the engine
/// share their name list, so copying a row copies only the values.
class TupleRow {
public:
    using Names = std::shared_ptr<const std::vector<std::string>>;

    TupleRow() = default;
    TupleRow(Names names, std::vector<ScalarValue> values);

    /// Convenience constructor for tests and small inputs.
    static TupleRow make(std::vector<std::pair<std::string, ScalarValue>> cols);
    static Names shareNames(std::vector<std::string> names);

    std::size_t size() const { return values_.size(); }
    const std::vector<std::string>& names() const;
    const Names& sharedNames() const { return names_; }
    const std::vector<ScalarValue>& values() const { return values_; }
    const std::string& nameAt(std::size_t i) const { return names()[i]; }
    const ScalarValue& valueAt(std::size_t i) const { return values_[i]; }

    const ScalarValue* tryGet(const std::string& name) const;
    const ScalarValue& get(const std::string& name) const;

    /// Concatenation of two rows with disjoint names.
    TupleRow concat(const TupleRow& other) const;
    /// Projection onto the given names, in the given order.
    TupleRow project(const std::vector<std::string>& keep) const;

    bool operator==(const TupleRow& o) const;
    std::string toText() const;

private:
    Names names_;
    std::vector<ScalarValue> values_;
};

/// Comparator for key tuples in schema key order (within-type comparisons
/// only; the schema guarantees positional type agreement).
struct KeyLess {
    bool operator()(const std::vector<ScalarValue>& a, const std::vector<ScalarValue>& b) const;
};

/// A total map from key tuples to value tuples with finite support.
/// Lookups outside the support return the schema defaults. The support is
/// canonical: it never stores a value tuple equal to the defaults in every
/// attribute.
class AssociativeTable {
public:
    AssociativeTable() = default;
    explicit AssociativeTable(TableSchema schema) : schema_(std::move(schema)) {}

    const TableSchema& schema() const { return schema_; }
    std::size_t supportSize() const { return support_.size(); }
    const std::map<std::vector<ScalarValue>, std::vector<ScalarValue>, KeyLess>& support() const {
        return support_;
    }

    /// Inserts or replaces the entry for `key` (values in schema order).
    /// All-default value tuples are dropped (and an existing entry erased),
    /// keeping the table canonical.
    void put(std::vector<ScalarValue> key, std::vector<ScalarValue> values);

    /// Total-function read: defaults outside the support.
    TupleRow lookup(const TupleRow& key) const;
    std::vector<ScalarValue> lookupValues(const std::vector<ScalarValue>& key) const;

    /// Support contents as full rows (keys then values), in key order.
    std::vector<TupleRow> rows() const;
    TupleRow::Names rowNames() const;

    bool operator==(const AssociativeTable& o) const {
        return schema_ == o.schema_ && support_ == o.support_;
    }

    std::string toText() const;

private:
    void checkKey(const std::vector<ScalarValue>& key) const;

    TableSchema schema_;
    std::map<std::vector<ScalarValue>, std::vector<ScalarValue>, KeyLess> support_;
};

/// Builds a table from full rows (key and value attributes in any order,
/// matched by name). Rows whose values all equal the defaults are dropped;
/// duplicate keys are an error naming the offending key.
AssociativeTable fromRows(const TableSchema& schema, const std::vector<TupleRow>& rows);

/// Name-insensitive-to-order equality with float tolerance: schemas must have
/// the same attributes (kind/type/default per name, key sets equal) and the
/// supports must match under the name correspondence.
bool canonicallyEqual(const AssociativeTable& a, const AssociativeTable& b, double tol = 0.0,
                      std::string* whyNot = nullptr);

} // namespace lara::core
