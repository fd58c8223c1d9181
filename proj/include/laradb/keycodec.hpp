#pragma once

#include <string>
#include <vector>

#include "laradb/table.hpp"

namespace lara::storage {

using core::AttrKind;
using core::ScalarType;
using core::ScalarValue;
using core::TableSchema;

/// Byte string whose unsigned lexicographic order equals the order of the
/// key tuple it encodes. Concatenation preserves this componentwise, so a
/// store sorted by encoded key is sorted by its access path.
using EncodedKey = std::string;

/// The key order a stored table (or a stream) is sorted by: a permutation of
/// the table's key attributes.
struct AccessPath {
    std::vector<std::string> attrs;

    AccessPath() = default;
    explicit AccessPath(std::vector<std::string> a) : attrs(std::move(a)) {}

    bool operator==(const AccessPath& o) const = default;
    bool empty() const { return attrs.empty(); }
    std::size_t size() const { return attrs.size(); }
    bool contains(const std::string& name) const;
    /// True when this path's attributes are a leading prefix of `o`'s.
    bool isPrefixOf(const AccessPath& o) const;
    std::string toText() const; // e.g. "[t, c]"
    static AccessPath parse(const std::string& text);
};

/// Encodes one key component. Null keys are not representable by design.
void encodeKeyComponent(const ScalarValue& v, EncodedKey& out);

/// Encodes a key tuple (componentwise, concatenated).
EncodedKey encodeKeyTuple(const std::vector<ScalarValue>& key);

/// Decodes `types.size()` components from `bytes` starting at `pos`,
/// advancing `pos` past them.
std::vector<ScalarValue> decodeKeyTuple(const std::string& bytes, std::size_t& pos,
                                        const std::vector<ScalarType>& types);
std::vector<ScalarValue> decodeKeyTuple(const std::string& bytes,
                                        const std::vector<ScalarType>& types);

/// Value tuples are not order-compared, so they use a tagged encoding that
/// can hold nulls. The packed variant drops the tags and writes raw 8-byte
/// numerics; it is only legal for all-numeric, non-nullable value schemas
/// (see valueSchemaIsPackable).
std::string encodeValueTuple(const std::vector<ScalarValue>& values, bool packed);
std::vector<ScalarValue> decodeValueTuple(const std::string& bytes,
                                          const std::vector<ScalarType>& types, bool packed);

bool valueSchemaIsPackable(const TableSchema& schema);

} // namespace lara::storage
