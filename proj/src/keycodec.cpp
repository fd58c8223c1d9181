#include "laradb/keycodec.hpp"

#include <cctype>
#include <cstring>

namespace lara::storage {

namespace {

void putU64BE(std::uint64_t v, std::string& out) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::uint64_t getU64BE(const std::string& bytes, std::size_t pos) {
    if (pos + 8 > bytes.size()) throw IoError("truncated key component");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v = (v << 8) | static_cast<unsigned char>(bytes[pos + i]);
    return v;
}

} // namespace

bool AccessPath::contains(const std::string& name) const {
    for (const auto& a : attrs)
        if (a == name) return true;
    return false;
}

bool AccessPath::isPrefixOf(const AccessPath& o) const {
    if (attrs.size() > o.attrs.size()) return false;
    for (std::size_t i = 0; i < attrs.size(); ++i)
        if (attrs[i] != o.attrs[i]) return false;
    return true;
}

std::string AccessPath::toText() const {
    std::string out = "[";
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (i) out += ", ";
        out += attrs[i];
    }
    return out + "]";
}

AccessPath AccessPath::parse(const std::string& text) {
    std::string t = text;
    if (t.size() < 2 || t.front() != '[' || t.back() != ']')
        throw ParseError("expected access path [a, b, ...], got: " + text);
    AccessPath p;
    std::string cur;
    for (char c : t.substr(1, t.size() - 2)) {
        if (c == ',') {
            if (!cur.empty()) p.attrs.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) p.attrs.push_back(cur);
    return p;
}

void encodeKeyComponent(const ScalarValue& v, EncodedKey& out) {
    switch (v.type()) {
        case ScalarType::Null:
            throw UsageError("null key component cannot be encoded");
        case ScalarType::Int64: {
            // Flip the sign bit: two's complement then orders as unsigned.
            std::uint64_t u = static_cast<std::uint64_t>(v.asI64()) ^ (1ull << 63);
            putU64BE(u, out);
            return;
        }
        case ScalarType::Float64: {
            // Standard IEEE total-order trick: positive floats get the sign
            // bit set, negative floats are bitwise complemented.
            double d = v.asF64();
            std::uint64_t bits;
            std::memcpy(&bits, &d, sizeof(bits));
            bits = (bits & (1ull << 63)) ? ~bits : (bits | (1ull << 63));
            putU64BE(bits, out);
            return;
        }
        case ScalarType::Bool:
            out.push_back(v.asBool() ? '\x01' : '\x00');
            return;
        case ScalarType::Utf8: {
            // 0x00 escapes to 0x00 0xff; 0x00 0x00 terminates. Prefixes sort
            // before their extensions and embedded zeros stay ordered.
            for (unsigned char c : v.asUtf8()) {
                out.push_back(static_cast<char>(c));
                if (c == 0x00) out.push_back('\xff');
            }
            out.push_back('\x00');
            out.push_back('\x00');
            return;
        }
    }
    throw Error("encodeKeyComponent: bad type");
}

EncodedKey encodeKeyTuple(const std::vector<ScalarValue>& key) {
    EncodedKey out;
    out.reserve(key.size() * 9);
    for (const auto& v : key) encodeKeyComponent(v, out);
    return out;
}

std::vector<ScalarValue> decodeKeyTuple(const std::string& bytes, std::size_t& pos,
                                        const std::vector<ScalarType>& types) {
    std::vector<ScalarValue> out;
    out.reserve(types.size());
    for (ScalarType t : types) {
        switch (t) {
            case ScalarType::Int64: {
                std::uint64_t u = getU64BE(bytes, pos) ^ (1ull << 63);
                pos += 8;
                out.push_back(ScalarValue::i64(static_cast<std::int64_t>(u)));
                break;
            }
            case ScalarType::Float64: {
                std::uint64_t bits = getU64BE(bytes, pos);
                pos += 8;
                bits = (bits & (1ull << 63)) ? (bits & ~(1ull << 63)) : ~bits;
                double d;
                std::memcpy(&d, &bits, sizeof(d));
                out.push_back(ScalarValue::f64(d));
                break;
            }
            case ScalarType::Bool: {
                if (pos >= bytes.size()) throw IoError("truncated key component");
                out.push_back(ScalarValue::boolean(bytes[pos] != 0));
                ++pos;
                break;
            }
            case ScalarType::Utf8: {
                std::string s;
                while (true) {
                    if (pos >= bytes.size()) throw IoError("unterminated string key");
                    unsigned char c = static_cast<unsigned char>(bytes[pos++]);
                    if (c != 0x00) {
                        s.push_back(static_cast<char>(c));
                        continue;
                    }
                    if (pos >= bytes.size()) throw IoError("unterminated string key");
                    unsigned char esc = static_cast<unsigned char>(bytes[pos++]);
                    if (esc == 0x00) break;      // terminator
                    if (esc == 0xff) {
                        s.push_back('\x00');     // escaped zero byte
                        continue;
                    }
                    throw IoError("corrupt string key escape");
                }
                out.push_back(ScalarValue::utf8(std::move(s)));
                break;
            }
            case ScalarType::Null:
                throw UsageError("key schema may not contain null-typed attributes");
        }
    }
    return out;
}

std::vector<ScalarValue> decodeKeyTuple(const std::string& bytes,
                                        const std::vector<ScalarType>& types) {
    std::size_t pos = 0;
    auto out = decodeKeyTuple(bytes, pos, types);
    if (pos != bytes.size()) throw IoError("trailing bytes after key tuple");
    return out;
}

// ---------------------------------------------------------------------------
// Value tuples

namespace {

constexpr char kTagNull = 0;
constexpr char kTagI64 = 1;
constexpr char kTagF64 = 2;
constexpr char kTagBool = 3;
constexpr char kTagUtf8 = 4;

void putU64LE(std::uint64_t v, std::string& out) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t getU64LE(const std::string& bytes, std::size_t& pos) {
    if (pos + 8 > bytes.size()) throw IoError("truncated value component");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

void putU32LE(std::uint32_t v, std::string& out) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t getU32LE(const std::string& bytes, std::size_t& pos) {
    if (pos + 4 > bytes.size()) throw IoError("truncated value component");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

} // namespace

std::string encodeValueTuple(const std::vector<ScalarValue>& values, bool packed) {
    std::string out;
    for (const auto& v : values) {
        if (packed) {
            // Raw 8-byte numerics, no tags: the schema carries the types.
            if (v.isNull()) throw UsageError("packed value encoding cannot hold null");
            if (v.type() == ScalarType::Int64) {
                putU64LE(static_cast<std::uint64_t>(v.asI64()), out);
            } else if (v.type() == ScalarType::Float64) {
                std::uint64_t bits;
                double d = v.asF64();
                std::memcpy(&bits, &d, sizeof(bits));
                putU64LE(bits, out);
            } else {
                throw UsageError("packed value encoding holds only numerics");
            }
            continue;
        }
        if (v.isNull()) {
            out.push_back(kTagNull);
        } else {
            switch (v.type()) {
                case ScalarType::Int64:
                    out.push_back(kTagI64);
                    putU64LE(static_cast<std::uint64_t>(v.asI64()), out);
                    break;
                case ScalarType::Float64: {
                    out.push_back(kTagF64);
                    std::uint64_t bits;
                    double d = v.asF64();
                    std::memcpy(&bits, &d, sizeof(bits));
                    putU64LE(bits, out);
                    break;
                }
                case ScalarType::Bool:
                    out.push_back(kTagBool);
                    out.push_back(v.asBool() ? '\x01' : '\x00');
                    break;
                case ScalarType::Utf8: {
                    out.push_back(kTagUtf8);
                    const std::string& s = v.asUtf8();
                    putU32LE(static_cast<std::uint32_t>(s.size()), out);
                    out += s;
                    break;
                }
                case ScalarType::Null:
                    out.push_back(kTagNull);
                    break;
            }
        }
    }
    return out;
}

std::vector<ScalarValue> decodeValueTuple(const std::string& bytes,
                                          const std::vector<ScalarType>& types, bool packed) {
    std::vector<ScalarValue> out;
    out.reserve(types.size());
    std::size_t pos = 0;
    for (ScalarType t : types) {
        if (packed) {
            std::uint64_t u = getU64LE(bytes, pos);
            if (t == ScalarType::Int64) {
                out.push_back(ScalarValue::i64(static_cast<std::int64_t>(u)));
            } else if (t == ScalarType::Float64) {
                double d;
                std::memcpy(&d, &u, sizeof(d));
                out.push_back(ScalarValue::f64(d));
            } else {
                throw IoError("packed value with non-numeric schema type");
            }
            continue;
        }
        if (pos >= bytes.size()) throw IoError("truncated value tuple");
        char tag = bytes[pos++];
        switch (tag) {
            case kTagNull:
                out.push_back(ScalarValue::null());
                break;
            case kTagI64:
                out.push_back(ScalarValue::i64(static_cast<std::int64_t>(getU64LE(bytes, pos))));
                break;
            case kTagF64: {
                std::uint64_t u = getU64LE(bytes, pos);
                double d;
                std::memcpy(&d, &u, sizeof(d));
                out.push_back(ScalarValue::f64(d));
                break;
            }
            case kTagBool:
                if (pos >= bytes.size()) throw IoError("truncated value tuple");
                out.push_back(ScalarValue::boolean(bytes[pos++] != 0));
                break;
            case kTagUtf8: {
                std::uint32_t len = getU32LE(bytes, pos);
                if (pos + len > bytes.size()) throw IoError("truncated string value");
                out.push_back(ScalarValue::utf8(bytes.substr(pos, len)));
                pos += len;
                break;
            }
            default:
                throw IoError("corrupt value tag");
        }
    }
    if (pos != bytes.size()) throw IoError("trailing bytes after value tuple");
    return out;
}

bool valueSchemaIsPackable(const TableSchema& schema) {
    bool any = false;
    for (const auto& a : schema.attrs()) {
        if (a.kind != AttrKind::Value) continue;
        any = true;
        if (a.type != ScalarType::Int64 && a.type != ScalarType::Float64) return false;
        if (a.dflt.isNull()) return false; // nullable values cannot drop tags
    }
    return any;
}

} // namespace lara::storage
