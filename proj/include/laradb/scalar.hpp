#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "laradb/common.hpp"

namespace lara::core {

enum class ScalarType : std::uint8_t {
    Null = 0, // the type of the bare null literal; unifies with any other type
    Int64,
    Float64,
    Bool,
    Utf8,
};

std::string typeName(ScalarType t);
ScalarType typeFromName(const std::string& name);

/// A single typed value. Null is a first-class value: it is what a table
/// returns outside its support when the default is null, and it absorbs
/// arithmetic (null + x = null).
class ScalarValue {
public:
    ScalarValue() : v_(std::monostate{}) {}

    static ScalarValue null() { return ScalarValue(); }
    static ScalarValue i64(std::int64_t x) { return ScalarValue(Payload(x)); }
    static ScalarValue f64(double x) { return ScalarValue(Payload(x)); }
    static ScalarValue boolean(bool x) { return ScalarValue(Payload(x)); }
    static ScalarValue utf8(std::string x) { return ScalarValue(Payload(std::move(x))); }

    bool isNull() const { return std::holds_alternative<std::monostate>(v_); }
    ScalarType type() const;

    std::int64_t asI64() const { return get<std::int64_t>("Int64"); }
    double asF64() const { return get<double>("Float64"); }
    bool asBool() const { return get<bool>("Bool"); }
    const std::string& asUtf8() const { return get<std::string>("Utf8"); }

    /// Numeric reading used by arithmetic: Int64 and Float64 both read as
    /// double; anything else is a usage error. Callers must handle null first.
    double numeric() const;

    /// Exact equality: null == null, otherwise same type and same payload.
    /// (Comparison *expressions* treat null differently; this is value identity.)
    bool operator==(const ScalarValue& o) const { return v_ == o.v_; }
    bool operator!=(const ScalarValue& o) const { return !(*this == o); }

    /// Three-way ordering within one type. Null sorts before everything (so
    /// containers can hold it), but ordering two values of different non-null
    /// types is a usage error: the schema should have prevented it.
    int compare(const ScalarValue& o) const;
    bool operator<(const ScalarValue& o) const { return compare(o) < 0; }

    /// Equality with absolute tolerance on Float64 payloads; exact elsewhere.
    bool almostEquals(const ScalarValue& o, double tol) const;

    std::uint64_t hash() const;

    /// Literal form: 42, 3.5, true, null, 'text' (quotes escaped by doubling).
    /// parseLiteral accepts exactly what toLiteral produces.
    std::string toLiteral() const;
    static ScalarValue parseLiteral(const std::string& text);

private:
    using Payload = std::variant<std::monostate, std::int64_t, double, bool, std::string>;
    explicit ScalarValue(Payload v) : v_(std::move(v)) {}

    template <typename T>
    const T& get(const char* what) const {
        if (auto* p = std::get_if<T>(&v_)) return *p;
        throw UsageError(std::string("scalar is not ") + what + ": " + toLiteral());
    }

    Payload v_;
};

} // namespace lara::core
