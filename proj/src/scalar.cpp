#include "laradb/scalar.hpp"

#include <charconv>
#include <cmath>
#include <cstring>

namespace lara::core {

std::string typeName(ScalarType t) {
    switch (t) {
        case ScalarType::Null: return "null";
        case ScalarType::Int64: return "int64";
        case ScalarType::Float64: return "float64";
        case ScalarType::Bool: return "bool";
        case ScalarType::Utf8: return "utf8";
    }
    throw UsageError("bad ScalarType");
}

ScalarType typeFromName(const std::string& name) {
    if (name == "null") return ScalarType::Null;
    if (name == "int64") return ScalarType::Int64;
    if (name == "float64") return ScalarType::Float64;
    if (name == "bool") return ScalarType::Bool;
    if (name == "utf8") return ScalarType::Utf8;
    throw UsageError("unknown scalar type name: " + name);
}

ScalarType ScalarValue::type() const {
    switch (v_.index()) {
        case 0: return ScalarType::Null;
        case 1: return ScalarType::Int64;
        case 2: return ScalarType::Float64;
        case 3: return ScalarType::Bool;
        case 4: return ScalarType::Utf8;
    }
    throw UsageError("bad variant state");
}

double ScalarValue::numeric() const {
    if (auto* i = std::get_if<std::int64_t>(&v_)) return static_cast<double>(*i);
    if (auto* d = std::get_if<double>(&v_)) return *d;
    throw UsageError("scalar is not numeric: " + toLiteral());
}

int ScalarValue::compare(const ScalarValue& o) const {
    const bool ln = isNull(), rn = o.isNull();
    if (ln && rn) return 0;
    if (ln || rn) return ln ? -1 : 1;
    if (type() != o.type()) {
        // The two numeric types order by value; everything else is apples
        // and oranges.
        const bool numa = type() == ScalarType::Int64 || type() == ScalarType::Float64;
        const bool numb = o.type() == ScalarType::Int64 || o.type() == ScalarType::Float64;
        if (!numa || !numb)
            throw UsageError("cannot order " + typeName(type()) + " against " +
                             typeName(o.type()));
        double a = numeric(), b = o.numeric();
        return a < b ? -1 : (b < a ? 1 : 0);
    }
    if (v_ < o.v_) return -1;
    if (o.v_ < v_) return 1;
    return 0;
}

bool ScalarValue::almostEquals(const ScalarValue& o, double tol) const {
    if (type() == ScalarType::Float64 && o.type() == ScalarType::Float64)
        return std::fabs(asF64() - o.asF64()) <= tol;
    return *this == o;
}

std::uint64_t ScalarValue::hash() const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(v_.index()));
    switch (v_.index()) {
        case 0: break;
        case 1: h = hashCombine(h, static_cast<std::uint64_t>(std::get<std::int64_t>(v_))); break;
        case 2: {
            double d = std::get<double>(v_);
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(d));
            std::memcpy(&bits, &d, sizeof(bits));
            h = hashCombine(h, bits);
            break;
        }
        case 3: h = hashCombine(h, std::get<bool>(v_) ? 1 : 0); break;
        case 4:
            for (unsigned char c : std::get<std::string>(v_)) h = hashCombine(h, c);
            h = hashCombine(h, 0x5f);
            break;
    }
    return h;
}

std::string ScalarValue::toLiteral() const {
    switch (v_.index()) {
        case 0: return "null";
        case 1: return std::to_string(std::get<std::int64_t>(v_));
        case 2: {
            // Shortest round-trip form; force a mark so it re-parses as a float.
            char buf[64];
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, std::get<double>(v_));
            LARA_CHECK(ec == std::errc(), "float formatting");
            std::string s(buf, end);
            if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
            return s;
        }
        case 3: return std::get<bool>(v_) ? "true" : "false";
        case 4: {
            std::string out = "'";
            for (char c : std::get<std::string>(v_)) {
                out += c;
                if (c == '\'') out += '\'';
            }
            out += '\'';
            return out;
        }
    }
    throw UsageError("bad variant state");
}

ScalarValue ScalarValue::parseLiteral(const std::string& text) {
    if (text == "null") return null();
    if (text == "true") return boolean(true);
    if (text == "false") return boolean(false);
    if (text.size() >= 2 && text.front() == '\'' && text.back() == '\'') {
        std::string out;
        for (std::size_t i = 1; i + 1 < text.size(); ++i) {
            if (text[i] == '\'') {
                if (i + 2 >= text.size() || text[i + 1] != '\'')
                    throw UsageError("bad quote escape in literal: " + text);
                ++i;
            }
            out += text[i];
        }
        return utf8(std::move(out));
    }
    if (text.find_first_of(".eEn") != std::string::npos) {
        std::size_t pos = 0;
        double d = std::stod(text, &pos);
        if (pos != text.size()) throw UsageError("bad float literal: " + text);
        return f64(d);
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
    if (ec != std::errc() || p != text.data() + text.size())
        throw UsageError("bad literal: " + text);
    return i64(i);
}

} // namespace lara::core
