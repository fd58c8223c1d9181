#include "laradb/udf.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace lara::udf {

namespace {

std::string trimCopy(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool iequals(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

std::string describePair(const ScalarValue& a, const ScalarValue& b, const ScalarValue& got,
                         const ScalarValue& want) {
    std::ostringstream os;
    os << "a=" << a.toLiteral() << " b=" << b.toLiteral() << " got=" << got.toLiteral()
       << " want=" << want.toLiteral();
    return os.str();
}

} // namespace

std::int64_t randInt(Rng& rng, std::int64_t lo, std::int64_t hi) {
    LARA_CHECK(lo <= hi, "randInt: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(rng() % span);
}

ScalarValue sampleValue(Rng& rng, ScalarType type, bool allowNull) {
    if (allowNull && rng() % 8 == 0) return ScalarValue::null();
    switch (type) {
        case ScalarType::Null:
            return ScalarValue::null();
        case ScalarType::Int64:
            return ScalarValue::i64(randInt(rng, -8, 8));
        case ScalarType::Float64:
            // Dyadic rationals with small magnitude: +, -, * on samples are
            // exact in IEEE double, so law checks can use exact equality.
            return ScalarValue::f64(static_cast<double>(randInt(rng, -512, 512)) / 16.0);
        case ScalarType::Bool:
            return ScalarValue::boolean(rng() % 2 == 0);
        case ScalarType::Utf8: {
            static const char alphabet[] = "abcde";
            std::string s;
            std::int64_t len = randInt(rng, 0, 3);
            for (std::int64_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % 5]);
            return ScalarValue::utf8(std::move(s));
        }
    }
    throw Error("sampleValue: bad type");
}

ScalarValue coerceTo(ScalarValue v, ScalarType want) {
    if (v.isNull()) return v;
    if (v.type() == want) return v;
    if (want == ScalarType::Float64 && v.type() == ScalarType::Int64)
        return ScalarValue::f64(static_cast<double>(v.asI64()));
    throw UsageError("cannot coerce " + v.toLiteral() + " to " + core::typeName(want));
}

// ---------------------------------------------------------------------------
// VerifyReport

bool VerifyReport::allPassed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

const LawCheck* VerifyReport::failing() const {
    for (const auto& c : checks)
        if (!c.passed) return &c;
    return nullptr;
}

std::string VerifyReport::toText() const {
    std::ostringstream os;
    os << subject << ": " << (allPassed() ? "ok" : "FAILED") << "\n";
    for (const auto& c : checks) {
        os << "  " << (c.passed ? "pass" : "FAIL") << "  " << c.law;
        if (!c.passed) os << "  [" << c.counterexample << "]";
        os << "\n";
    }
    return os.str();
}

void VerifyReport::require() const {
    if (const LawCheck* f = failing())
        throw PropertyError(subject + ": law '" + f->law + "' violated: " + f->counterexample);
}

// ---------------------------------------------------------------------------
// PlusFn

PlusFn PlusFn::builtin(const std::string& name) {
    PlusFn fn;
    fn.name_ = name;
    if (iequals(name, "sum")) {
        fn.builtin_ = Builtin::Sum;
        fn.associative_ = fn.commutative_ = true;
    } else if (iequals(name, "any")) {
        fn.builtin_ = Builtin::Any;
        fn.associative_ = fn.idempotent_ = true;
    } else if (iequals(name, "max")) {
        fn.builtin_ = Builtin::Max;
        fn.associative_ = fn.commutative_ = fn.idempotent_ = true;
    } else if (iequals(name, "or")) {
        fn.builtin_ = Builtin::Or;
        fn.associative_ = fn.commutative_ = fn.idempotent_ = true;
    } else {
        throw UsageError("unknown aggregate function: " + name);
    }
    return fn;
}

PlusFn PlusFn::fromExpr(std::string attr, ExprPtr expr, bool associative, bool commutative,
                        bool idempotent) {
    LARA_CHECK(expr != nullptr, "PlusFn::fromExpr: null expression");
    PlusFn fn;
    fn.name_ = "expr{" + expr->print() + "}";
    fn.attr_ = std::move(attr);
    fn.expr_ = std::move(expr);
    fn.associative_ = associative;
    fn.commutative_ = commutative;
    fn.idempotent_ = idempotent;
    return fn;
}

const ScalarValue& PlusFn::identity() const {
    LARA_CHECK(identityBound_, "PlusFn: identity not bound");
    return identity_;
}

PlusFn PlusFn::withIdentity(ScalarValue identity) const {
    PlusFn fn = *this;
    fn.identity_ = std::move(identity);
    fn.identityBound_ = true;
    return fn;
}

PlusFn PlusFn::withAttr(const std::string& attr) const {
    PlusFn fn = *this;
    fn.attr_ = attr;
    return fn;
}

ScalarValue PlusFn::apply(const ScalarValue& a, const ScalarValue& b) const {
    switch (builtin_) {
        case Builtin::Sum: {
            if (a.isNull()) return b;
            if (b.isNull()) return a;
            if (a.type() == ScalarType::Int64 && b.type() == ScalarType::Int64)
                return ScalarValue::i64(a.asI64() + b.asI64());
            return ScalarValue::f64(a.numeric() + b.numeric());
        }
        case Builtin::Any:
            return a == identity() ? b : a;
        case Builtin::Max: {
            if (a.isNull()) return b;
            if (b.isNull()) return a;
            return a.compare(b) >= 0 ? a : b;
        }
        case Builtin::Or: {
            if (a.isNull()) return b;
            if (b.isNull()) return a;
            return ScalarValue::boolean(a.asBool() || b.asBool());
        }
        case Builtin::None: {
            TupleRow row = TupleRow::make({{attr_, a}, {attr_ + "'", b}});
            return evalScalarExpr(*expr_, row);
        }
    }
    throw Error("PlusFn::apply: bad builtin");
}

std::string PlusFn::serialize() const {
    if (isBuiltin()) return name_;
    std::string flags;
    if (associative_) flags += "assoc ";
    if (commutative_) flags += "comm ";
    if (idempotent_) flags += "idem ";
    if (!flags.empty()) flags.pop_back();
    return "expr{" + expr_->print() + "}[" + flags + "]";
}

PlusFn PlusFn::deserialize(const std::string& text, const std::string& attr) {
    std::string t = trimCopy(text);
    if (t.rfind("expr{", 0) != 0) return builtin(t);
    std::size_t close = t.rfind('}');
    std::size_t fb = t.rfind('[');
    if (close == std::string::npos || fb == std::string::npos || fb < close)
        throw ParseError("bad aggregate function form: " + t);
    std::string body = t.substr(5, close - 5);
    std::string flags = t.substr(fb + 1, t.size() - fb - 2);
    bool assoc = flags.find("assoc") != std::string::npos;
    bool comm = flags.find("comm") != std::string::npos;
    bool idem = flags.find("idem") != std::string::npos;
    return fromExpr(attr, parseExpr(body), assoc, comm, idem);
}

// ---------------------------------------------------------------------------
// TimesFn

TimesFn TimesFn::builtin(const std::string& name) {
    TimesFn fn;
    fn.name_ = name;
    if (iequals(name, "times")) {
        fn.builtin_ = Builtin::Times;
        fn.commutative_ = true;
        fn.distributesOver_ = "sum";
    } else if (iequals(name, "minus")) {
        fn.builtin_ = Builtin::Minus;
    } else {
        throw UsageError("unknown join combiner: " + name);
    }
    return fn;
}

TimesFn TimesFn::fromExpr(std::string attr, ExprPtr expr, bool commutative,
                          std::string distributesOver) {
    LARA_CHECK(expr != nullptr, "TimesFn::fromExpr: null expression");
    TimesFn fn;
    fn.name_ = "expr{" + expr->print() + "}";
    fn.attr_ = std::move(attr);
    fn.expr_ = std::move(expr);
    fn.commutative_ = commutative;
    fn.distributesOver_ = std::move(distributesOver);
    return fn;
}

const ScalarValue& TimesFn::leftAnnihilator() const {
    LARA_CHECK(annihilatorsBound_, "TimesFn: annihilators not bound");
    return leftAnn_;
}

const ScalarValue& TimesFn::rightAnnihilator() const {
    LARA_CHECK(annihilatorsBound_, "TimesFn: annihilators not bound");
    return rightAnn_;
}

TimesFn TimesFn::withAnnihilators(ScalarValue left, ScalarValue right) const {
    TimesFn fn = *this;
    fn.leftAnn_ = std::move(left);
    fn.rightAnn_ = std::move(right);
    fn.annihilatorsBound_ = true;
    return fn;
}

TimesFn TimesFn::withAttr(const std::string& attr) const {
    TimesFn fn = *this;
    fn.attr_ = attr;
    return fn;
}

ScalarValue TimesFn::apply(const ScalarValue& a, const ScalarValue& b,
                           const TupleRow* keys) const {
    switch (builtin_) {
        case Builtin::Times: {
            if (a.isNull() || b.isNull()) return ScalarValue::null();
            if (a.type() == ScalarType::Int64 && b.type() == ScalarType::Int64)
                return ScalarValue::i64(a.asI64() * b.asI64());
            return ScalarValue::f64(a.numeric() * b.numeric());
        }
        case Builtin::Minus: {
            if (a.isNull() || b.isNull()) return ScalarValue::null();
            if (a.type() == ScalarType::Int64 && b.type() == ScalarType::Int64)
                return ScalarValue::i64(a.asI64() - b.asI64());
            return ScalarValue::f64(a.numeric() - b.numeric());
        }
        case Builtin::None: {
            std::vector<std::pair<std::string, ScalarValue>> binds;
            if (keys != nullptr)
                for (std::size_t i = 0; i < keys->size(); ++i)
                    binds.emplace_back(keys->nameAt(i), keys->valueAt(i));
            binds.emplace_back(attr_, a);
            binds.emplace_back(attr_ + "'", b);
            TupleRow row = TupleRow::make(binds);
            return evalScalarExpr(*expr_, row);
        }
    }
    throw Error("TimesFn::apply: bad builtin");
}

std::string TimesFn::serialize() const {
    if (isBuiltin()) return name_;
    std::string flags;
    if (commutative_) flags += "comm ";
    if (!distributesOver_.empty()) flags += "dist=" + distributesOver_ + " ";
    if (!flags.empty()) flags.pop_back();
    return "expr{" + expr_->print() + "}[" + flags + "]";
}

TimesFn TimesFn::deserialize(const std::string& text, const std::string& attr) {
    std::string t = trimCopy(text);
    if (t.rfind("expr{", 0) != 0) return builtin(t);
    std::size_t close = t.rfind('}');
    std::size_t fb = t.rfind('[');
    if (close == std::string::npos || fb == std::string::npos || fb < close)
        throw ParseError("bad join combiner form: " + t);
    std::string body = t.substr(5, close - 5);
    std::string flags = t.substr(fb + 1, t.size() - fb - 2);
    bool comm = flags.find("comm") != std::string::npos;
    std::string dist;
    std::size_t dp = flags.find("dist=");
    if (dp != std::string::npos) {
        std::size_t end = flags.find(' ', dp);
        dist = flags.substr(dp + 5, end == std::string::npos ? std::string::npos : end - dp - 5);
    }
    return fromExpr(attr, parseExpr(body), comm, dist);
}

// ---------------------------------------------------------------------------
// Text helpers shared with the plan parser

std::vector<std::string> splitTopLevel(const std::string& text, char delim) {
    std::vector<std::string> out;
    int depth = 0;
    bool inStr = false;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (inStr) {
            cur.push_back(c);
            if (c == '\'') {
                if (i + 1 < text.size() && text[i + 1] == '\'') {
                    cur.push_back(text[++i]);
                } else {
                    inStr = false;
                }
            }
            continue;
        }
        // A quote opens a string literal only where a value can start; after
        // an identifier or ')' it is a prime (as in c').
        if (c == '\'') {
            char prev = 0;
            for (std::size_t j = cur.size(); j > 0; --j) {
                if (!std::isspace(static_cast<unsigned char>(cur[j - 1]))) {
                    prev = cur[j - 1];
                    break;
                }
            }
            bool prime = std::isalnum(static_cast<unsigned char>(prev)) || prev == '_' ||
                         prev == '\'' || prev == ')';
            cur.push_back(c);
            if (!prime) inStr = true;
            continue;
        }
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
        if (c == delim && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::pair<std::string, ExprPtr>> parseNamedExprList(const std::string& text) {
    std::string t = trimCopy(text);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']')
        throw ParseError("expected [name: expr, ...], got: " + text);
    std::string inner = t.substr(1, t.size() - 2);
    std::vector<std::pair<std::string, ExprPtr>> out;
    if (trimCopy(inner).empty()) return out;
    for (const std::string& part : splitTopLevel(inner, ',')) {
        std::string p = trimCopy(part);
        std::size_t i = 0;
        if (i >= p.size() ||
            !(std::isalpha(static_cast<unsigned char>(p[i])) || p[i] == '_'))
            throw ParseError("expected attribute name in list entry: " + p);
        std::size_t start = i;
        while (i < p.size() && (std::isalnum(static_cast<unsigned char>(p[i])) || p[i] == '_'))
            ++i;
        while (i < p.size() && p[i] == '\'') ++i;
        std::string name = p.substr(start, i - start);
        while (i < p.size() && std::isspace(static_cast<unsigned char>(p[i]))) ++i;
        if (i >= p.size() || p[i] != ':')
            throw ParseError("expected ':' after name in list entry: " + p);
        out.emplace_back(name, parseExpr(p.substr(i + 1)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// ExtFn

ExtFn::ExtFn(std::vector<std::string> newKeyNames, std::vector<std::string> valueNames,
             std::vector<TableauRow> rows, std::vector<std::string> monotoneIn)
    : newKeyNames_(std::move(newKeyNames)),
      valueNames_(std::move(valueNames)),
      rows_(std::move(rows)),
      monotoneIn_(std::move(monotoneIn)) {
    LARA_CHECK(!rows_.empty(), "ExtFn: tableau must have at least one row");
    for (const auto& r : rows_) {
        LARA_CHECK(r.keyExprs.size() == newKeyNames_.size(),
                   "ExtFn: tableau row key arity mismatch");
        LARA_CHECK(r.valExprs.size() == valueNames_.size(),
                   "ExtFn: tableau row value arity mismatch");
    }
}

ExtFn ExtFn::map(std::vector<std::string> valueNames, std::vector<ExprPtr> valExprs) {
    TableauRow row;
    row.valExprs = std::move(valExprs);
    return ExtFn({}, std::move(valueNames), {std::move(row)});
}

void ExtFn::bind(const TableSchema& input) {
    newKeyTypes_.clear();
    valueTypes_.clear();
    outputDefaults_.clear();
    input_ = input;

    // Infer and reconcile output types across tableau rows.
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        for (std::size_t i = 0; i < newKeyNames_.size(); ++i) {
            ScalarType t = inferExprType(*rows_[r].keyExprs[i], input);
            if (r == 0) {
                newKeyTypes_.push_back(t);
            } else if (newKeyTypes_[i] != t && t != ScalarType::Null) {
                if (newKeyTypes_[i] == ScalarType::Null)
                    newKeyTypes_[i] = t;
                else
                    throw PropertyError("tableau rows disagree on type of key attribute " +
                                        newKeyNames_[i]);
            }
        }
        for (std::size_t i = 0; i < valueNames_.size(); ++i) {
            ScalarType t = inferExprType(*rows_[r].valExprs[i], input);
            if (r == 0) {
                valueTypes_.push_back(t);
            } else if (valueTypes_[i] != t && t != ScalarType::Null) {
                if (valueTypes_[i] == ScalarType::Null)
                    valueTypes_[i] = t;
                else
                    throw PropertyError("tableau rows disagree on type of value attribute " +
                                        valueNames_[i]);
            }
        }
    }
    for (std::size_t i = 0; i < newKeyNames_.size(); ++i)
        if (newKeyTypes_[i] == ScalarType::Null)
            throw PropertyError("cannot infer type of new key attribute " + newKeyNames_[i]);

    // Output defaults: the value expressions over default values. Sample key
    // bindings to verify the defaults do not depend on key attributes, and
    // that every tableau row produces the same (all-default) output on
    // default-valued input; otherwise non-measured keys would gain support.
    Rng rng(kVerifySeed);
    bool first = true;
    for (int s = 0; s < 16; ++s) {
        std::vector<std::pair<std::string, ScalarValue>> binds;
        for (const auto& a : input.attrs()) {
            if (a.kind == core::AttrKind::Key)
                binds.emplace_back(a.name, sampleValue(rng, a.type, false));
            else
                binds.emplace_back(a.name, a.dflt);
        }
        TupleRow row = TupleRow::make(binds);
        for (const auto& tr : rows_) {
            std::vector<ScalarValue> vals;
            for (std::size_t i = 0; i < tr.valExprs.size(); ++i)
                vals.push_back(coerceTo(evalScalarExpr(*tr.valExprs[i], row), valueTypes_[i]));
            if (first) {
                outputDefaults_ = vals;
                first = false;
            } else if (!(outputDefaults_ == vals)) {
                throw PropertyError(
                    "output defaults are not constant on default-valued input rows; the "
                    "function would create support for non-measured keys");
            }
        }
    }
    bound_ = true;
}

std::vector<ExtFn::Emitted> ExtFn::applyToRow(const TupleRow& row) const {
    LARA_CHECK(bound_, "ExtFn: not bound to an input schema");
    std::vector<Emitted> out;
    out.reserve(rows_.size());
    for (const auto& tr : rows_) {
        Emitted e;
        for (std::size_t i = 0; i < tr.keyExprs.size(); ++i) {
            ScalarValue k = coerceTo(evalScalarExpr(*tr.keyExprs[i], row), newKeyTypes_[i]);
            if (k.isNull())
                throw UsageError("key expression for " + newKeyNames_[i] + " produced null");
            e.newKeys.push_back(std::move(k));
        }
        for (std::size_t i = 0; i < tr.valExprs.size(); ++i)
            e.values.push_back(coerceTo(evalScalarExpr(*tr.valExprs[i], row), valueTypes_[i]));
        out.push_back(std::move(e));
    }
    return out;
}

std::string ExtFn::serialize() const {
    std::ostringstream os;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        if (r > 0) os << " ROW ";
        os << "{";
        if (!newKeyNames_.empty()) {
            os << "KEYS [";
            for (std::size_t i = 0; i < newKeyNames_.size(); ++i) {
                if (i > 0) os << ", ";
                os << newKeyNames_[i] << ": " << rows_[r].keyExprs[i]->print();
            }
            os << "] ";
        }
        os << "VALS [";
        for (std::size_t i = 0; i < valueNames_.size(); ++i) {
            if (i > 0) os << ", ";
            os << valueNames_[i] << ": " << rows_[r].valExprs[i]->print();
        }
        os << "]}";
    }
    if (!monotoneIn_.empty()) {
        os << " MONOTONE [";
        for (std::size_t i = 0; i < monotoneIn_.size(); ++i) {
            if (i > 0) os << ", ";
            os << monotoneIn_[i];
        }
        os << "]";
    }
    return os.str();
}

namespace {

// Case-insensitive keyword match at position i; advances past it on success.
bool eatKeyword(const std::string& s, std::size_t& i, const char* kw) {
    std::size_t j = i;
    while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    std::size_t k = 0;
    while (kw[k] != 0) {
        if (j + k >= s.size() ||
            std::tolower(static_cast<unsigned char>(s[j + k])) !=
                std::tolower(static_cast<unsigned char>(kw[k])))
            return false;
        ++k;
    }
    // Must not be a longer identifier.
    if (j + k < s.size() && (std::isalnum(static_cast<unsigned char>(s[j + k])) || s[j + k] == '_'))
        return false;
    i = j + k;
    return true;
}

// Extracts the bracketed [...] list starting at the next non-space character.
std::string eatBracketList(const std::string& s, std::size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size() || s[i] != '[') throw ParseError("expected '[' in tableau: " + s);
    int depth = 0;
    std::size_t start = i;
    bool inStr = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (inStr) {
            if (c == '\'') inStr = (i + 1 < s.size() && s[i + 1] == '\'') ? (++i, true) : false;
            continue;
        }
        if (c == '\'' && depth > 0) {
            char prev = s[i - 1];
            if (!(std::isalnum(static_cast<unsigned char>(prev)) || prev == '_' || prev == ')'))
                inStr = true;
            continue;
        }
        if (c == '[') ++depth;
        if (c == ']' && --depth == 0) {
            ++i;
            return s.substr(start, i - start);
        }
    }
    throw ParseError("unterminated '[' in tableau: " + s);
}

} // namespace

namespace {

// Extracts a top-level { ... } group starting at (whitespace before) i;
// returns the text between the braces and advances i past the '}'.
std::string eatBraceGroup(const std::string& s, std::size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size() || s[i] != '{')
        throw ParseError("expected '{' to open a tableau row, got: " + s.substr(i));
    std::size_t start = ++i;
    int depth = 1;
    bool inStr = false;
    auto identChar = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == ')';
    };
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (inStr) {
            if (c == '\'') inStr = (i + 1 < s.size() && s[i + 1] == '\'') ? (++i, true) : false;
            continue;
        }
        // An apostrophe after an identifier character is a trailing prime
        // (t', c''), not the start of a string literal.
        if (c == '\'' && !(i > start && identChar(s[i - 1]))) inStr = true;
        if (c == '{') ++depth;
        if (c == '}' && --depth == 0) return s.substr(start, i++ - start);
    }
    throw ParseError("unterminated '{' in tableau: " + s);
}

} // namespace

ExtFn ExtFn::deserialize(const std::string& text) {
    // Surface form: {KEYS [...] VALS [...]} (ROW {KEYS [...] VALS [...]})*
    // with an optional trailing MONOTONE [attr, ...] declaration.
    std::size_t i = 0;
    std::vector<std::string> keyNames, valNames;
    std::vector<TableauRow> rows;
    while (true) {
        std::string rowText = eatBraceGroup(text, i);
        std::size_t j = 0;
        std::vector<std::pair<std::string, ExprPtr>> keys, vals;
        if (eatKeyword(rowText, j, "KEYS")) keys = parseNamedExprList(eatBracketList(rowText, j));
        if (!eatKeyword(rowText, j, "VALS"))
            throw ParseError("expected VALS [...] in tableau row: " + rowText);
        vals = parseNamedExprList(eatBracketList(rowText, j));
        while (j < rowText.size() && std::isspace(static_cast<unsigned char>(rowText[j]))) ++j;
        if (j != rowText.size())
            throw ParseError("unexpected trailing text in tableau row: " + rowText.substr(j));

        std::vector<std::string> kn, vn;
        TableauRow tr;
        for (auto& [n, e] : keys) {
            kn.push_back(n);
            tr.keyExprs.push_back(std::move(e));
        }
        for (auto& [n, e] : vals) {
            vn.push_back(n);
            tr.valExprs.push_back(std::move(e));
        }
        if (rows.empty()) {
            keyNames = kn;
            valNames = vn;
        } else if (kn != keyNames || vn != valNames) {
            throw ParseError("tableau rows disagree on attribute names");
        }
        rows.push_back(std::move(tr));
        if (!eatKeyword(text, i, "ROW")) break;
    }

    std::vector<std::string> monotone;
    if (eatKeyword(text, i, "MONOTONE")) {
        std::string list = eatBracketList(text, i);
        for (const auto& part : splitTopLevel(list.substr(1, list.size() - 2), ','))
            if (!trimCopy(part).empty()) monotone.push_back(trimCopy(part));
    }
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i != text.size())
        throw ParseError("unexpected trailing text after tableau: " + text.substr(i));
    return ExtFn(std::move(keyNames), std::move(valNames), std::move(rows), std::move(monotone));
}

// ---------------------------------------------------------------------------
// Law verification

VerifyReport verifyPlusProperties(const PlusFn& fn, int samples, ScalarType valueType) {
    VerifyReport rep;
    rep.subject = "plus " + fn.name();
    if (!fn.hasIdentity()) {
        rep.checks.push_back({"identity bound", false, "no identity was bound"});
        return rep;
    }
    const ScalarValue& id = fn.identity();
    // When the identity is non-null the attribute is total (never null), so
    // null does not belong to the sampled value domain.
    const bool allowNull = id.isNull();

    LawCheck idLeft{"identity: id (+) v == v", true, ""};
    LawCheck idRight{"identity: v (+) id == v", true, ""};
    LawCheck assoc{"associativity", fn.associative(), ""};
    LawCheck comm{"commutativity", fn.commutative(), ""};
    LawCheck idem{"idempotence", fn.idempotent(), ""};

    Rng rng(kVerifySeed);
    for (int s = 0; s < samples; ++s) {
        ScalarValue a = sampleValue(rng, valueType, allowNull);
        ScalarValue b = sampleValue(rng, valueType, allowNull);
        ScalarValue c = sampleValue(rng, valueType, allowNull);
        try {
            if (idLeft.passed) {
                ScalarValue got = fn.apply(id, a);
                if (!(got == a)) {
                    idLeft.passed = false;
                    idLeft.counterexample = describePair(id, a, got, a);
                }
            }
            if (idRight.passed) {
                ScalarValue got = fn.apply(a, id);
                if (!(got == a)) {
                    idRight.passed = false;
                    idRight.counterexample = describePair(a, id, got, a);
                }
            }
            if (fn.associative() && assoc.passed) {
                ScalarValue l = fn.apply(fn.apply(a, b), c);
                ScalarValue r = fn.apply(a, fn.apply(b, c));
                if (!(l == r)) {
                    assoc.passed = false;
                    assoc.counterexample = "a=" + a.toLiteral() + " b=" + b.toLiteral() +
                                           " c=" + c.toLiteral() + ": (a+b)+c=" + l.toLiteral() +
                                           " a+(b+c)=" + r.toLiteral();
                }
            }
            if (fn.commutative() && comm.passed) {
                ScalarValue l = fn.apply(a, b);
                ScalarValue r = fn.apply(b, a);
                if (!(l == r)) {
                    comm.passed = false;
                    comm.counterexample = describePair(a, b, l, r);
                }
            }
            if (fn.idempotent() && idem.passed) {
                ScalarValue got = fn.apply(a, a);
                if (!(got == a)) {
                    idem.passed = false;
                    idem.counterexample = describePair(a, a, got, a);
                }
            }
        } catch (const std::exception& e) {
            rep.checks.push_back({"evaluation", false,
                                  std::string("threw on a=") + a.toLiteral() +
                                      " b=" + b.toLiteral() + ": " + e.what()});
            return rep;
        }
    }
    rep.checks.push_back(idLeft);
    rep.checks.push_back(idRight);
    if (fn.associative()) rep.checks.push_back(assoc);
    if (fn.commutative()) rep.checks.push_back(comm);
    if (fn.idempotent()) rep.checks.push_back(idem);
    return rep;
}

VerifyReport verifyTimesProperties(const TimesFn& fn, const PlusFn* plus, int samples,
                                   ScalarType valueType) {
    VerifyReport rep;
    rep.subject = "times " + fn.name();
    if (!fn.hasAnnihilators()) {
        rep.checks.push_back({"annihilators bound", false, "no annihilators were bound"});
        return rep;
    }
    const ScalarValue& la = fn.leftAnnihilator();
    const ScalarValue& ra = fn.rightAnnihilator();
    // Value domains per side: nullable exactly when that side's default is
    // null. Sampling respects the side a value is drawn from.
    const bool leftNull = la.isNull();
    const bool rightNull = ra.isNull();

    ScalarValue dflt;
    try {
        dflt = fn.apply(la, ra);
    } catch (const std::exception& e) {
        rep.checks.push_back(
            {"combined default", false, std::string("threw on defaults: ") + e.what()});
        return rep;
    }

    LawCheck annLeft{"annihilator: default (*) v == combined default", true, ""};
    LawCheck annRight{"annihilator: v (*) default == combined default", true, ""};
    LawCheck comm{"commutativity", fn.commutative(), ""};
    bool checkDist = plus != nullptr && !fn.distributesOver().empty();
    LawCheck dist{"distributes over " + fn.distributesOver(), true, ""};

    Rng rng(kVerifySeed);
    for (int s = 0; s < samples; ++s) {
        ScalarValue l = sampleValue(rng, valueType, leftNull);
        ScalarValue r = sampleValue(rng, valueType, rightNull);
        ScalarValue r2 = sampleValue(rng, valueType, rightNull);
        try {
            if (annLeft.passed) {
                ScalarValue got = fn.apply(la, r);
                if (!(got == dflt)) {
                    annLeft.passed = false;
                    annLeft.counterexample = describePair(la, r, got, dflt);
                }
            }
            if (annRight.passed) {
                ScalarValue got = fn.apply(l, ra);
                if (!(got == dflt)) {
                    annRight.passed = false;
                    annRight.counterexample = describePair(l, ra, got, dflt);
                }
            }
            if (fn.commutative() && comm.passed) {
                ScalarValue x = fn.apply(l, r);
                ScalarValue y = fn.apply(r, l);
                if (!(x == y)) {
                    comm.passed = false;
                    comm.counterexample = describePair(l, r, x, y);
                }
            }
            if (checkDist && dist.passed) {
                ScalarValue lhs = fn.apply(l, plus->apply(r, r2));
                ScalarValue rhs = plus->apply(fn.apply(l, r), fn.apply(l, r2));
                if (!(lhs == rhs)) {
                    dist.passed = false;
                    dist.counterexample = "a=" + l.toLiteral() + " b=" + r.toLiteral() +
                                          " c=" + r2.toLiteral() + ": a*(b+c)=" + lhs.toLiteral() +
                                          " a*b+a*c=" + rhs.toLiteral();
                }
            }
        } catch (const std::exception& e) {
            rep.checks.push_back({"evaluation", false,
                                  std::string("threw on l=") + l.toLiteral() +
                                      " r=" + r.toLiteral() + ": " + e.what()});
            return rep;
        }
    }
    rep.checks.push_back(annLeft);
    rep.checks.push_back(annRight);
    if (fn.commutative()) rep.checks.push_back(comm);
    if (checkDist) rep.checks.push_back(dist);
    return rep;
}

VerifyReport verifyExtProperties(ExtFn& fn, const TableSchema& inputSchema, int samples) {
    VerifyReport rep;
    rep.subject = "ext over " + inputSchema.describe();
    try {
        fn.bind(inputSchema);
    } catch (const std::exception& e) {
        rep.checks.push_back({"bind/output schema", false, e.what()});
        return rep;
    }
    rep.checks.push_back({"bind/output schema", true, ""});

    // Empty support on default input: a default-valued row (under any key
    // binding) must emit only default values, so it creates no support.
    LawCheck law{"default-valued input emits only default values", true, ""};
    Rng rng(kVerifySeed + 1);
    for (int s = 0; s < samples && law.passed; ++s) {
        std::vector<std::pair<std::string, ScalarValue>> binds;
        for (const auto& a : inputSchema.attrs()) {
            if (a.kind == core::AttrKind::Key)
                binds.emplace_back(a.name, sampleValue(rng, a.type, false));
            else
                binds.emplace_back(a.name, a.dflt);
        }
        TupleRow row = TupleRow::make(binds);
        try {
            for (const auto& e : fn.applyToRow(row)) {
                if (!(e.values == fn.outputDefaults())) {
                    law.passed = false;
                    law.counterexample = "input " + row.toText() + " emitted non-default values";
                    break;
                }
            }
        } catch (const std::exception& ex) {
            law.passed = false;
            law.counterexample = std::string("threw on ") + row.toText() + ": " + ex.what();
        }
    }
    rep.checks.push_back(law);
    return rep;
}

VerifyReport checkMonotone(const ExtFn& fn, const std::string& keyAttr, int samples) {
    VerifyReport rep;
    rep.subject = "monotone in " + keyAttr;
    if (!fn.bound()) {
        rep.checks.push_back({"bound", false, "ext function not bound to an input schema"});
        return rep;
    }
    const TableSchema& in = fn.inputSchema();
    const AttributeSchema* attr = in.find(keyAttr);
    if (attr == nullptr || attr->kind != core::AttrKind::Key) {
        rep.checks.push_back({"declared attribute is an input key", false,
                              keyAttr + " is not a key attribute of the input"});
        return rep;
    }

    auto keyTupleLess = [](const std::vector<ScalarValue>& a, const std::vector<ScalarValue>& b) {
        for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
            int c = a[i].compare(b[i]);
            if (c != 0) return c < 0;
        }
        return a.size() < b.size();
    };

    LawCheck law{"output keys ordered with " + keyAttr, true, ""};
    Rng rng(kVerifySeed + 2);
    for (int s = 0; s < samples && law.passed; ++s) {
        ScalarValue k1 = sampleValue(rng, attr->type, false);
        ScalarValue k2 = sampleValue(rng, attr->type, false);
        if (k1.compare(k2) == 0) continue;
        if (k1.compare(k2) > 0) std::swap(k1, k2);

        std::vector<std::pair<std::string, ScalarValue>> binds;
        for (const auto& a : in.attrs()) {
            if (a.name == keyAttr) {
                binds.emplace_back(a.name, k1); // replaced below for r2
            } else if (a.kind == core::AttrKind::Key) {
                binds.emplace_back(a.name, sampleValue(rng, a.type, false));
            } else {
                binds.emplace_back(a.name, sampleValue(rng, a.type, a.dflt.isNull()));
            }
        }
        TupleRow r1 = TupleRow::make(binds);
        for (auto& [n, v] : binds)
            if (n == keyAttr) v = k2;
        TupleRow r2 = TupleRow::make(binds);

        try {
            auto e1 = fn.applyToRow(r1);
            auto e2 = fn.applyToRow(r2);
            if (e1.empty() || e2.empty()) continue;
            const std::vector<ScalarValue>* max1 = &e1[0].newKeys;
            for (const auto& e : e1)
                if (keyTupleLess(*max1, e.newKeys)) max1 = &e.newKeys;
            const std::vector<ScalarValue>* min2 = &e2[0].newKeys;
            for (const auto& e : e2)
                if (keyTupleLess(e.newKeys, *min2)) min2 = &e.newKeys;
            if (keyTupleLess(*min2, *max1)) {
                law.passed = false;
                std::ostringstream os;
                os << keyAttr << "=" << k1.toLiteral() << " vs " << k2.toLiteral()
                   << " emit out-of-order key tuples (";
                for (std::size_t i = 0; i < max1->size(); ++i)
                    os << (i ? ", " : "") << (*max1)[i].toLiteral();
                os << ") > (";
                for (std::size_t i = 0; i < min2->size(); ++i)
                    os << (i ? ", " : "") << (*min2)[i].toLiteral();
                os << ")";
                law.counterexample = os.str();
            }
        } catch (const std::exception& ex) {
            law.passed = false;
            law.counterexample = std::string("threw: ") + ex.what();
        }
    }
    rep.checks.push_back(law);
    return rep;
}

} // namespace lara::udf
