#include "laradb/expr.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <set>

namespace lara::udf {

using Kind = ScalarExpr::Kind;

ExprPtr ScalarExpr::literal(ScalarValue v) {
    auto e = std::make_shared<ScalarExpr>();
    e->kind = Kind::Lit;
    e->lit = std::move(v);
    return e;
}

ExprPtr ScalarExpr::attr(std::string name) {
    auto e = std::make_shared<ScalarExpr>();
    e->kind = Kind::Ref;
    e->ref = std::move(name);
    return e;
}

ExprPtr ScalarExpr::node(Kind k, std::vector<ExprPtr> args) {
    auto e = std::make_shared<ScalarExpr>();
    e->kind = k;
    e->args = std::move(args);
    return e;
}

namespace {

struct OpInfo {
    const char* text;
    int precedence; // higher binds tighter
};

OpInfo opInfo(Kind k) {
    switch (k) {
        case Kind::Mul: return {"*", 5};
        case Kind::Div: return {"/", 5};
        case Kind::Add: return {"+", 4};
        case Kind::Sub: return {"-", 4};
        case Kind::Eq: return {"=", 3};
        case Kind::Ne: return {"!=", 3};
        case Kind::Lt: return {"<", 3};
        case Kind::Le: return {"<=", 3};
        case Kind::Gt: return {">", 3};
        case Kind::Ge: return {">=", 3};
        case Kind::And: return {"&&", 2};
        case Kind::Or: return {"||", 1};
        default: return {"", 0};
    }
}

void printInto(const ScalarExpr& e, std::string& out, int parentPrec) {
    switch (e.kind) {
        case Kind::Lit: out += e.lit.toLiteral(); return;
        case Kind::Ref: out += e.ref; return;
        case Kind::Not:
            out += "!";
            printInto(*e.args[0], out, 6);
            return;
        case Kind::If:
            out += "if(";
            printInto(*e.args[0], out, 0);
            out += ", ";
            printInto(*e.args[1], out, 0);
            out += ", ";
            printInto(*e.args[2], out, 0);
            out += ")";
            return;
        case Kind::IsNull:
            out += "isNull(";
            printInto(*e.args[0], out, 0);
            out += ")";
            return;
        case Kind::Bin:
            out += "bin(";
            printInto(*e.args[0], out, 0);
            out += ")";
            return;
        case Kind::Ntz:
            out += "ntz(";
            printInto(*e.args[0], out, 0);
            out += ")";
            return;
        default: {
            const OpInfo op = opInfo(e.kind);
            const bool parens = op.precedence < parentPrec;
            if (parens) out += "(";
            printInto(*e.args[0], out, op.precedence);
            out += " ";
            out += op.text;
            out += " ";
            // Right operand gets precedence+1: operators associate left.
            printInto(*e.args[1], out, op.precedence + 1);
            if (parens) out += ")";
            return;
        }
    }
}

} // namespace

std::string ScalarExpr::print() const {
    std::string out;
    printInto(*this, out, 0);
    return out;
}

std::vector<std::string> ScalarExpr::referencedAttrs() const {
    std::set<std::string> seen;
    std::function<void(const ScalarExpr&)> walk = [&](const ScalarExpr& e) {
        if (e.kind == Kind::Ref) seen.insert(e.ref);
        for (const auto& a : e.args) walk(*a);
    };
    walk(*this);
    return {seen.begin(), seen.end()};
}

bool ScalarExpr::equals(const ScalarExpr& o) const {
    if (kind != o.kind || lit != o.lit || ref != o.ref || args.size() != o.args.size())
        return false;
    for (std::size_t i = 0; i < args.size(); ++i)
        if (!args[i]->equals(*o.args[i])) return false;
    return true;
}

std::uint64_t ScalarExpr::hash() const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(kind));
    h = hashCombine(h, lit.hash());
    for (unsigned char c : ref) h = hashCombine(h, c);
    for (const auto& a : args) h = hashCombine(h, a->hash());
    return h;
}

// ---------------------------------------------------------------------------
// Parser: recursive descent over a small token stream.

namespace {

struct Token {
    enum class Type { Ident, Number, String, Punct, End } type;
    std::string text;
    int column;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(1, tok_.column, msg + " near '" + tok_.text + "'");
    }

private:
    void advance() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        tok_.column = static_cast<int>(pos_) + 1;
        if (pos_ >= text_.size()) {
            tok_ = {Token::Type::End, "", tok_.column};
            return;
        }
        const char c = text_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            // Trailing apostrophes are part of identifiers (t', c'').
            while (pos_ < text_.size() && text_[pos_] == '\'') ++pos_;
            tok_ = {Token::Type::Ident, text_.substr(start, pos_ - start), tok_.column};
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
                ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
                ++pos_;
                if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            }
            tok_ = {Token::Type::Number, text_.substr(start, pos_ - start), tok_.column};
            return;
        }
        if (c == '\'') {
            // Quoted string; '' is an escaped quote.
            std::string out;
            ++pos_;
            while (true) {
                if (pos_ >= text_.size())
                    throw ParseError(1, tok_.column, "unterminated string literal");
                if (text_[pos_] == '\'') {
                    if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '\'') {
                        out += '\'';
                        pos_ += 2;
                        continue;
                    }
                    ++pos_;
                    break;
                }
                out += text_[pos_++];
            }
            tok_ = {Token::Type::String, out, tok_.column};
            return;
        }
        // Multi-char punctuation first.
        static const char* kTwo[] = {"!=", "<=", ">=", "&&", "||"};
        for (const char* two : kTwo) {
            if (text_.compare(pos_, 2, two) == 0) {
                tok_ = {Token::Type::Punct, two, tok_.column};
                pos_ += 2;
                return;
            }
        }
        tok_ = {Token::Type::Punct, std::string(1, c), tok_.column};
        ++pos_;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    Token tok_;
};

class ExprParser {
public:
    explicit ExprParser(const std::string& text) : lex_(text) {}

    ExprPtr parse() {
        ExprPtr e = parseOr();
        if (lex_.peek().type != Token::Type::End) lex_.fail("trailing input in expression");
        return e;
    }

private:
    bool eat(const std::string& punct) {
        if (lex_.peek().type == Token::Type::Punct && lex_.peek().text == punct) {
            lex_.take();
            return true;
        }
        return false;
    }

    void expect(const std::string& punct) {
        if (!eat(punct)) lex_.fail("expected '" + punct + "'");
    }

    ExprPtr parseOr() {
        ExprPtr e = parseAnd();
        while (eat("||")) e = ScalarExpr::node(Kind::Or, {e, parseAnd()});
        return e;
    }

    ExprPtr parseAnd() {
        ExprPtr e = parseCmp();
        while (eat("&&")) e = ScalarExpr::node(Kind::And, {e, parseCmp()});
        return e;
    }

    ExprPtr parseCmp() {
        ExprPtr e = parseAdd();
        while (true) {
            Kind k;
            if (eat("=")) k = Kind::Eq;
            else if (eat("!=")) k = Kind::Ne;
            else if (eat("<=")) k = Kind::Le;
            else if (eat("<")) k = Kind::Lt;
            else if (eat(">=")) k = Kind::Ge;
            else if (eat(">")) k = Kind::Gt;
            else return e;
            e = ScalarExpr::node(k, {e, parseAdd()});
        }
    }

    ExprPtr parseAdd() {
        ExprPtr e = parseMul();
        while (true) {
            if (eat("+")) e = ScalarExpr::node(Kind::Add, {e, parseMul()});
            else if (eat("-")) e = ScalarExpr::node(Kind::Sub, {e, parseMul()});
            else return e;
        }
    }

    ExprPtr parseMul() {
        ExprPtr e = parseUnary();
        while (true) {
            if (eat("*")) e = ScalarExpr::node(Kind::Mul, {e, parseUnary()});
            else if (eat("/")) e = ScalarExpr::node(Kind::Div, {e, parseUnary()});
            else return e;
        }
    }

    ExprPtr parseUnary() {
        if (eat("!")) return ScalarExpr::node(Kind::Not, {parseUnary()});
        if (eat("-")) {
            // Unary minus: fold into numeric literals, otherwise 0 - x.
            ExprPtr inner = parseUnary();
            if (inner->kind == Kind::Lit && inner->lit.type() == ScalarType::Int64)
                return ScalarExpr::literal(ScalarValue::i64(-inner->lit.asI64()));
            if (inner->kind == Kind::Lit && inner->lit.type() == ScalarType::Float64)
                return ScalarExpr::literal(ScalarValue::f64(-inner->lit.asF64()));
            return ScalarExpr::node(Kind::Sub, {ScalarExpr::literal(ScalarValue::i64(0)), inner});
        }
        return parsePrimary();
    }

    ExprPtr parsePrimary() {
        const Token t = lex_.peek();
        if (t.type == Token::Type::Number) {
            lex_.take();
            return ScalarExpr::literal(ScalarValue::parseLiteral(t.text));
        }
        if (t.type == Token::Type::String) {
            lex_.take();
            return ScalarExpr::literal(ScalarValue::utf8(t.text));
        }
        if (t.type == Token::Type::Ident) {
            lex_.take();
            if (t.text == "null") return ScalarExpr::literal(ScalarValue::null());
            if (t.text == "true") return ScalarExpr::literal(ScalarValue::boolean(true));
            if (t.text == "false") return ScalarExpr::literal(ScalarValue::boolean(false));
            if (lex_.peek().type == Token::Type::Punct && lex_.peek().text == "(") {
                lex_.take();
                std::vector<ExprPtr> args;
                if (!eat(")")) {
                    args.push_back(parseOr());
                    while (eat(",")) args.push_back(parseOr());
                    expect(")");
                }
                return makeCall(t.text, std::move(args));
            }
            return ScalarExpr::attr(t.text);
        }
        if (t.type == Token::Type::Punct && t.text == "(") {
            lex_.take();
            ExprPtr e = parseOr();
            expect(")");
            return e;
        }
        lex_.fail("expected expression");
    }

    ExprPtr makeCall(const std::string& name, std::vector<ExprPtr> args) {
        auto arity = [&](std::size_t n) {
            if (args.size() != n)
                lex_.fail(name + " takes " + std::to_string(n) + " argument(s)");
        };
        if (name == "if") {
            arity(3);
            return ScalarExpr::node(Kind::If, std::move(args));
        }
        if (name == "isNull") {
            arity(1);
            return ScalarExpr::node(Kind::IsNull, std::move(args));
        }
        if (name == "bin") {
            arity(1);
            return ScalarExpr::node(Kind::Bin, std::move(args));
        }
        if (name == "ntz") {
            arity(1);
            return ScalarExpr::node(Kind::Ntz, std::move(args));
        }
        lex_.fail("unknown function " + name);
    }

    Lexer lex_;
};

} // namespace

ExprPtr parseExpr(const std::string& text) { return ExprParser(text).parse(); }

// ---------------------------------------------------------------------------
// Evaluation.

ScalarValue ntz(const ScalarValue& v, ScalarType numericType) {
    if (!v.isNull()) return v;
    switch (numericType) {
        case ScalarType::Float64: return ScalarValue::f64(0.0);
        case ScalarType::Bool: return ScalarValue::boolean(false);
        default: return ScalarValue::i64(0);
    }
}

std::int64_t binToNearestMinute(std::int64_t t) {
    // t - mod(t,60) rounds down to the minute; the second term adds 60 when
    // the remainder is at least half a minute. mod is the flooring remainder,
    // so this behaves uniformly for negative t.
    std::int64_t m = t % 60;
    if (m < 0) m += 60;
    return t - m + (m >= 30 ? 60 : 0);
}

namespace {

bool truthy(const ScalarValue& v) {
    switch (v.type()) {
        case ScalarType::Null: return false;
        case ScalarType::Bool: return v.asBool();
        case ScalarType::Int64: return v.asI64() != 0;
        case ScalarType::Float64: return v.asF64() != 0.0;
        default: throw UsageError("condition is not boolean or numeric: " + v.toLiteral());
    }
}

ScalarValue arith(Kind k, const ScalarValue& a, const ScalarValue& b) {
    if (a.isNull() || b.isNull()) return ScalarValue::null();
    const bool bothInt = a.type() == ScalarType::Int64 && b.type() == ScalarType::Int64;
    if (bothInt) {
        const std::int64_t x = a.asI64(), y = b.asI64();
        switch (k) {
            case Kind::Add: return ScalarValue::i64(x + y);
            case Kind::Sub: return ScalarValue::i64(x - y);
            case Kind::Mul: return ScalarValue::i64(x * y);
            case Kind::Div:
                if (y == 0) return ScalarValue::null();
                return ScalarValue::i64(x / y); // truncates toward zero
            default: break;
        }
    }
    const double x = a.numeric(), y = b.numeric();
    switch (k) {
        case Kind::Add: return ScalarValue::f64(x + y);
        case Kind::Sub: return ScalarValue::f64(x - y);
        case Kind::Mul: return ScalarValue::f64(x * y);
        case Kind::Div:
            if (y == 0.0) return ScalarValue::null();
            return ScalarValue::f64(x / y);
        default: break;
    }
    throw UsageError("bad arithmetic kind");
}

ScalarValue compare(Kind k, const ScalarValue& a, const ScalarValue& b) {
    // Comparisons never see through null; isNull is the only null test.
    if (a.isNull() || b.isNull()) return ScalarValue::i64(0);
    int c;
    if (a.type() == b.type()) {
        c = a.compare(b);
    } else {
        // Numeric cross-type comparison promotes to double.
        const double x = a.numeric(), y = b.numeric();
        c = x < y ? -1 : (x > y ? 1 : 0);
    }
    bool r = false;
    switch (k) {
        case Kind::Eq: r = c == 0; break;
        case Kind::Ne: r = c != 0; break;
        case Kind::Lt: r = c < 0; break;
        case Kind::Le: r = c <= 0; break;
        case Kind::Gt: r = c > 0; break;
        case Kind::Ge: r = c >= 0; break;
        default: throw UsageError("bad comparison kind");
    }
    return ScalarValue::i64(r ? 1 : 0);
}

} // namespace

ScalarValue evalScalarExpr(const ScalarExpr& e, const TupleRow& row) {
    switch (e.kind) {
        case Kind::Lit: return e.lit;
        case Kind::Ref: {
            if (const auto* v = row.tryGet(e.ref)) return *v;
            throw UsageError("unbound attribute " + e.ref + " in expression; row is " +
                             row.toText());
        }
        case Kind::Add:
        case Kind::Sub:
        case Kind::Mul:
        case Kind::Div:
            return arith(e.kind, evalScalarExpr(*e.args[0], row), evalScalarExpr(*e.args[1], row));
        case Kind::Eq:
        case Kind::Ne:
        case Kind::Lt:
        case Kind::Le:
        case Kind::Gt:
        case Kind::Ge:
            return compare(e.kind, evalScalarExpr(*e.args[0], row),
                           evalScalarExpr(*e.args[1], row));
        case Kind::And: {
            // Short-circuit; null operand yields false.
            if (!truthy(evalScalarExpr(*e.args[0], row))) return ScalarValue::i64(0);
            return ScalarValue::i64(truthy(evalScalarExpr(*e.args[1], row)) ? 1 : 0);
        }
        case Kind::Or: {
            if (truthy(evalScalarExpr(*e.args[0], row))) return ScalarValue::i64(1);
            return ScalarValue::i64(truthy(evalScalarExpr(*e.args[1], row)) ? 1 : 0);
        }
        case Kind::Not:
            return ScalarValue::i64(truthy(evalScalarExpr(*e.args[0], row)) ? 0 : 1);
        case Kind::If:
            return truthy(evalScalarExpr(*e.args[0], row)) ? evalScalarExpr(*e.args[1], row)
                                                           : evalScalarExpr(*e.args[2], row);
        case Kind::IsNull:
            return ScalarValue::i64(evalScalarExpr(*e.args[0], row).isNull() ? 1 : 0);
        case Kind::Bin: {
            ScalarValue v = evalScalarExpr(*e.args[0], row);
            if (v.isNull()) return v;
            return ScalarValue::i64(binToNearestMinute(v.asI64()));
        }
        case Kind::Ntz: {
            ScalarValue v = evalScalarExpr(*e.args[0], row);
            return ntz(v, v.isNull() ? ScalarType::Int64 : v.type());
        }
    }
    throw UsageError("bad expression kind");
}

ScalarType inferExprType(const ScalarExpr& e, const core::TableSchema& schema) {
    auto unify = [](ScalarType a, ScalarType b) {
        if (a == b) return a;
        if (a == ScalarType::Null) return b;
        if (b == ScalarType::Null) return a;
        if ((a == ScalarType::Int64 && b == ScalarType::Float64) ||
            (a == ScalarType::Float64 && b == ScalarType::Int64))
            return ScalarType::Float64;
        throw UsageError("expression mixes " + typeName(a) + " and " + typeName(b));
    };
    switch (e.kind) {
        case Kind::Lit: return e.lit.type();
        case Kind::Ref: return schema.at(e.ref).type;
        case Kind::Add:
        case Kind::Sub:
        case Kind::Mul: {
            ScalarType t = unify(inferExprType(*e.args[0], schema), inferExprType(*e.args[1], schema));
            if (t == ScalarType::Bool || t == ScalarType::Utf8)
                throw UsageError("arithmetic over " + typeName(t));
            return t;
        }
        case Kind::Div: {
            ScalarType t = unify(inferExprType(*e.args[0], schema), inferExprType(*e.args[1], schema));
            if (t == ScalarType::Bool || t == ScalarType::Utf8)
                throw UsageError("arithmetic over " + typeName(t));
            return t;
        }
        case Kind::Eq:
        case Kind::Ne:
        case Kind::Lt:
        case Kind::Le:
        case Kind::Gt:
        case Kind::Ge:
        case Kind::And:
        case Kind::Or:
        case Kind::Not:
        case Kind::IsNull:
            return ScalarType::Int64;
        case Kind::If:
            return unify(inferExprType(*e.args[1], schema), inferExprType(*e.args[2], schema));
        case Kind::Bin: return ScalarType::Int64;
        case Kind::Ntz: return inferExprType(*e.args[0], schema);
    }
    throw UsageError("bad expression kind");
}

} // namespace lara::udf
