#include <cctype>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "laradb/logical.hpp"

namespace lara::plan {

using core::ScalarValue;
using udf::splitTopLevel;

namespace {

std::string trimCopy(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool identStart(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool identChar(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Strips a trailing // comment, honoring string literals. A quote directly
/// after an identifier character or ')' is a prime (c'), not a string open —
/// the same rule the expression splitter uses.
std::string stripComment(const std::string& line) {
    bool inStr = false;
    char prev = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (inStr) {
            if (c == '\'') {
                if (i + 1 < line.size() && line[i + 1] == '\'') ++i;
                else inStr = false;
            }
            continue;
        }
        if (c == '/' && i + 1 < line.size() && line[i + 1] == '/') return line.substr(0, i);
        if (c == '\'') {
            bool prime = identChar(prev) || prev == '\'' || prev == ')';
            if (!prime) inStr = true;
        }
        if (!std::isspace(static_cast<unsigned char>(c))) prev = c;
    }
    return line;
}

/// One statement's text with a cursor; all scanning helpers throw ParseError
/// carrying the original line number and the current column.
struct Cursor {
    const std::string& s;
    int line;
    std::size_t i = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(line, static_cast<int>(i) + 1, msg);
    }
    void skipWs() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool atEnd() {
        skipWs();
        return i >= s.size();
    }
    char peek() {
        skipWs();
        return i < s.size() ? s[i] : '\0';
    }
    bool tryChar(char c) {
        skipWs();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
    void expectChar(char c) {
        if (!tryChar(c)) fail(std::string("expected '") + c + "'");
    }

    /// Case-insensitive keyword at a word boundary.
    bool tryKeyword(const char* kw) {
        skipWs();
        std::size_t j = i, k = 0;
        while (kw[k] != 0) {
            if (j >= s.size() || std::tolower(static_cast<unsigned char>(s[j])) !=
                                     std::tolower(static_cast<unsigned char>(kw[k])))
                return false;
            ++j, ++k;
        }
        if (j < s.size() && (identChar(s[j]) || s[j] == '\'')) return false;
        i = j;
        return true;
    }
    void expectKeyword(const char* kw) {
        if (!tryKeyword(kw)) fail(std::string("expected ") + kw);
    }

    /// Identifier with optional trailing primes: t, cnt, c''.
    std::string eatIdent(const char* what) {
        skipWs();
        if (i >= s.size() || !identStart(s[i])) fail(std::string("expected ") + what);
        std::size_t b = i;
        while (i < s.size() && identChar(s[i])) ++i;
        while (i < s.size() && s[i] == '\'') ++i;
        return s.substr(b, i - b);
    }

    /// Quoted text with '' escaping; returns the unescaped content.
    std::string eatQuoted() {
        skipWs();
        if (i >= s.size() || s[i] != '\'') fail("expected quoted name");
        ++i;
        std::string out;
        while (i < s.size()) {
            if (s[i] == '\'') {
                if (i + 1 < s.size() && s[i + 1] == '\'') {
                    out.push_back('\'');
                    i += 2;
                    continue;
                }
                ++i;
                return out;
            }
            out.push_back(s[i++]);
        }
        fail("unterminated quoted name");
    }

    /// A scalar literal token (number, true/false/null, or quoted text).
    ScalarValue eatLiteral() {
        skipWs();
        if (i < s.size() && s[i] == '\'') return ScalarValue::utf8(eatQuoted());
        std::size_t b = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != ',' &&
               s[i] != ']')
            ++i;
        if (i == b) fail("expected literal");
        try {
            return ScalarValue::parseLiteral(s.substr(b, i - b));
        } catch (const Error& e) {
            i = b;
            fail(e.what());
        }
    }

    /// Balanced group from `open` to its matching `close` (inclusive),
    /// honoring nested groups and string literals.
    std::string eatGroup(char open, char close) {
        skipWs();
        if (i >= s.size() || s[i] != open) fail(std::string("expected '") + open + "'");
        std::size_t b = i;
        int depth = 0;
        bool inStr = false;
        char prev = 0;
        for (; i < s.size(); ++i) {
            char c = s[i];
            if (inStr) {
                if (c == '\'') {
                    if (i + 1 < s.size() && s[i + 1] == '\'') ++i;
                    else inStr = false;
                }
                continue;
            }
            if (c == '\'') {
                bool prime = identChar(prev) || prev == '\'' || prev == ')';
                if (!prime) inStr = true;
            } else if (c == open) {
                ++depth;
            } else if (c == close) {
                if (--depth == 0) {
                    ++i;
                    return s.substr(b, i - b);
                }
            }
            if (!std::isspace(static_cast<unsigned char>(c))) prev = c;
        }
        fail(std::string("unbalanced '") + open + "'");
    }

    std::string rest() {
        skipWs();
        std::string out = trimCopy(s.substr(i));
        i = s.size();
        return out;
    }
};

/// "[v: sum, cnt: expr{..}[assoc comm]]" -> name/function-text pairs.
std::vector<std::pair<std::string, std::string>> parseNamedFnList(Cursor& c) {
    std::string group = c.eatGroup('[', ']');
    std::string inner = group.substr(1, group.size() - 2);
    std::vector<std::pair<std::string, std::string>> out;
    if (trimCopy(inner).empty()) return out;
    for (const std::string& part : splitTopLevel(inner, ',')) {
        std::vector<std::string> halves = splitTopLevel(part, ':');
        if (halves.size() != 2)
            c.fail("expected 'name: function' in list entry: " + trimCopy(part));
        out.emplace_back(trimCopy(halves[0]), trimCopy(halves[1]));
    }
    return out;
}

std::map<std::string, udf::PlusFn> parsePlusList(Cursor& c) {
    std::map<std::string, udf::PlusFn> out;
    for (auto& [name, text] : parseNamedFnList(c)) {
        if (!out.emplace(name, udf::PlusFn::deserialize(text, name)).second)
            c.fail("duplicate attribute in function list: " + name);
    }
    return out;
}

std::map<std::string, udf::TimesFn> parseTimesList(Cursor& c) {
    std::map<std::string, udf::TimesFn> out;
    for (auto& [name, text] : parseNamedFnList(c)) {
        if (!out.emplace(name, udf::TimesFn::deserialize(text, name)).second)
            c.fail("duplicate attribute in function list: " + name);
    }
    return out;
}

/// Table name: quoted ('sensor readings') or a bare identifier.
std::string eatTableName(Cursor& c) {
    if (c.peek() == '\'') return c.eatQuoted();
    return c.eatIdent("table name");
}

int resolveOperand(Cursor& c, const PlanBuilder& b, const std::string& name) {
    int id = b.lookup(name);
    if (id < 0) c.fail("unknown plan identifier '" + name + "'");
    return id;
}

} // namespace

LogicalPlan parsePlanDsl(const std::string& text, const TableResolver& resolve) {
    PlanBuilder builder;
    std::istringstream in(text);
    std::string raw;
    int lineNo = 0;
    while (std::getline(in, raw)) {
        ++lineNo;
        std::string stmt = stripComment(raw);
        if (trimCopy(stmt).empty()) continue;
        Cursor c{stmt, lineNo};

        // Optional decimal label prefix: "3.5:".
        double label = 0;
        c.skipWs();
        if (c.i < stmt.size() && std::isdigit(static_cast<unsigned char>(stmt[c.i]))) {
            std::size_t b = c.i;
            while (c.i < stmt.size() && (std::isdigit(static_cast<unsigned char>(stmt[c.i])) ||
                                         stmt[c.i] == '.'))
                ++c.i;
            label = std::stod(stmt.substr(b, c.i - b));
            c.expectChar(':');
            if (label <= 0) c.fail("labels must be positive");
        }

        try {
            if (c.tryKeyword("STORE")) {
                std::string ref = c.eatIdent("plan identifier");
                int id = resolveOperand(c, builder, ref);
                std::string table = ref;
                if (c.tryKeyword("AS")) table = eatTableName(c);
                bool upper = c.tryKeyword("UPPER_TRIANGLE");
                if (!c.atEnd()) c.fail("unexpected trailing text");
                builder.store(id, table, upper, label);
                continue;
            }
            if (c.tryKeyword("SORT")) {
                // Statement form: SORT A TO [t, c] rebinds A to the sorted A.
                std::string ref = c.eatIdent("plan identifier");
                int id = resolveOperand(c, builder, ref);
                c.expectKeyword("TO");
                AccessPath target = AccessPath::parse(c.eatGroup('[', ']'));
                if (!c.atEnd()) c.fail("unexpected trailing text");
                builder.bindName(ref, builder.sort(id, std::move(target), label));
                continue;
            }

            std::string name = c.eatIdent("statement");
            if (builder.lookup(name) >= 0) c.fail("duplicate binding '" + name + "'");
            c.expectChar('=');

            int id = -1;
            if (c.tryKeyword("LOAD")) {
                std::string table = eatTableName(c);
                std::optional<TableType> type = resolve(table);
                if (!type) c.fail("unknown table '" + table + "'");
                std::optional<ScalarValue> lo, hi;
                if (c.tryKeyword("FROM")) lo = c.eatLiteral();
                if (c.tryKeyword("TO")) hi = c.eatLiteral();
                id = builder.load(table, *type, std::move(lo), std::move(hi), label);
            } else if (c.tryKeyword("MAP")) {
                int in0 = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                c.expectKeyword("BY");
                auto cols = udf::parseNamedExprList(c.eatGroup('[', ']'));
                std::vector<std::string> names;
                std::vector<udf::ExprPtr> exprs;
                for (auto& [n, e] : cols) {
                    names.push_back(n);
                    exprs.push_back(std::move(e));
                }
                id = builder.map(in0, udf::ExtFn::map(std::move(names), std::move(exprs)), label);
            } else if (c.tryKeyword("EXT")) {
                int in0 = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                c.expectKeyword("BY");
                id = builder.ext(in0, udf::ExtFn::deserialize(c.rest()), label);
            } else if (c.tryKeyword("AGG")) {
                int in0 = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                std::vector<std::string> onKeys;
                if (c.tryKeyword("ON")) {
                    do onKeys.push_back(c.eatIdent("key attribute"));
                    while (c.tryChar(','));
                }
                c.expectKeyword("BY");
                id = builder.agg(in0, std::move(onKeys), parsePlusList(c), label);
            } else if (c.tryKeyword("UNION")) {
                int a = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                c.expectChar(',');
                int b = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                c.expectKeyword("BY");
                id = builder.unionOp(a, b, parsePlusList(c), label);
            } else if (c.tryKeyword("JOIN")) {
                int a = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                c.expectChar(',');
                int b = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                c.expectKeyword("BY");
                id = builder.join(a, b, parseTimesList(c), label);
            } else if (c.tryKeyword("RENAME")) {
                int in0 = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                c.expectKeyword("FROM");
                std::string from = c.eatIdent("attribute");
                c.expectKeyword("TO");
                std::string to = c.eatIdent("attribute");
                id = builder.rename(in0, from, to, label);
            } else if (c.tryKeyword("SORT")) {
                int in0 = resolveOperand(c, builder, c.eatIdent("plan identifier"));
                c.expectKeyword("TO");
                id = builder.sort(in0, AccessPath::parse(c.eatGroup('[', ']')), label);
            } else {
                c.fail("expected LOAD, MAP, EXT, AGG, UNION, JOIN, RENAME, or SORT");
            }
            if (!c.atEnd()) c.fail("unexpected trailing text");
            builder.bindName(name, id);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            // Shape and binding problems get the statement position attached.
            throw PlanError("line " + std::to_string(lineNo) + ": " + e.what());
        }
    }
    LogicalPlan plan = builder.finish();
    if (plan.nodes.empty()) throw ParseError(lineNo, 1, "empty plan");
    return plan;
}

LogicalPlan parsePlanDsl(const std::string& text, const storage::Catalog& catalog) {
    return parsePlanDsl(text, catalogResolver(catalog));
}

// ---------------------------------------------------------------------------

namespace {

std::string labelText(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

std::string quoted(const std::string& name) {
    return ScalarValue::utf8(name).toLiteral();
}

} // namespace

std::string printPlanDsl(const LogicalPlan& plan) {
    std::ostringstream os;
    std::vector<std::string> nameOf(plan.nodes.size());
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
        const LogicalNode& n = plan.nodes[i];
        nameOf[i] = n.name.empty() ? "_" + std::to_string(i) : n.name;
    }
    double prev = 0;
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
        const LogicalNode& n = plan.nodes[i];
        if (n.label != std::floor(prev) + 1) os << labelText(n.label) << ": ";
        prev = n.label;
        auto in = [&](std::size_t k) -> const std::string& {
            return nameOf[static_cast<std::size_t>(n.in.at(k))];
        };
        switch (n.op) {
            case LogicalOp::Load:
                os << nameOf[i] << " = LOAD " << quoted(n.table);
                if (n.lo) os << " FROM " << n.lo->toLiteral();
                if (n.hi) os << " TO " << n.hi->toLiteral();
                break;
            case LogicalOp::Map: {
                os << nameOf[i] << " = MAP " << in(0) << " BY [";
                const auto& row = n.fn->rows().front();
                for (std::size_t k = 0; k < n.fn->valueNames().size(); ++k) {
                    if (k > 0) os << ", ";
                    os << n.fn->valueNames()[k] << ": " << row.valExprs[k]->print();
                }
                os << "]";
                break;
            }
            case LogicalOp::Ext:
                os << nameOf[i] << " = EXT " << in(0) << " BY " << n.fn->serialize();
                break;
            case LogicalOp::Agg: {
                os << nameOf[i] << " = AGG " << in(0);
                if (!n.onKeys.empty()) {
                    os << " ON ";
                    for (std::size_t k = 0; k < n.onKeys.size(); ++k)
                        os << (k ? ", " : "") << n.onKeys[k];
                }
                os << " BY [";
                std::size_t k = 0;
                for (const auto& [attr, fn] : n.plus)
                    os << (k++ ? ", " : "") << attr << ": " << fn.serialize();
                os << "]";
                break;
            }
            case LogicalOp::Union: {
                os << nameOf[i] << " = UNION " << in(0) << ", " << in(1) << " BY [";
                std::size_t k = 0;
                for (const auto& [attr, fn] : n.plus)
                    os << (k++ ? ", " : "") << attr << ": " << fn.serialize();
                os << "]";
                break;
            }
            case LogicalOp::Join: {
                os << nameOf[i] << " = JOIN " << in(0) << ", " << in(1) << " BY [";
                std::size_t k = 0;
                for (const auto& [attr, fn] : n.times)
                    os << (k++ ? ", " : "") << attr << ": " << fn.serialize();
                os << "]";
                break;
            }
            case LogicalOp::Rename:
                os << nameOf[i] << " = RENAME " << in(0) << " FROM " << n.renameFrom << " TO "
                   << n.renameTo;
                break;
            case LogicalOp::Sort:
                if (nameOf[i] == in(0)) os << "SORT " << in(0);
                else os << nameOf[i] << " = SORT " << in(0);
                os << " TO " << n.accessPath.toText();
                break;
            case LogicalOp::Store:
                os << "STORE " << in(0);
                if (n.table != in(0)) os << " AS " << quoted(n.table);
                if (n.upperTriangle) os << " UPPER_TRIANGLE";
                break;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace lara::plan
