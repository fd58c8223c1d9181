#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "laradb/udf.hpp"

using namespace lara;
using namespace lara::core;
using namespace lara::udf;

namespace {

ScalarValue I(std::int64_t v) { return ScalarValue::i64(v); }
ScalarValue F(double v) { return ScalarValue::f64(v); }
ScalarValue N() { return ScalarValue::null(); }

TableSchema sensorSchema() {
    return TableSchema({
        AttributeSchema::key("t", ScalarType::Int64),
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    });
}

} // namespace

TEST_CASE("expressions print back to their source form") {
    for (const char* text : {
             "if(460 <= t && t <= 860, v, null)",
             "(v + v') / 2.0",
             "(t - 10) / 60 * 60 + 40",
             "v / cnt",
             "!(a = b) || isNull(v)",
             "'it''s' != c",
             "ntz(v) + bin(t)",
             "1 - (2 - 3)",
         }) {
        ExprPtr e = parseExpr(text);
        CHECK(e->print() == text);
        CHECK(parseExpr(e->print())->equals(*e));
    }
    // Redundant parentheses are dropped, precedence is preserved.
    CHECK(parseExpr("(v) + ((cnt))")->print() == "v + cnt");
    CHECK(parseExpr("v + cnt * 2")->print() == "v + cnt * 2");
    CHECK(parseExpr("(v + cnt) * 2")->print() == "(v + cnt) * 2");
    CHECK_THROWS_AS(parseExpr("v +"), ParseError);
    CHECK_THROWS_AS(parseExpr("frobnicate(v)"), ParseError);
    CHECK_THROWS_AS(parseExpr("if(1, 2)"), ParseError); // wrong arity
}

TEST_CASE("evaluation: nulls, promotion, comparisons, conditionals") {
    TupleRow row = TupleRow::make({{"t", I(440)}, {"v", F(38.6)}});

    // The range filter from the documentation: out-of-range times map to null.
    ExprPtr filter = parseExpr("if(460 <= t && t <= 860, v, null)");
    CHECK(evalScalarExpr(*filter, row).isNull());
    TupleRow in = TupleRow::make({{"t", I(466)}, {"v", F(55.2)}});
    CHECK(evalScalarExpr(*filter, in) == F(55.2));

    CHECK(evalScalarExpr(*parseExpr("7 / 2"), row) == I(3));      // int division truncates
    CHECK(evalScalarExpr(*parseExpr("7 / 2.0"), row) == F(3.5));  // mixing promotes
    CHECK(evalScalarExpr(*parseExpr("7 / 0"), row).isNull());     // no division error
    CHECK(evalScalarExpr(*parseExpr("v + null"), row).isNull());  // null propagates
    CHECK(evalScalarExpr(*parseExpr("null < 5"), row) == I(0));   // null compares false
    CHECK(evalScalarExpr(*parseExpr("isNull(null)"), row) == I(1));
    CHECK(evalScalarExpr(*parseExpr("if(null, 1, 2)"), row) == I(2));
    CHECK(evalScalarExpr(*parseExpr("2 < t"), row) == I(1));
    CHECK_THROWS_AS(evalScalarExpr(*parseExpr("missing + 1"), row), UsageError);
}

TEST_CASE("bin rounds to the nearest minute; ntz zeroes nulls") {
    CHECK(binToNearestMinute(466) == 480);
    CHECK(binToNearestMinute(440) == 420);
    CHECK(binToNearestMinute(450) == 480); // ties round upward
    CHECK(binToNearestMinute(-10) == 0);
    CHECK(binToNearestMinute(-40) == -60);
    TupleRow row = TupleRow::make({{"t", I(466)}});
    CHECK(evalScalarExpr(*parseExpr("bin(t)"), row) == I(480));

    CHECK(ntz(N(), ScalarType::Float64) == F(0.0));
    CHECK(ntz(N(), ScalarType::Int64) == I(0));
    CHECK(ntz(F(3.5), ScalarType::Float64) == F(3.5));
}

TEST_CASE("static type inference") {
    TableSchema s({
        AttributeSchema::key("t", ScalarType::Int64),
        AttributeSchema::value("v", ScalarType::Float64, N()),
        AttributeSchema::value("cnt", ScalarType::Int64, I(0)),
        AttributeSchema::value("name", ScalarType::Utf8, N()),
    });
    CHECK(inferExprType(*parseExpr("v / cnt"), s) == ScalarType::Float64);
    CHECK(inferExprType(*parseExpr("cnt + 1"), s) == ScalarType::Int64);
    CHECK(inferExprType(*parseExpr("t < 5"), s) == ScalarType::Int64);
    CHECK(inferExprType(*parseExpr("if(isNull(v), 0, v * 2.0)"), s) == ScalarType::Float64);
    CHECK(inferExprType(*parseExpr("bin(t)"), s) == ScalarType::Int64);
    CHECK(inferExprType(*parseExpr("null"), s) == ScalarType::Null);
    CHECK_THROWS_AS(inferExprType(*parseExpr("name + 1"), s), UsageError);
    CHECK_THROWS_AS(inferExprType(*parseExpr("nope"), s), UsageError);
}

// ---------------------------------------------------------------------------
// Fold functions

TEST_CASE("builtin folds verify their declared laws") {
    // sum over a nullable column: identity is null, null is skipped.
    VerifyReport r = verifyPlusProperties(PlusFn::builtin("sum").withIdentity(N()));
    INFO(r.toText());
    CHECK(r.allPassed());

    // sum over a counter column: identity is 0.
    r = verifyPlusProperties(PlusFn::builtin("sum").withIdentity(I(0)), kDefaultSamples,
                             ScalarType::Int64);
    CHECK(r.allPassed());

    // any keeps the first non-identity argument: associative and idempotent.
    PlusFn any = PlusFn::builtin("any").withIdentity(N());
    CHECK(verifyPlusProperties(any).allPassed());
    CHECK(any.apply(N(), F(5.0)) == F(5.0));
    CHECK(any.apply(F(5.0), F(7.0)) == F(5.0));
    CHECK_FALSE(any.commutative());

    CHECK(verifyPlusProperties(PlusFn::builtin("max").withIdentity(N())).allPassed());
    CHECK(verifyPlusProperties(PlusFn::builtin("or").withIdentity(N()), kDefaultSamples,
                               ScalarType::Bool)
              .allPassed());
    CHECK_THROWS_AS(PlusFn::builtin("median"), UsageError);
}

TEST_CASE("law violations are found and reported with counterexamples") {
    // max with identity 0 fails on negative values: 0 is not its identity.
    VerifyReport r = verifyPlusProperties(PlusFn::builtin("max").withIdentity(F(0.0)));
    CHECK_FALSE(r.allPassed());
    CHECK(r.failing()->law.find("identity") != std::string::npos);
    CHECK_FALSE(r.failing()->counterexample.empty());
    CHECK_THROWS_AS(r.require(), PropertyError);

    // Subtraction declared associative is refuted by sampling (alongside its
    // one-sided identity failure).
    PlusFn sub = PlusFn::fromExpr("v", parseExpr("v - v'"), /*assoc=*/true, false, false)
                     .withIdentity(F(0.0));
    r = verifyPlusProperties(sub);
    CHECK_FALSE(r.allPassed());
    bool assocRefuted = false;
    for (const auto& c : r.checks)
        if (c.law == "associativity" && !c.passed && !c.counterexample.empty())
            assocRefuted = true;
    CHECK(assocRefuted);

    // An unbound identity is itself a reportable failure.
    CHECK_FALSE(verifyPlusProperties(PlusFn::builtin("sum")).allPassed());
}

TEST_CASE("verification is deterministic across runs") {
    PlusFn sub = PlusFn::fromExpr("v", parseExpr("v - v'"), true, false, false)
                     .withIdentity(F(0.0));
    VerifyReport a = verifyPlusProperties(sub);
    VerifyReport b = verifyPlusProperties(sub);
    CHECK(a.toText() == b.toText()); // same seed, same counterexample
}

TEST_CASE("combining functions verify annihilators against input defaults") {
    // minus over two nullable columns: null (*) v = null = combined default.
    VerifyReport r = verifyTimesProperties(TimesFn::builtin("minus").withAnnihilators(N(), N()));
    INFO(r.toText());
    CHECK(r.allPassed());

    // times over two zero-default columns distributes over sum.
    PlusFn sum0 = PlusFn::builtin("sum").withIdentity(F(0.0));
    r = verifyTimesProperties(TimesFn::builtin("times").withAnnihilators(F(0.0), F(0.0)), &sum0);
    INFO(r.toText());
    CHECK(r.allPassed());

    // times with mismatched defaults: v (*) 0 = 0 but the combined default
    // is null, so the right annihilator law fails.
    r = verifyTimesProperties(TimesFn::builtin("times").withAnnihilators(N(), F(0.0)));
    CHECK_FALSE(r.allPassed());
    CHECK(r.failing()->law.find("annihilator") != std::string::npos);

    // The covariance-style expression: v / (v' - 1) over nullable columns.
    TimesFn ratio = TimesFn::fromExpr("v", parseExpr("v / (v' - 1)"), false)
                        .withAnnihilators(N(), N());
    r = verifyTimesProperties(ratio);
    INFO(r.toText());
    CHECK(r.allPassed());
    CHECK(ratio.apply(F(3.0), F(4.0)) == F(1.0));
}

TEST_CASE("ext functions bind against an input schema and keep defaults empty") {
    // The binning function: duplicate each reading into an averaging window,
    // tagging it with a count for the later mean.
    ExtFn fn = ExtFn::deserialize(
        "{KEYS [t2: ((t - 10) / 60) * 60 + 40] "
        "VALS [v: v, cnt: if(isNull(v), 0, 1)]} MONOTONE [t]");
    CHECK(fn.newKeyNames() == std::vector<std::string>{"t2"});
    CHECK(fn.valueNames() == std::vector<std::string>{"v", "cnt"});
    CHECK(fn.monotoneIn() == std::vector<std::string>{"t"});

    VerifyReport r = verifyExtProperties(fn, sensorSchema());
    INFO(r.toText());
    CHECK(r.allPassed());
    CHECK(fn.outputDefaults() == std::vector<ScalarValue>{N(), I(0)});
    CHECK(fn.valueTypes() == std::vector<ScalarType>{ScalarType::Float64, ScalarType::Int64});

    TupleRow row = TupleRow::make(
        {{"t", I(466)}, {"c", ScalarValue::utf8("temp")}, {"v", F(55.2)}});
    auto emitted = fn.applyToRow(row);
    REQUIRE(emitted.size() == 1);
    CHECK(emitted[0].newKeys == std::vector<ScalarValue>{I(460)});
    CHECK(emitted[0].values == std::vector<ScalarValue>{F(55.2), I(1)});

    // Serialized form round-trips.
    CHECK(ExtFn::deserialize(fn.serialize()).serialize() == fn.serialize());

    // Multi-row tableaus chain with ROW; all rows share the attribute lists.
    ExtFn two = ExtFn::deserialize(
        "{KEYS [d: t - 1] VALS [v: v]} ROW {KEYS [d: t + 1] VALS [v: v]}");
    CHECK(two.rows().size() == 2);
    CHECK(ExtFn::deserialize(two.serialize()).serialize() == two.serialize());
    CHECK_THROWS_AS((void)ExtFn::deserialize("{KEYS [d: t] VALS [v: v]} ROW {VALS [v: v]}"),
                    ParseError);
}

TEST_CASE("monotonicity declarations are spot-checked") {
    TableSchema s = sensorSchema();

    ExtFn bin = ExtFn::deserialize("{KEYS [t2: ((t - 10) / 60) * 60 + 40] VALS [v: v]}");
    bin.bind(s);
    CHECK(checkMonotone(bin, "t").allPassed());

    // A constant key is (weakly) monotone in everything.
    ExtFn constant = ExtFn::deserialize("{KEYS [z: 7] VALS [v: v]}");
    constant.bind(s);
    CHECK(checkMonotone(constant, "t").allPassed());
    CHECK(checkMonotone(constant, "c").allPassed());

    // Negation reverses order: refuted, e.g. by times 1 < 2 mapping to -1 > -2.
    ExtFn negate = ExtFn::deserialize("{KEYS [z: 0 - t] VALS [v: v]}");
    negate.bind(s);
    VerifyReport r = checkMonotone(negate, "t");
    CHECK_FALSE(r.allPassed());
    CHECK_FALSE(r.failing()->counterexample.empty());

    // Only input keys can carry a monotonicity declaration.
    CHECK_FALSE(checkMonotone(bin, "v").allPassed());
}

TEST_CASE("fold and combine functions serialize with their declarations") {
    PlusFn sub = PlusFn::fromExpr("v", parseExpr("v - v'"), false, false, false);
    CHECK(PlusFn::deserialize(sub.serialize(), "v").serialize() == sub.serialize());
    CHECK(PlusFn::deserialize("sum", "v").name() == "sum");

    TimesFn ratio = TimesFn::fromExpr("v", parseExpr("v / (v' - 1)"), false, "sum");
    TimesFn back = TimesFn::deserialize(ratio.serialize(), "v");
    CHECK(back.serialize() == ratio.serialize());
    CHECK(back.distributesOver() == "sum");
    CHECK(TimesFn::deserialize("minus", "v").name() == "minus");
}
