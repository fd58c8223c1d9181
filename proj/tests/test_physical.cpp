#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "laradb/metrics.hpp"
#include "laradb/oracle.hpp"
#include "laradb/stream.hpp"

using namespace lara;
using namespace lara::core;
using namespace lara::physical;
using storage::AccessPath;
using storage::StoreOptions;

namespace {

namespace fs = std::filesystem;

ScalarValue I(std::int64_t v) { return ScalarValue::i64(v); }
ScalarValue F(double v) { return ScalarValue::f64(v); }
ScalarValue S(std::string v) { return ScalarValue::utf8(std::move(v)); }
ScalarValue N() { return ScalarValue::null(); }

/// Self-cleaning scratch directory for on-disk tests.
struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("laradb-phys-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

TableSchema sensorSchema() {
    return TableSchema({
        AttributeSchema::key("t", ScalarType::Int64),
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    });
}

AssociativeTable sensorReadings() {
    AssociativeTable t(sensorSchema());
    t.put({I(440), S("hum")}, {F(38.6)});
    t.put({I(466), S("temp")}, {F(55.2)});
    t.put({I(466), S("hum")}, {F(40.1)});
    t.put({I(492), S("temp")}, {F(56.3)});
    t.put({I(492), S("hum")}, {F(35.0)});
    t.put({I(528), S("temp")}, {F(56.5)});
    return t;
}

/// The minute-binning tableau used throughout the sensor pipeline: one new
/// key t' (the bin), values carried through plus a presence count.
udf::ExtFn binTableau() {
    return udf::ExtFn::deserialize("{KEYS [t': ((t - 10) / 60) * 60 + 40] "
                                   "VALS [v: v, cnt: if(isNull(v), 0, 1)]} MONOTONE [t]");
}

TableSchema binnedSchema() {
    return TableSchema({
        AttributeSchema::key("t", ScalarType::Int64),
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::key("t'", ScalarType::Int64),
        AttributeSchema::value("v", ScalarType::Float64, N()),
        AttributeSchema::value("cnt", ScalarType::Int64, I(0)),
    });
}

/// Binning applied to the readings with t in [460, 860].
AssociativeTable binnedReadings() {
    AssociativeTable t(binnedSchema());
    t.put({I(466), S("temp"), I(460)}, {F(55.2), I(1)});
    t.put({I(466), S("hum"), I(460)}, {F(40.1), I(1)});
    t.put({I(492), S("temp"), I(520)}, {F(56.3), I(1)});
    t.put({I(492), S("hum"), I(520)}, {F(35.0), I(1)});
    t.put({I(528), S("temp"), I(520)}, {F(56.5), I(1)});
    return t;
}

/// Centered per-bin means (the input to the covariance half of the demo).
AssociativeTable centeredMeans() {
    AssociativeTable t(TableSchema({
        AttributeSchema::key("t'", ScalarType::Int64),
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    }));
    t.put({I(460), S("temp")}, {F(0.4)});
    t.put({I(460), S("hum")}, {F(1.2)});
    t.put({I(520), S("temp")}, {F(-0.4)});
    t.put({I(520), S("hum")}, {F(-1.2)});
    return t;
}

std::map<std::string, udf::PlusFn> sumsFor(std::initializer_list<std::string> attrs) {
    std::map<std::string, udf::PlusFn> m;
    for (const auto& a : attrs) m.emplace(a, udf::PlusFn::builtin("sum"));
    return m;
}

std::map<std::string, udf::TimesFn> timesFor(std::initializer_list<std::string> attrs) {
    std::map<std::string, udf::TimesFn> m;
    for (const auto& a : attrs) m.emplace(a, udf::TimesFn::builtin("times"));
    return m;
}

std::vector<TupleRow> collect(RowStream& s) {
    std::vector<TupleRow> rows;
    while (auto r = s.next()) rows.push_back(*r);
    return rows;
}

std::string slurp(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void checkTablesEqual(const AssociativeTable& got, const AssociativeTable& want,
                      double tol = 0.0) {
    std::string why;
    bool eq = canonicallyEqual(got, want, tol, &why);
    CHECK_MESSAGE(eq, why);
}

/// A deliberately misbehaving stream for the order-check tests.
class ScriptedStream final : public RowStream {
public:
    ScriptedStream(TableSchema schema, AccessPath path, std::vector<std::vector<ScalarValue>> rows)
        : RowStream(std::move(schema), std::move(path)), rows_(std::move(rows)) {}
    std::optional<TupleRow> next() override {
        if (at_ >= rows_.size()) return std::nullopt;
        return TupleRow(names_, rows_[at_++]);
    }

private:
    std::vector<std::vector<ScalarValue>> rows_;
    std::size_t at_ = 0;
};

} // namespace

TEST_CASE("table streams come out in path order, keys first") {
    auto s = streamTable(sensorReadings(), AccessPath({"c", "t"}));
    CHECK(*s->names() == std::vector<std::string>{"c", "t", "v"});
    auto rows = collect(*s);
    REQUIRE(rows.size() == 6);
    // All hum rows sort before the temp rows under the [c, t] path.
    CHECK(rows[0].get("c") == S("hum"));
    CHECK(rows[0].get("t") == I(440));
    CHECK(rows[2].get("t") == I(492));
    CHECK(rows[3].get("c") == S("temp"));

    auto again = streamTable(sensorReadings(), AccessPath({"c", "t"}));
    checkTablesEqual(materialize(*again), sensorReadings());
}

TEST_CASE("streams refuse paths that do not cover the key attributes") {
    CHECK_THROWS_AS(streamTable(sensorReadings(), AccessPath({"t"})), Error);
    CHECK_THROWS_AS(streamTable(sensorReadings(), AccessPath({"t", "v"})), Error);
}

TEST_CASE("load range scans an inclusive window on the leading key") {
    TempDir dir;
    storage::Catalog cat(dir.str());
    storage::storeTable(cat.dirFor("s1"), sensorReadings(), AccessPath({"t", "c"}), {});

    Metrics::global().reset();
    auto s = loadRange(cat, "s1", std::vector<ScalarValue>{I(460)}, std::vector<ScalarValue>{I(860)});
    auto rows = collect(*s);
    CHECK(rows.size() == 5); // the t = 440 reading falls outside the window
    CHECK(rows.front().get("t") == I(466));
    CHECK(Metrics::global().rowsIn.load() == 5);

    auto all = loadRange(cat, "s1");
    CHECK(collect(*all).size() == 6);
}

TEST_CASE("load then store reproduces identical bytes") {
    TempDir dir;
    StoreOptions opts;
    opts.partitions = 2;
    auto first = storage::storeTable(dir.sub("orig"), sensorReadings(), AccessPath({"t", "c"}), opts);
    auto copy = sortToStore(scanStore(std::make_shared<storage::SortedTableStore>(first)),
                            dir.sub("copy"), AccessPath({"t", "c"}), opts);

    REQUIRE(first.partitions().size() == copy.partitions().size());
    for (std::size_t i = 0; i < first.partitions().size(); ++i) {
        std::string a = slurp(dir.sub("orig") + "/" + first.partitions()[i].file);
        std::string b = slurp(dir.sub("copy") + "/" + copy.partitions()[i].file);
        CHECK(a == b);
    }
}

TEST_CASE("merge join matches the reference on the centered-means self-join") {
    AssociativeTable u = centeredMeans();
    AssociativeTable u1 = oracleRename(u, "c", "c'");

    auto joined = mergeJoin(streamTable(u, AccessPath({"t'", "c"})),
                            renameStream(streamTable(u, AccessPath({"t'", "c"})), {{"c", "c'"}}),
                            timesFor({"v"}));
    CHECK(joined->path() == AccessPath({"t'", "c", "c'"}));
    auto rows = collect(*joined);
    REQUIRE(rows.size() == 8); // two bins, each a 2x2 channel product

    // First bin, in [t', c, c'] order: (hum,hum), (hum,temp), (temp,hum), (temp,temp).
    CHECK(rows[0].get("c") == S("hum"));
    CHECK(rows[0].get("c'") == S("hum"));
    CHECK(rows[1].get("c") == S("hum"));
    CHECK(rows[1].get("c'") == S("temp"));
    CHECK(rows[0].get("v").asF64() == doctest::Approx(1.44).epsilon(1e-12));

    auto joinedAgain = mergeJoin(streamTable(u, AccessPath({"t'", "c"})),
                                 renameStream(streamTable(u, AccessPath({"t'", "c"})), {{"c", "c'"}}),
                                 timesFor({"v"}));
    checkTablesEqual(materialize(*joinedAgain), oracleJoin(u, u1, timesFor({"v"})), 1e-9);
}

TEST_CASE("summing the self-join over bins gives the covariance numerators") {
    TempDir dir;
    AssociativeTable u = centeredMeans();
    auto joined = mergeJoin(streamTable(u, AccessPath({"t'", "c"})),
                            renameStream(streamTable(u, AccessPath({"t'", "c"})), {{"c", "c'"}}),
                            timesFor({"v"}));
    auto store = sortAgg(std::move(joined), dir.sub("c"), AccessPath({"c", "c'"}),
                         sumsFor({"v"}), {});

    AssociativeTable want(TableSchema({
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::key("c'", ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    }));
    want.put({S("temp"), S("temp")}, {F(0.32)});
    want.put({S("temp"), S("hum")}, {F(0.96)});
    want.put({S("hum"), S("temp")}, {F(0.96)});
    want.put({S("hum"), S("hum")}, {F(2.88)});
    checkTablesEqual(store.toTable(), want, 1e-9);
}

TEST_CASE("merge join spills large groups and still agrees with the reference") {
    TableSchema as({AttributeSchema::key("k", ScalarType::Int64),
                    AttributeSchema::key("i", ScalarType::Int64),
                    AttributeSchema::value("v", ScalarType::Int64, I(0))});
    TableSchema bs({AttributeSchema::key("k", ScalarType::Int64),
                    AttributeSchema::key("j", ScalarType::Int64),
                    AttributeSchema::value("v", ScalarType::Int64, I(0))});
    AssociativeTable a(as), b(bs);
    for (int i = 0; i < 40; ++i) a.put({I(0), I(i)}, {I(i + 1)});
    for (int j = 0; j < 30; ++j) b.put({I(0), I(j)}, {I(j + 1)});

    // Budget of 8 rows forces both group buffers through their spill paths.
    auto joined = mergeJoin(streamTable(a, AccessPath({"k", "i"})),
                            streamTable(b, AccessPath({"k", "j"})), timesFor({"v"}), 8);
    AssociativeTable got = materialize(*joined);
    CHECK(got.supportSize() == 40u * 30u);
    checkTablesEqual(got, oracleJoin(a, b, timesFor({"v"})));
}

TEST_CASE("merge join with no shared keys is a cartesian product") {
    TableSchema as({AttributeSchema::key("x", ScalarType::Int64),
                    AttributeSchema::value("v", ScalarType::Int64, I(0))});
    TableSchema bs({AttributeSchema::key("y", ScalarType::Int64),
                    AttributeSchema::value("v", ScalarType::Int64, I(0))});
    AssociativeTable a(as), b(bs);
    for (int i = 1; i <= 3; ++i) a.put({I(i)}, {I(i)});
    for (int j = 1; j <= 2; ++j) b.put({I(j)}, {I(10 * j)});

    auto joined = mergeJoin(streamTable(a, AccessPath({"x"})), streamTable(b, AccessPath({"y"})),
                            timesFor({"v"}));
    AssociativeTable got = materialize(*joined);
    CHECK(got.supportSize() == 6);
    CHECK(got.lookupValues({I(3), I(2)}) == std::vector<ScalarValue>{I(60)});
    checkTablesEqual(got, oracleJoin(a, b, timesFor({"v"})));
}

TEST_CASE("merge join skips groups present on only one side") {
    TableSchema ks({AttributeSchema::key("k", ScalarType::Int64),
                    AttributeSchema::value("v", ScalarType::Int64, I(0))});
    AssociativeTable a(ks), b(ks);
    a.put({I(1)}, {I(2)});
    a.put({I(2)}, {I(3)});
    a.put({I(3)}, {I(4)});
    b.put({I(2)}, {I(10)});
    b.put({I(3)}, {I(20)});
    b.put({I(4)}, {I(30)});

    auto joined = mergeJoin(streamTable(a, AccessPath({"k"})), streamTable(b, AccessPath({"k"})),
                            timesFor({"v"}));
    AssociativeTable got = materialize(*joined);
    CHECK(got.supportSize() == 2);
    CHECK(got.lookupValues({I(2)}) == std::vector<ScalarValue>{I(30)});
    CHECK(got.lookupValues({I(3)}) == std::vector<ScalarValue>{I(80)});
    checkTablesEqual(got, oracleJoin(a, b, timesFor({"v"})));
}

TEST_CASE("merge join demands the shared keys as a common path prefix") {
    AssociativeTable u = centeredMeans();
    // Sorting the right side by [c', t'] breaks the shared-prefix requirement.
    CHECK_THROWS_WITH_AS(
        mergeJoin(streamTable(u, AccessPath({"t'", "c"})),
                  renameStream(streamTable(u, AccessPath({"c", "t'"})), {{"c", "c'"}}),
                  timesFor({"v"})),
        doctest::Contains("sort required"), PlanError);
}

TEST_CASE("merge join expression combiners see the output keys") {
    AssociativeTable u = centeredMeans();
    // Key references must hide behind a condition that the default input
    // short-circuits: the combined default has to be key-independent.
    std::map<std::string, udf::TimesFn> times;
    times.emplace("v", udf::TimesFn::fromExpr(
                           "v",
                           udf::parseExpr("if(isNull(v), null, (v + v') * if(t' < 500, 1, 2))"),
                           false));

    auto joined = mergeJoin(streamTable(u, AccessPath({"t'", "c"})),
                            renameStream(streamTable(u, AccessPath({"t'", "c"})), {{"c", "c'"}}),
                            times);
    AssociativeTable got = materialize(*joined);
    CHECK(got.lookupValues({I(460), S("hum"), S("temp")}) ==
          std::vector<ScalarValue>{F(1.2 + 0.4)});
    CHECK(got.lookupValues({I(520), S("hum"), S("temp")})[0].asF64() ==
          doctest::Approx((-1.2 + -0.4) * 2).epsilon(1e-12));
    checkTablesEqual(got, oracleJoin(u, oracleRename(u, "c", "c'"), times), 1e-12);
}

TEST_CASE("merge aggregate folds equal prefixes in stream order") {
    auto s = streamTable(binnedReadings(), AccessPath({"t'", "c", "t"}));
    auto agg = mergeUnionAgg(std::move(s), nullptr, AccessPath({"t'", "c"}),
                             sumsFor({"v", "cnt"}));
    CHECK(agg->path() == AccessPath({"t'", "c"}));
    AssociativeTable got = materialize(*agg);
    CHECK(got.supportSize() == 4);
    auto vals = got.lookupValues({S("temp"), I(520)}); // schema key order is [c, t']
    CHECK(vals[0].asF64() == doctest::Approx(112.8).epsilon(1e-12));
    CHECK(vals[1] == I(2));
    checkTablesEqual(got, oracleAgg(binnedReadings(), {"t'", "c"}, sumsFor({"v", "cnt"})));
}

TEST_CASE("aggregation onto a key permutation of the path works by name") {
    auto agg = mergeUnionAgg(streamTable(sensorReadings(), AccessPath({"c", "t"})), nullptr,
                             AccessPath({"c"}), sumsFor({"v"}));
    AssociativeTable got = materialize(*agg);
    CHECK(got.supportSize() == 2);
    CHECK(got.lookupValues({S("hum")})[0].asF64() == doctest::Approx(113.7).epsilon(1e-12));
    CHECK(got.lookupValues({S("temp")})[0].asF64() == doctest::Approx(168.0).epsilon(1e-12));
    checkTablesEqual(got, oracleAgg(sensorReadings(), {"c"}, sumsFor({"v"})), 1e-12);
}

TEST_CASE("zero-key aggregation collapses everything to one row") {
    auto agg = mergeUnionAgg(streamTable(binnedReadings(), AccessPath({"t", "c", "t'"})), nullptr,
                             AccessPath(), sumsFor({"v", "cnt"}));
    AssociativeTable got = materialize(*agg);
    CHECK(got.supportSize() == 1);
    CHECK(got.lookupValues({})[1] == I(5));
}

TEST_CASE("aggregation onto the full key set is the identity") {
    auto agg = mergeUnionAgg(streamTable(sensorReadings(), AccessPath({"t", "c"})), nullptr,
                             AccessPath({"t", "c"}), sumsFor({"v"}));
    checkTablesEqual(materialize(*agg), sensorReadings());
}

TEST_CASE("binary merge union folds left rows before right ones") {
    TableSchema ks({AttributeSchema::key("k", ScalarType::Int64),
                    AttributeSchema::value("v", ScalarType::Int64, I(0))});
    AssociativeTable a(ks), b(ks);
    a.put({I(1)}, {I(5)});
    a.put({I(2)}, {I(7)});
    b.put({I(1)}, {I(9)});
    b.put({I(3)}, {I(4)});

    std::map<std::string, udf::PlusFn> any;
    any.emplace("v", udf::PlusFn::builtin("any"));
    auto u = mergeUnionAgg(streamTable(a, AccessPath({"k"})), streamTable(b, AccessPath({"k"})),
                           AccessPath({"k"}), any);
    AssociativeTable got = materialize(*u);
    CHECK(got.lookupValues({I(1)}) == std::vector<ScalarValue>{I(5)}); // left wins under `any`
    CHECK(got.lookupValues({I(3)}) == std::vector<ScalarValue>{I(4)});
    checkTablesEqual(got, oracleUnion(a, b, any));
}

TEST_CASE("merge union requires the group keys as a path prefix on both sides") {
    AssociativeTable u = centeredMeans();
    CHECK_THROWS_WITH_AS(mergeUnionAgg(streamTable(u, AccessPath({"c", "t'"})),
                                       streamTable(u, AccessPath({"t'", "c"})),
                                       AccessPath({"t'", "c"}), sumsFor({"v"})),
                         doctest::Contains("sort required"), PlanError);
}

TEST_CASE("merge inputs reject unsorted and duplicated rows") {
    TableSchema ks({AttributeSchema::key("k", ScalarType::Int64),
                    AttributeSchema::value("v", ScalarType::Int64, I(0))});

    auto bad = std::make_unique<ScriptedStream>(
        ks, AccessPath({"k"}),
        std::vector<std::vector<ScalarValue>>{{I(2), I(1)}, {I(1), I(1)}});
    auto agg = mergeUnionAgg(std::move(bad), nullptr, AccessPath({"k"}), sumsFor({"v"}));
    CHECK_THROWS_WITH_AS(collect(*agg), doctest::Contains("unsorted"), Error);

    auto dup = std::make_unique<ScriptedStream>(
        ks, AccessPath({"k"}),
        std::vector<std::vector<ScalarValue>>{{I(1), I(1)}, {I(1), I(2)}});
    CHECK_THROWS_AS(materialize(*dup), Error);

    auto wrapped = orderChecked(std::make_unique<ScriptedStream>(
        ks, AccessPath({"k"}),
        std::vector<std::vector<ScalarValue>>{{I(3), I(1)}, {I(2), I(1)}}));
    CHECK_THROWS_WITH_AS(collect(*wrapped), doctest::Contains("unsorted"), Error);
}

TEST_CASE("tableau stream bins the windowed readings") {
    TempDir dir;
    storage::Catalog cat(dir.str());
    storage::storeTable(cat.dirFor("s1"), sensorReadings(), AccessPath({"t", "c"}), {});

    auto binned = extMapStream(loadRange(cat, "s1", std::vector<ScalarValue>{I(460)},
                                         std::vector<ScalarValue>{I(860)}),
                               binTableau());
    CHECK(binned->path() == AccessPath({"t", "c", "t'"}));
    checkTablesEqual(materialize(*binned), binnedReadings());
}

TEST_CASE("map stream keeps the path and rewrites the values") {
    TempDir dir;
    auto binned = extMapStream(streamTable(sensorReadings(), AccessPath({"t", "c"})), binTableau());
    auto sums = sortAgg(std::move(binned), dir.sub("sums"), AccessPath({"t'", "c"}),
                        sumsFor({"v", "cnt"}), {});
    auto means = extMapStream(scanStore(std::make_shared<storage::SortedTableStore>(sums)),
                              udf::ExtFn::deserialize("{KEYS [] VALS [v: v / cnt]}"));
    CHECK(means->path() == AccessPath({"t'", "c"}));
    AssociativeTable got = materialize(*means);

    AssociativeTable want(TableSchema({
        AttributeSchema::key("t'", ScalarType::Int64),
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    }));
    want.put({I(460), S("temp")}, {F(55.2)});
    // No load window in this test, so the t = 440 reading joins the 460 bin.
    want.put({I(460), S("hum")}, {F((38.6 + 40.1) / 2)});
    want.put({I(520), S("temp")}, {F(56.4)});
    want.put({I(520), S("hum")}, {F(35.0)});
    checkTablesEqual(got, want, 1e-9);
}

TEST_CASE("tableaux emitting one key twice per row are rejected") {
    auto doubled = udf::ExtFn::deserialize(
        "{KEYS [d: t / 100] VALS [v: v]} ROW {KEYS [d: t / 100] VALS [v: v]}");
    auto s = extMapStream(streamTable(sensorReadings(), AccessPath({"t", "c"})), doubled);
    CHECK_THROWS_WITH_AS(collect(*s), doctest::Contains("same key twice"), UsageError);
}

TEST_CASE("ordered tableau stream emits the sort target directly") {
    TempDir dir;
    storage::Catalog cat(dir.str());
    storage::storeTable(cat.dirFor("s1"), sensorReadings(), AccessPath({"t", "c"}), {});

    auto load = [&]() {
        return loadRange(cat, "s1", std::vector<ScalarValue>{I(460)},
                         std::vector<ScalarValue>{I(860)});
    };

    // Budget 1 forces the group buffers through their spill path too.
    auto over = extOverStream(load(), binTableau(), AccessPath({"t'", "c", "t"}), 1);
    CHECK(over->path() == AccessPath({"t'", "c", "t"}));
    auto rows = collect(*over);
    REQUIRE(rows.size() == 5);
    // Bins 492 and 528 share t' = 520, so their emissions interleave:
    // correctness depends on buffering both groups as one run.
    CHECK(rows[2].get("t") == I(492));
    CHECK(rows[2].get("c") == S("hum"));
    CHECK(rows[3].get("t") == I(492));
    CHECK(rows[4].get("t") == I(528));

    auto again = extOverStream(load(), binTableau(), AccessPath({"t'", "c", "t"}));
    checkTablesEqual(materialize(*again), binnedReadings());
}

TEST_CASE("ordered tableau stream stays correct when monotonicity fails") {
    // A decreasing bin keeps every group overlapping the buffered run, so the
    // operator degrades to one full sort instead of emitting out of order.
    auto falling = udf::ExtFn::deserialize("{KEYS [d: 0 - t] VALS [v: v]} MONOTONE [t]");
    auto s = extOverStream(streamTable(sensorReadings(), AccessPath({"t", "c"})), falling,
                           AccessPath({"d", "t", "c"}));
    AssociativeTable got = materialize(*s);
    checkTablesEqual(got, oracleExt(sensorReadings(), falling));
}

TEST_CASE("ordered tableau stream rejects new keys that read beyond the lead") {
    auto mixed = udf::ExtFn::deserialize("{KEYS [d: t + ntz(v)] VALS [v: v]}");
    CHECK_THROWS_WITH_AS(extOverStream(streamTable(sensorReadings(), AccessPath({"t", "c"})),
                                       mixed, AccessPath({"d", "t", "c"})),
                         doctest::Contains("leading"), PlanError);
}

TEST_CASE("rename stream relabels keys and values in place") {
    auto r = renameStream(streamTable(sensorReadings(), AccessPath({"t", "c"})),
                          {{"c", "chan"}, {"v", "reading"}});
    CHECK(r->path() == AccessPath({"t", "chan"}));
    AssociativeTable got = materialize(*r);
    CHECK(got.schema().hasValue("reading"));
    checkTablesEqual(got, oracleRename(oracleRename(sensorReadings(), "c", "chan"), "v", "reading"));
}

TEST_CASE("sort-aggregate equals sort followed by merge-aggregate") {
    TempDir dir;
    TableSchema sch({AttributeSchema::key("a", ScalarType::Int64),
                     AttributeSchema::key("b", ScalarType::Int64),
                     AttributeSchema::value("v", ScalarType::Int64, I(0))});
    AssociativeTable t(sch);
    Rng rng(7);
    for (int i = 0; i < 400; ++i)
        t.put({I(static_cast<std::int64_t>(rng() % 20)), I(static_cast<std::int64_t>(rng() % 50))},
              {I(static_cast<std::int64_t>(rng() % 100) + 1)});

    StoreOptions tiny;
    tiny.memBudgetRows = 16; // forces several folded spill runs
    auto fused = sortAgg(streamTable(t, AccessPath({"a", "b"})), dir.sub("fused"),
                         AccessPath({"a"}), sumsFor({"v"}), tiny);

    auto slow = mergeUnionAgg(streamTable(t, AccessPath({"a", "b"})), nullptr, AccessPath({"a"}),
                              sumsFor({"v"}));
    checkTablesEqual(fused.toTable(), materialize(*slow));
    checkTablesEqual(fused.toTable(), oracleAgg(t, {"a"}, sumsFor({"v"})));
}

TEST_CASE("sort-aggregate materializes fewer rows than sorting everything") {
    TempDir dir;
    TableSchema sch({AttributeSchema::key("a", ScalarType::Int64),
                     AttributeSchema::key("b", ScalarType::Int64),
                     AttributeSchema::value("v", ScalarType::Int64, I(0))});
    AssociativeTable t(sch);
    Rng rng(8);
    for (int i = 0; i < 500; ++i)
        t.put({I(static_cast<std::int64_t>(rng() % 10)), I(static_cast<std::int64_t>(rng() % 200))},
              {I(static_cast<std::int64_t>(rng() % 100) + 1)});
    const std::uint64_t rows = t.supportSize();

    Metrics::global().reset();
    sortAgg(streamTable(t, AccessPath({"a", "b"})), dir.sub("fused"), AccessPath({"a"}),
            sumsFor({"v"}), {});
    const std::uint64_t fusedBuffered = Metrics::global().tuplesMaterialized.load();

    Metrics::global().reset();
    sortToStore(streamTable(t, AccessPath({"a", "b"})), dir.sub("plain"), AccessPath({"b", "a"}),
                {});
    const std::uint64_t sortBuffered = Metrics::global().tuplesMaterialized.load();

    CHECK(fusedBuffered == 10);      // one buffered row per distinct group
    CHECK(sortBuffered == rows);     // a real sort holds every row
    CHECK(fusedBuffered < sortBuffered);
}

TEST_CASE("sort-aggregate audits the identity law on live data") {
    TempDir dir;
    TableSchema sch({AttributeSchema::key("a", ScalarType::Int64),
                     AttributeSchema::key("b", ScalarType::Int64),
                     AttributeSchema::value("v", ScalarType::Int64, I(0))});
    AssociativeTable t(sch);
    t.put({I(1), I(1)}, {I(-5)}); // max with identity 0 misfolds negatives

    std::map<std::string, udf::PlusFn> maxes;
    maxes.emplace("v", udf::PlusFn::builtin("max"));
    CHECK_THROWS_WITH_AS(sortAgg(streamTable(t, AccessPath({"a", "b"})), dir.sub("bad"),
                                 AccessPath({"a"}), maxes, {}),
                         doctest::Contains("identity"), PropertyError);
}

TEST_CASE("partial aggregates recombine into the full aggregate") {
    TempDir dir;
    TableSchema sch({AttributeSchema::key("g", ScalarType::Int64),
                     AttributeSchema::key("i", ScalarType::Int64),
                     AttributeSchema::value("x", ScalarType::Int64, I(0))});
    AssociativeTable whole(sch);
    std::vector<AssociativeTable> slices(3, AssociativeTable(sch));
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        std::vector<ScalarValue> key{I(static_cast<std::int64_t>(rng() % 10)), I(i)};
        std::vector<ScalarValue> val{I(static_cast<std::int64_t>(rng() % 50) + 1)};
        whole.put(key, val);
        slices[static_cast<std::size_t>(i) % 3].put(key, val);
    }

    // Aggregate each slice independently, append the partials to one store,
    // and let compaction fold them: the result must equal aggregating the
    // whole input in one stream.
    std::vector<AssociativeTable> partials;
    for (std::size_t j = 0; j < slices.size(); ++j)
        partials.push_back(sortAgg(streamTable(slices[j], AccessPath({"g", "i"})),
                                   dir.sub("partial" + std::to_string(j)), AccessPath({"g"}),
                                   sumsFor({"x"}), {})
                               .toTable());

    storage::storeTable(dir.sub("acc"), partials[0], AccessPath({"g"}), {});
    for (std::size_t j = 1; j < partials.size(); ++j) {
        auto rows = partials[j].rows();
        std::size_t at = 0;
        storage::appendRun(dir.sub("acc"), [&]() -> std::optional<TupleRow> {
            if (at >= rows.size()) return std::nullopt;
            return rows[at++];
        });
    }
    auto combined = storage::compactWithAgg(dir.sub("acc"), sumsFor({"x"}), {});
    checkTablesEqual(combined.toTable(), oracleAgg(whole, {"g"}, sumsFor({"x"})));
}

TEST_CASE("randomized merge plans agree with the reference operators") {
    TableSchema as({AttributeSchema::key("k1", ScalarType::Int64),
                    AttributeSchema::key("k2", ScalarType::Int64),
                    AttributeSchema::value("v", ScalarType::Int64, I(0))});
    TableSchema bsUnion = as;
    TableSchema bsJoin({AttributeSchema::key("k1", ScalarType::Int64),
                        AttributeSchema::key("k3", ScalarType::Int64),
                        AttributeSchema::value("v", ScalarType::Int64, I(0))});

    Rng rng(udf::kVerifySeed);
    auto randTable = [&](const TableSchema& sch) {
        AssociativeTable t(sch);
        std::size_t n = rng() % 24;
        for (std::size_t i = 0; i < n; ++i)
            t.put({I(static_cast<std::int64_t>(rng() % 6)),
                   I(static_cast<std::int64_t>(rng() % 6))},
                  {I(static_cast<std::int64_t>(rng() % 9) + 1)});
        return t;
    };

    for (int iter = 0; iter < 60; ++iter) {
        AssociativeTable a = randTable(as);
        switch (iter % 3) {
            case 0: {
                AssociativeTable b = randTable(bsUnion);
                auto got = materialize(*mergeUnionAgg(streamTable(a, AccessPath({"k1", "k2"})),
                                                      streamTable(b, AccessPath({"k1", "k2"})),
                                                      AccessPath({"k1", "k2"}), sumsFor({"v"})));
                checkTablesEqual(got, oracleUnion(a, b, sumsFor({"v"})));
                break;
            }
            case 1: {
                AssociativeTable b = randTable(bsJoin);
                auto got = materialize(*mergeJoin(streamTable(a, AccessPath({"k1", "k2"})),
                                                  streamTable(b, AccessPath({"k1", "k3"})),
                                                  timesFor({"v"})));
                checkTablesEqual(got, oracleJoin(a, b, timesFor({"v"})));
                break;
            }
            default: {
                auto got = materialize(*mergeUnionAgg(streamTable(a, AccessPath({"k1", "k2"})),
                                                      nullptr, AccessPath({"k1"}),
                                                      sumsFor({"v"})));
                checkTablesEqual(got, oracleAgg(a, {"k1"}, sumsFor({"v"})));
                break;
            }
        }
    }
}

TEST_CASE("execution counters track reads, writes, and buffering") {
    TempDir dir;
    storage::Catalog cat(dir.str());
    storage::storeTable(cat.dirFor("s1"), sensorReadings(), AccessPath({"t", "c"}), {});

    Metrics::global().reset();
    auto binned = extMapStream(loadRange(cat, "s1", std::vector<ScalarValue>{I(460)},
                                         std::vector<ScalarValue>{I(860)}),
                               binTableau());
    auto sums = sortAgg(std::move(binned), dir.sub("sums"), AccessPath({"t'", "c"}),
                        sumsFor({"v", "cnt"}), {});

    CHECK(Metrics::global().rowsIn.load() == 5);  // windowed scan
    CHECK(Metrics::global().rowsOut.load() == 4); // four folded groups stored
    CHECK(Metrics::global().tuplesMaterialized.load() == 4);
    CHECK(sums.rowCount() == 4);
    CHECK(Metrics::global().report().find("rows_in 5") != std::string::npos);
}
