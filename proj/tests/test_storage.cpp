#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "laradb/extsort.hpp"
#include "laradb/oracle.hpp"

using namespace lara;
using namespace lara::core;
using namespace lara::storage;
using udf::PlusFn;

namespace {

namespace fs = std::filesystem;

ScalarValue I(std::int64_t v) { return ScalarValue::i64(v); }
ScalarValue F(double v) { return ScalarValue::f64(v); }
ScalarValue S(std::string v) { return ScalarValue::utf8(std::move(v)); }
ScalarValue B(bool v) { return ScalarValue::boolean(v); }
ScalarValue N() { return ScalarValue::null(); }

/// Self-cleaning scratch directory for on-disk tests.
struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("laradb-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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

ScalarValue randomScalar(Rng& rng, ScalarType t, bool allowNull) {
    if (allowNull && rng() % 8 == 0) return N();
    switch (t) {
        case ScalarType::Null:
            break;
        case ScalarType::Int64:
            return I(static_cast<std::int64_t>(rng() % 2001) - 1000);
        case ScalarType::Float64:
            // Dyadic rationals compare exactly and never produce -0.0.
            return F(static_cast<double>(static_cast<std::int64_t>(rng() % 8193) - 4096) / 16.0);
        case ScalarType::Bool:
            return B(rng() % 2 == 0);
        case ScalarType::Utf8: {
            // Short strings over a hostile alphabet: escape bytes, high bytes,
            // and near-prefix pairs all appear.
            static const std::string alphabet = std::string("ab\x00\x01\xff\xfe", 6);
            std::string s;
            std::size_t len = rng() % 5;
            for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
            return S(std::move(s));
        }
    }
    throw Error("unreachable");
}

int compareTuples(const std::vector<ScalarValue>& a, const std::vector<ScalarValue>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        int c = a[i].compare(b[i]);
        if (c != 0) return c;
    }
    return 0;
}

/// Collects a full scan into rows.
std::vector<TupleRow> scanAll(const SortedTableStore& store) {
    std::vector<TupleRow> out;
    auto sc = store.scan();
    while (auto row = sc.next()) out.push_back(std::move(*row));
    return out;
}

std::string slurp(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

// ---------------------------------------------------------------------------
// Key codec

TEST_CASE("encoded keys order exactly like decoded tuples") {
    // The whole design leans on this: byte order of encodeKeyTuple must agree
    // with attribute-wise scalar order, for every type and tuple shape.
    Rng rng(2024);
    std::vector<ScalarType> shape = {ScalarType::Int64, ScalarType::Utf8, ScalarType::Float64,
                                     ScalarType::Bool};
    std::size_t disagreements = 0;
    for (int i = 0; i < 10000; ++i) {
        std::size_t arity = 1 + rng() % shape.size();
        std::vector<ScalarValue> a, b;
        for (std::size_t j = 0; j < arity; ++j) {
            a.push_back(randomScalar(rng, shape[j], false));
            // Nudge b toward a so equal prefixes are common.
            b.push_back(rng() % 3 == 0 ? a.back() : randomScalar(rng, shape[j], false));
        }
        int want = compareTuples(a, b);
        EncodedKey ea = encodeKeyTuple(a), eb = encodeKeyTuple(b);
        int got = ea < eb ? -1 : ea == eb ? 0 : 1;
        if (want != got) ++disagreements;
    }
    CHECK(disagreements == 0);
}

TEST_CASE("key codec round-trips every type") {
    Rng rng(7);
    std::vector<ScalarType> shape = {ScalarType::Utf8, ScalarType::Int64, ScalarType::Float64,
                                     ScalarType::Bool};
    for (int i = 0; i < 500; ++i) {
        std::vector<ScalarValue> key;
        for (ScalarType t : shape) key.push_back(randomScalar(rng, t, false));
        EncodedKey enc = encodeKeyTuple(key);
        std::vector<ScalarValue> back = decodeKeyTuple(enc, shape);
        REQUIRE(back.size() == key.size());
        for (std::size_t j = 0; j < key.size(); ++j) CHECK(back[j] == key[j]);
    }
    // Edge values.
    for (auto v : {I(0), I(-1), I(std::numeric_limits<std::int64_t>::min()),
                   I(std::numeric_limits<std::int64_t>::max())}) {
        EncodedKey e = encodeKeyTuple({v});
        CHECK(decodeKeyTuple(e, {ScalarType::Int64})[0] == v);
    }
    CHECK_THROWS_AS((void)encodeKeyTuple({N()}), UsageError); // keys are never null
}

TEST_CASE("appending sequence bytes preserves key order") {
    // The external sorter appends an 8-byte arrival index to each key and
    // sorts the concatenation. That only works because no encoded key is a
    // strict prefix of a different key's encoding (per-component framing), so
    // (key, seq) byte order equals (key order, seq order).
    Rng rng(99);
    auto seq = [](std::uint64_t n) {
        std::string s(8, '\0');
        for (int i = 0; i < 8; ++i) s[static_cast<std::size_t>(i)] = static_cast<char>((n >> (8 * (7 - i))) & 0xff);
        return s;
    };
    for (int i = 0; i < 2000; ++i) {
        std::vector<ScalarValue> a = {randomScalar(rng, ScalarType::Utf8, false)};
        std::vector<ScalarValue> b = {randomScalar(rng, ScalarType::Utf8, false)};
        EncodedKey ea = encodeKeyTuple(a) + seq(rng() % 100);
        EncodedKey eb = encodeKeyTuple(b) + seq(rng() % 100);
        int want = compareTuples(a, b);
        if (want < 0) CHECK(ea < eb);
        if (want > 0) CHECK(ea > eb);
    }
}

TEST_CASE("value tuples round-trip tagged and packed") {
    Rng rng(11);
    std::vector<ScalarType> types = {ScalarType::Float64, ScalarType::Int64, ScalarType::Bool,
                                     ScalarType::Utf8};
    for (int i = 0; i < 500; ++i) {
        std::vector<ScalarValue> vals;
        for (ScalarType t : types) vals.push_back(randomScalar(rng, t, true));
        auto back = decodeValueTuple(encodeValueTuple(vals, false), types, false);
        REQUIRE(back.size() == vals.size());
        for (std::size_t j = 0; j < vals.size(); ++j) CHECK(back[j] == vals[j]);
    }
    // Packed: raw 8-byte numerics, no tags.
    std::vector<ScalarType> numeric = {ScalarType::Int64, ScalarType::Float64};
    std::string enc = encodeValueTuple({I(-5), F(2.25)}, true);
    CHECK(enc.size() == 16);
    auto back = decodeValueTuple(enc, numeric, true);
    CHECK(back[0] == I(-5));
    CHECK(back[1] == F(2.25));
    CHECK_THROWS_AS((void)encodeValueTuple({N(), F(1.0)}, true), UsageError);

    TableSchema packable({AttributeSchema::key("k", ScalarType::Int64),
                          AttributeSchema::value("a", ScalarType::Int64, I(0)),
                          AttributeSchema::value("b", ScalarType::Float64, F(0.0))});
    CHECK(valueSchemaIsPackable(packable));
    CHECK_FALSE(valueSchemaIsPackable(sensorSchema()));      // nullable value
    TableSchema stringy({AttributeSchema::key("k", ScalarType::Int64),
                         AttributeSchema::value("s", ScalarType::Utf8, S(""))});
    CHECK_FALSE(valueSchemaIsPackable(stringy));
}

// ---------------------------------------------------------------------------
// Run files

TEST_CASE("run files round-trip and seek") {
    TempDir tmp;
    const std::string file = tmp.sub("a.dat");
    // Values long enough that the file spans many 4 KiB index blocks.
    auto key = [](int i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "k%06d", i);
        return std::string(buf);
    };
    const std::string filler(200, 'x');
    {
        RunWriter w(file);
        for (int i = 0; i < 1000; ++i) w.append(key(i), filler + std::to_string(i));
        CHECK(w.finish() == 1000);
    }

    RunReader r(file);
    CHECK(r.recordCount() == 1000);
    int n = 0;
    while (auto rec = r.next()) {
        CHECK(rec->key == key(n));
        CHECK(rec->value == filler + std::to_string(n));
        ++n;
    }
    CHECK(n == 1000);

    // Seek lands on the first record >= the probe, wherever it falls.
    r.seekToKey(key(713));
    CHECK(r.next()->key == key(713));
    r.seekToKey(key(713) + "0"); // between 713 and 714
    CHECK(r.next()->key == key(714));
    r.seekToKey("zzz");
    CHECK_FALSE(r.next().has_value());
    r.rewind();
    CHECK(r.next()->key == key(0));
}

TEST_CASE("run writer rejects out-of-order appends") {
    TempDir tmp;
    RunWriter w(tmp.sub("b.dat"));
    w.append("bb", "1");
    w.append("bb", "2"); // equal keys are fine (appended runs may repeat keys)
    CHECK_THROWS_AS(w.append("aa", "3"), UsageError);
}

// ---------------------------------------------------------------------------
// Partitioning

TEST_CASE("chooseSplits balances partitions and dedupes") {
    std::vector<EncodedKey> keys;
    for (int i = 0; i < 100; ++i) keys.push_back(encodeKeyTuple({I(i)}));
    auto splits = chooseSplits(keys, 4);
    REQUIRE(splits.size() == 3);
    CHECK(splits[0] == encodeKeyTuple({I(25)}));
    CHECK(splits[1] == encodeKeyTuple({I(50)}));
    CHECK(splits[2] == encodeKeyTuple({I(75)}));

    CHECK(chooseSplits(keys, 1).empty());
    CHECK(chooseSplits({}, 4).empty());

    // Heavily duplicated keys: splits stay distinct and never equal the
    // smallest key (which would open an empty first partition).
    std::vector<EncodedKey> dup(97, encodeKeyTuple({I(1)}));
    dup.push_back(encodeKeyTuple({I(2)}));
    std::sort(dup.begin(), dup.end());
    auto s2 = chooseSplits(dup, 8);
    CHECK(s2.empty()); // every quantile hits the duplicated minimum
}

// ---------------------------------------------------------------------------
// sortWrite / scan

TEST_CASE("sortWrite partitions, orders, and scans a random table") {
    TempDir tmp;
    TableSchema schema({AttributeSchema::key("k", ScalarType::Int64),
                        AttributeSchema::key("s", ScalarType::Utf8),
                        AttributeSchema::value("x", ScalarType::Float64, N()),
                        AttributeSchema::value("n", ScalarType::Int64, I(0))});
    AssociativeTable t(schema);
    Rng rng(5);
    while (t.supportSize() < 5000) {
        std::vector<ScalarValue> key = {randomScalar(rng, ScalarType::Int64, false),
                                        randomScalar(rng, ScalarType::Utf8, false)};
        t.put(std::move(key), {F(static_cast<double>(rng() % 64) / 4.0), I(1)});
    }

    StoreOptions opts;
    opts.partitions = 4;
    SortedTableStore store = storeTable(tmp.sub("t"), t, AccessPath{{"k", "s"}}, opts);

    CHECK(store.version() == 1);
    CHECK(store.rowCount() == t.supportSize());
    CHECK(store.partitions().size() == 4);
    CHECK(store.path().toText() == "[k, s]");

    // Partition bounds ascend and sizes are within 2x of even.
    for (std::size_t i = 1; i < store.partitions().size(); ++i)
        CHECK(store.partitions()[i - 1].lo < store.partitions()[i].lo);
    for (const auto& p : store.partitions()) {
        CHECK(p.rows > t.supportSize() / 8);
        CHECK(p.rows < t.supportSize() / 2);
    }

    // Scan order matches key order; round trip matches the source table.
    auto rows = scanAll(store);
    REQUIRE(rows.size() == t.supportSize());
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::vector<ScalarValue> a = {rows[i - 1].get("k"), rows[i - 1].get("s")};
        std::vector<ScalarValue> b = {rows[i].get("k"), rows[i].get("s")};
        CHECK(compareTuples(a, b) < 0);
    }
    CHECK(store.toTable() == t);
}

TEST_CASE("scan honors range bounds on the leading path prefix") {
    TempDir tmp;
    SortedTableStore store =
        storeTable(tmp.sub("sensor"), sensorReadings(), AccessPath{{"t", "c"}}, {});

    auto inRange = [&](std::optional<std::vector<ScalarValue>> lo,
                       std::optional<std::vector<ScalarValue>> hi) {
        std::vector<std::int64_t> ts;
        auto sc = store.scan(std::move(lo), std::move(hi));
        while (auto row = sc.next()) ts.push_back(row->get("t").asI64());
        return ts;
    };
    auto at = [](std::int64_t t) { return std::vector<ScalarValue>{I(t)}; };
    CHECK(inRange(at(466), at(492)) == std::vector<std::int64_t>{466, 466, 492, 492});
    CHECK(inRange(std::nullopt, at(465)) == std::vector<std::int64_t>{440});
    CHECK(inRange(at(493), std::nullopt) == std::vector<std::int64_t>{528});
    CHECK(inRange(at(600), std::nullopt).empty());
    // Two-component bound pins the row exactly.
    auto sc = store.scan(std::vector<ScalarValue>{I(466), S("temp")},
                         std::vector<ScalarValue>{I(466), S("temp")});
    auto row = sc.next();
    REQUIRE(row.has_value());
    CHECK(row->get("v") == F(55.2));
    CHECK_FALSE(sc.next().has_value());
}

TEST_CASE("a permuted access path stores rows in path order") {
    TempDir tmp;
    SortedTableStore store =
        storeTable(tmp.sub("byc"), sensorReadings(), AccessPath{{"c", "t"}}, {});
    auto rows = scanAll(store);
    REQUIRE(rows.size() == 6);
    // hum rows (440, 466, 492) come before temp rows (466, 492, 528).
    CHECK(rows[0].get("c") == S("hum"));
    CHECK(rows[0].get("t") == I(440));
    CHECK(rows[3].get("c") == S("temp"));
    CHECK(rows[3].get("t") == I(466));
    // Range scan by channel alone.
    auto sc = store.scan(std::vector<ScalarValue>{S("temp")}, std::nullopt);
    int n = 0;
    while (auto r = sc.next()) {
        CHECK(r->get("c") == S("temp"));
        ++n;
    }
    CHECK(n == 3);
}

TEST_CASE("sortWrite folds duplicates only when given folds") {
    TempDir tmp;
    TableSchema schema({AttributeSchema::key("k", ScalarType::Int64),
                        AttributeSchema::value("v", ScalarType::Float64, N())});
    auto names = TupleRow::shareNames({"k", "v"});
    auto sourceOf = [&](std::vector<std::pair<std::int64_t, double>> rows) {
        std::size_t at = 0;
        return [=]() mutable -> std::optional<TupleRow> {
            if (at >= rows.size()) return std::nullopt;
            auto [k, v] = rows[at++];
            return TupleRow(names, {I(k), F(v)});
        };
    };

    CHECK_THROWS_AS((void)sortWrite(tmp.sub("dup"), schema, AccessPath{{"k"}},
                                    sourceOf({{1, 2.0}, {1, 3.0}}), {}),
                    UsageError);

    std::map<std::string, PlusFn> folds;
    folds.emplace("v", PlusFn::builtin("sum").withAttr("v").withIdentity(N()));
    SortedTableStore store = sortWrite(tmp.sub("fold"), schema, AccessPath{{"k"}},
                                       sourceOf({{1, 2.0}, {2, 7.0}, {1, 3.0}}), {}, &folds);
    CHECK(store.rowCount() == 2);
    CHECK(store.toTable().lookupValues({I(1)})[0] == F(5.0));
}

TEST_CASE("all-default rows never reach disk") {
    TempDir tmp;
    TableSchema schema({AttributeSchema::key("k", ScalarType::Int64),
                        AttributeSchema::value("v", ScalarType::Int64, I(0))});
    auto names = TupleRow::shareNames({"k", "v"});
    std::vector<std::pair<std::int64_t, std::int64_t>> rows = {{1, 5}, {2, 0}, {3, -4}, {3, 4}};
    std::size_t at = 0;
    std::map<std::string, PlusFn> folds;
    folds.emplace("v", PlusFn::builtin("sum").withAttr("v").withIdentity(I(0)));
    SortedTableStore store = sortWrite(
        tmp.sub("canon"), schema, AccessPath{{"k"}},
        [&]() -> std::optional<TupleRow> {
            if (at >= rows.size()) return std::nullopt;
            auto [k, v] = rows[at++];
            return TupleRow(names, {I(k), I(v)});
        },
        {}, &folds);
    // Row 2 arrived as the default; rows 3 fold to it. Only row 1 survives.
    CHECK(store.rowCount() == 1);
    auto all = scanAll(store);
    REQUIRE(all.size() == 1);
    CHECK(all[0].get("k") == I(1));
}

TEST_CASE("rewriting a store bumps the version and removes stale files") {
    TempDir tmp;
    const std::string dir = tmp.sub("v");
    storeTable(dir, sensorReadings(), AccessPath{{"t", "c"}}, {});
    AssociativeTable small(sensorSchema());
    small.put({I(1), S("temp")}, {F(9.0)});
    StoreOptions opts;
    opts.partitions = 2;
    SortedTableStore s2 = storeTable(dir, small, AccessPath{{"t", "c"}}, opts);
    CHECK(s2.version() == 2);
    CHECK(s2.rowCount() == 1);
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("run-", 0) == 0) CHECK(name.rfind("run-v2-", 0) == 0);
    }
}

// ---------------------------------------------------------------------------
// Appends and compaction

TEST_CASE("appended runs block scans until compaction folds them") {
    TempDir tmp;
    const std::string dir = tmp.sub("inc");
    AssociativeTable base = sensorReadings();
    SortedTableStore store = storeTable(dir, base, AccessPath{{"t", "c"}}, {});

    AssociativeTable delta(sensorSchema());
    delta.put({I(466), S("temp")}, {F(0.8)});  // collides with a stored key
    delta.put({I(530), S("temp")}, {F(57.1)}); // new key
    auto rows = delta.rows();
    std::size_t at = 0;
    store = appendRun(dir, [&]() -> std::optional<TupleRow> {
        if (at >= rows.size()) return std::nullopt;
        return rows[at++];
    });

    CHECK(store.needsCompaction());
    CHECK(store.extras().size() == 1);
    CHECK_THROWS_AS((void)store.scan(), UsageError);
    CHECK_THROWS_AS((void)store.toTable(), UsageError);

    std::map<std::string, PlusFn> folds;
    folds.emplace("v", PlusFn::builtin("sum").withAttr("v").withIdentity(N()));
    StoreOptions opts;
    opts.partitions = 2;
    SortedTableStore compacted = compactWithAgg(dir, folds, opts);
    CHECK_FALSE(compacted.needsCompaction());

    // Compaction is the stored mirror of the reference union.
    AssociativeTable expect = oracleUnion(base, delta, {{"v", PlusFn::builtin("sum")}});
    CHECK(compacted.toTable() == expect);
    CHECK(compacted.toTable().lookupValues({I(466), S("temp")})[0] == F(56.0));

    // The extra file is gone from disk after compaction.
    for (const auto& e : fs::directory_iterator(dir))
        CHECK(e.path().filename().string().rfind("extra-", 0) != 0);
}

TEST_CASE("compaction folds main partitions before appended runs in order") {
    TempDir tmp;
    const std::string dir = tmp.sub("ord");
    // `any` keeps the first non-identity operand, so fold order is visible.
    TableSchema schema({AttributeSchema::key("k", ScalarType::Int64),
                        AttributeSchema::value("v", ScalarType::Utf8, S(""))});
    AssociativeTable base(schema);
    base.put({I(1)}, {S("base")});
    base.put({I(2)}, {S("base")});
    storeTable(dir, base, AccessPath{{"k"}}, {});

    auto oneRow = [&](std::int64_t k, const std::string& v) {
        auto names = TupleRow::shareNames({"k", "v"});
        bool done = false;
        return [=]() mutable -> std::optional<TupleRow> {
            if (done) return std::nullopt;
            done = true;
            return TupleRow(names, {I(k), S(v)});
        };
    };
    appendRun(dir, oneRow(1, "first"));
    appendRun(dir, oneRow(1, "second"));
    appendRun(dir, oneRow(3, "third"));

    std::map<std::string, PlusFn> folds;
    folds.emplace("v", PlusFn::builtin("any").withAttr("v").withIdentity(S("")));
    AssociativeTable got = compactWithAgg(dir, folds, {}).toTable();
    CHECK(got.lookupValues({I(1)})[0] == S("base")); // stored beats appends
    CHECK(got.lookupValues({I(2)})[0] == S("base"));
    CHECK(got.lookupValues({I(3)})[0] == S("third"));
}

TEST_CASE("compaction against the reference union on random inputs") {
    Rng rng(31);
    for (int round = 0; round < 10; ++round) {
        TempDir tmp;
        const std::string dir = tmp.sub("r");
        TableSchema schema({AttributeSchema::key("k", ScalarType::Int64),
                            AttributeSchema::value("a", ScalarType::Int64, I(0)),
                            AttributeSchema::value("b", ScalarType::Float64, N())});
        auto randomTable = [&](std::size_t n) {
            AssociativeTable t(schema);
            for (std::size_t i = 0; i < n; ++i)
                // `a` stays non-negative: max with identity 0 is only a
                // lawful fold on that domain, and lawful folds are exactly
                // where compaction and the reference union must agree.
                t.put({I(static_cast<std::int64_t>(rng() % 40))},
                      {I(static_cast<std::int64_t>(rng() % 1000)),
                       randomScalar(rng, ScalarType::Float64, true)});
            return t;
        };
        AssociativeTable base = randomTable(30), delta = randomTable(20);

        StoreOptions opts;
        opts.partitions = 1 + static_cast<int>(rng() % 4);
        storeTable(dir, base, AccessPath{{"k"}}, opts);
        auto rows = delta.rows();
        std::size_t at = 0;
        appendRun(dir, [&]() -> std::optional<TupleRow> {
            if (at >= rows.size()) return std::nullopt;
            return rows[at++];
        });

        std::map<std::string, PlusFn> folds;
        folds.emplace("a", PlusFn::builtin("max").withAttr("a").withIdentity(I(0)));
        folds.emplace("b", PlusFn::builtin("sum").withAttr("b").withIdentity(N()));
        AssociativeTable got = compactWithAgg(dir, folds, opts).toTable();
        AssociativeTable want = oracleUnion(
            base, delta, {{"a", PlusFn::builtin("max")}, {"b", PlusFn::builtin("sum")}});
        std::string why;
        CHECK_MESSAGE(canonicallyEqual(got, want, 0.0, &why), why);
    }
}

// ---------------------------------------------------------------------------
// Packed stores and determinism

TEST_CASE("packed stores round-trip and refuse nullable schemas") {
    TempDir tmp;
    TableSchema schema({AttributeSchema::key("i", ScalarType::Int64),
                        AttributeSchema::key("j", ScalarType::Int64),
                        AttributeSchema::value("x", ScalarType::Float64, F(0.0))});
    AssociativeTable t(schema);
    Rng rng(13);
    for (int i = 0; i < 200; ++i)
        t.put({I(static_cast<std::int64_t>(rng() % 50)), I(static_cast<std::int64_t>(rng() % 50))},
              {F(static_cast<double>(rng() % 32) / 8.0)});

    StoreOptions opts;
    opts.packed = true;
    opts.partitions = 3;
    SortedTableStore store = storeTable(tmp.sub("m"), t, AccessPath{{"i", "j"}}, opts);
    CHECK(store.packed());
    CHECK(store.toTable() == t);

    StoreOptions bad;
    bad.packed = true;
    CHECK_THROWS_AS((void)storeTable(tmp.sub("n"), sensorReadings(), AccessPath{{"t", "c"}}, bad),
                    UsageError);
}

TEST_CASE("stored bytes are identical for any parallelism or spill pattern") {
    TableSchema schema({AttributeSchema::key("k", ScalarType::Int64),
                        AttributeSchema::value("v", ScalarType::Int64, I(0))});
    auto names = TupleRow::shareNames({"k", "v"});
    auto makeSource = [&](int salt) {
        Rng rng(static_cast<std::uint64_t>(salt));
        std::size_t left = 20000;
        return [names, rng, left]() mutable -> std::optional<TupleRow> {
            if (left == 0) return std::nullopt;
            --left;
            return TupleRow(names, {I(static_cast<std::int64_t>(rng() % 5000)), I(1)});
        };
    };
    std::map<std::string, PlusFn> folds;
    folds.emplace("v", PlusFn::builtin("sum").withAttr("v").withIdentity(I(0)));

    struct Variant {
        int parallelism;
        std::uint64_t memBudget;
    };
    std::vector<std::string> images;
    for (Variant v : {Variant{1, 1u << 20}, Variant{4, 1u << 20}, Variant{4, 1500},
                      Variant{2, 333}}) {
        TempDir tmp;
        StoreOptions opts;
        opts.partitions = 3;
        opts.parallelism = v.parallelism;
        opts.memBudgetRows = v.memBudget;
        SortedTableStore store =
            sortWrite(tmp.sub("d"), schema, AccessPath{{"k"}}, makeSource(77), opts, &folds);
        std::string image;
        for (const auto& p : store.partitions())
            image += p.file + "\n" + slurp(tmp.sub("d") + "/" + p.file) + "\n";
        images.push_back(std::move(image));
    }
    for (std::size_t i = 1; i < images.size(); ++i) CHECK(images[i] == images[0]);
}

TEST_CASE("sort kernels agree: parallel equals the serial reference") {
    Rng rng(123);
    std::vector<ExternalSorter::Record> records;
    for (int i = 0; i < 30000; ++i) {
        ExternalSorter::Record r;
        r.key = encodeKeyTuple({I(static_cast<std::int64_t>(rng() % 10000))});
        char seq[8];
        for (int b = 0; b < 8; ++b) seq[b] = static_cast<char>((i >> (8 * (7 - b))) & 0xff);
        r.key.append(seq, 8);
        r.value = std::to_string(i);
        records.push_back(std::move(r));
    }
    auto serial = records;
    sortChunkSerial(serial);
    for (int workers : {1, 2, 3, 8}) {
        auto par = records;
        sortChunkParallel(par, workers);
        REQUIRE(par.size() == serial.size());
        bool same = true;
        for (std::size_t i = 0; i < par.size(); ++i)
            if (par[i].key != serial[i].key || par[i].value != serial[i].value) same = false;
        CHECK_MESSAGE(same, "workers=" << workers);
    }
}

// ---------------------------------------------------------------------------
// Catalog

TEST_CASE("catalog lists, describes, and removes tables and views") {
    TempDir tmp;
    Catalog cat(tmp.sub("data"));
    CHECK(cat.tables().empty());
    CHECK_FALSE(cat.exists("s1"));

    storeTable(cat.dirFor("s1"), sensorReadings(), AccessPath{{"t", "c"}}, {});
    CHECK(cat.exists("s1"));
    CHECK_FALSE(cat.isView("s1"));
    CHECK(cat.open("s1").rowCount() == 6);

    ViewDef view;
    view.name = "cooked";
    view.version = 3;
    view.bases = {{"s1", 1}};
    view.outPath = AccessPath{{"t", "c"}};
    view.planText = "A = LOAD s1\nSTORE A\n";
    cat.saveView(view);
    CHECK(cat.isView("cooked"));
    ViewDef back = cat.openView("cooked");
    CHECK(back.version == 3);
    REQUIRE(back.bases.size() == 1);
    CHECK(back.bases[0].first == "s1");
    CHECK(back.bases[0].second == 1);
    CHECK(back.outPath == view.outPath);
    CHECK(back.planText == view.planText);

    CHECK(cat.tables() == std::vector<std::string>{"cooked", "s1"});
    CHECK(cat.describe("s1").find("rows 6") != std::string::npos);
    CHECK(cat.describe("cooked").find("base s1 @ version 1") != std::string::npos);

    cat.remove("cooked");
    CHECK_FALSE(cat.exists("cooked"));
    CHECK(cat.tables() == std::vector<std::string>{"s1"});

    CHECK_THROWS_AS((void)cat.open("nope"), IoError);
    CHECK_THROWS_AS((void)cat.dirFor("../escape"), UsageError);
}

TEST_CASE("manifests survive reopening") {
    TempDir tmp;
    const std::string dir = tmp.sub("m");
    StoreOptions opts;
    opts.partitions = 2;
    SortedTableStore a = storeTable(dir, sensorReadings(), AccessPath{{"t", "c"}}, opts);
    SortedTableStore b = SortedTableStore::open(dir);
    CHECK(b.version() == a.version());
    CHECK(b.rowCount() == a.rowCount());
    CHECK(b.schema() == a.schema());
    CHECK(b.path().toText() == a.path().toText());
    REQUIRE(b.partitions().size() == a.partitions().size());
    for (std::size_t i = 0; i < a.partitions().size(); ++i) {
        CHECK(b.partitions()[i].lo == a.partitions()[i].lo);
        CHECK(b.partitions()[i].file == a.partitions()[i].file);
        CHECK(b.partitions()[i].rows == a.partitions()[i].rows);
    }
    CHECK(b.toTable() == sensorReadings());
}
