#pragma once

// Golden fixtures for the sensor-covariance pipeline, shared by the planner,
// frontend, bench, and acceptance tests. The first stream is the six-reading
// example used throughout the docs; the second is chosen so the per-bin
// residuals (first minus second) land on round numbers, which keeps every
// intermediate table hand-checkable:
//
//   binned means (s1)    460:{temp 55.2, hum 40.1}  520:{temp 56.4, hum 35.0}
//   binned means (s2)    460:{temp 58.3, hum 38.5}  520:{temp 60.4, hum 35.8}
//   residuals X          460:{temp -3.1, hum  1.6}  520:{temp -4.0, hum -0.8}
//   bin count N          2
//   class means M        temp -3.55, hum 0.4
//   centered U           460:{temp 0.45, hum 1.2}   520:{temp -0.45, hum -1.2}
//   covariance C         (N-1 = 1) temp,temp 0.405  temp,hum 1.08  hum,hum 2.88
//
// A second, standalone centered table with entries +-0.4 / +-1.2 exercises
// the covariance tail on its own; its covariance is {0.32, 0.96, 0.96, 2.88}.

#include "laradb/table.hpp"

namespace fixture {

using lara::core::AssociativeTable;
using lara::core::AttributeSchema;
using lara::core::ScalarType;
using lara::core::ScalarValue;
using lara::core::TableSchema;

inline ScalarValue I(std::int64_t v) { return ScalarValue::i64(v); }
inline ScalarValue F(double v) { return ScalarValue::f64(v); }
inline ScalarValue S(std::string v) { return ScalarValue::utf8(std::move(v)); }
inline ScalarValue N() { return ScalarValue::null(); }

/// Raw reading stream: (t, c) -> v with a null default.
inline TableSchema sensorSchema() {
    return TableSchema({
        AttributeSchema::key("t", ScalarType::Int64),
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    });
}

inline AssociativeTable s1Readings() {
    AssociativeTable t(sensorSchema());
    t.put({I(440), S("hum")}, {F(38.6)});
    t.put({I(466), S("temp")}, {F(55.2)});
    t.put({I(466), S("hum")}, {F(40.1)});
    t.put({I(492), S("temp")}, {F(56.3)});
    t.put({I(492), S("hum")}, {F(35.0)});
    t.put({I(528), S("temp")}, {F(56.5)});
    return t;
}

inline AssociativeTable s2Readings() {
    AssociativeTable t(sensorSchema());
    t.put({I(444), S("temp")}, {F(99.9)}); // outside the 460..860 window
    t.put({I(466), S("temp")}, {F(58.3)});
    t.put({I(466), S("hum")}, {F(38.5)});
    t.put({I(492), S("temp")}, {F(60.4)});
    t.put({I(492), S("hum")}, {F(35.8)});
    return t;
}

/// (t, c, t') -> v:null, cnt:0 — the first stream after windowing + binning.
inline AssociativeTable goldenBinned() {
    AssociativeTable t(TableSchema({
        AttributeSchema::key("t", ScalarType::Int64),
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::key("t'", ScalarType::Int64),
        AttributeSchema::value("v", ScalarType::Float64, N()),
        AttributeSchema::value("cnt", ScalarType::Int64, I(0)),
    }));
    t.put({I(466), S("temp"), I(460)}, {F(55.2), I(1)});
    t.put({I(466), S("hum"), I(460)}, {F(40.1), I(1)});
    t.put({I(492), S("temp"), I(520)}, {F(56.3), I(1)});
    t.put({I(492), S("hum"), I(520)}, {F(35.0), I(1)});
    t.put({I(528), S("temp"), I(520)}, {F(56.5), I(1)});
    return t;
}

/// (t', c) -> v with a null default: the shape of the per-bin mean tables,
/// the residual table, and the centered table.
inline TableSchema binnedMatrixSchema() {
    return TableSchema({
        AttributeSchema::key("t'", ScalarType::Int64),
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    });
}

inline AssociativeTable tcTable(std::vector<std::tuple<std::int64_t, std::string, double>> rows) {
    AssociativeTable t(binnedMatrixSchema());
    for (auto& [tp, c, v] : rows) t.put({I(tp), S(std::move(c))}, {F(v)});
    return t;
}

/// Per-bin means of the first stream.
inline AssociativeTable goldenBinnedMeans() {
    return tcTable({{460, "temp", 55.2}, {460, "hum", 40.1}, {520, "temp", 56.4},
                    {520, "hum", 35.0}});
}

/// Residuals X = means(s1) - means(s2).
inline AssociativeTable goldenResiduals() {
    return tcTable({{460, "temp", -3.1}, {460, "hum", 1.6}, {520, "temp", -4.0},
                    {520, "hum", -0.8}});
}

/// Centered residuals U = X - repeated class means.
inline AssociativeTable goldenCentered() {
    return tcTable({{460, "temp", 0.45}, {460, "hum", 1.2}, {520, "temp", -0.45},
                    {520, "hum", -1.2}});
}

/// A standalone centered table on rounder numbers, for the covariance tail.
inline AssociativeTable roundCentered() {
    return tcTable({{460, "temp", 0.4}, {460, "hum", 1.2}, {520, "temp", -0.4},
                    {520, "hum", -1.2}});
}

/// () -> v: the number of distinct bins.
inline AssociativeTable goldenBinCount() {
    AssociativeTable t(TableSchema({AttributeSchema::value("v", ScalarType::Int64, I(0))}));
    t.put({}, {I(2)});
    return t;
}

/// (c) -> v: per-class means of the residuals.
inline AssociativeTable goldenClassMeans() {
    AssociativeTable t(TableSchema({
        AttributeSchema::key("c", ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    }));
    t.put({S("temp")}, {F(-3.55)});
    t.put({S("hum")}, {F(0.4)});
    return t;
}

inline AssociativeTable covTable(double tt, double th, double hh,
                                 const std::string& left = "c'", const std::string& right = "c") {
    AssociativeTable t(TableSchema({
        AttributeSchema::key(left, ScalarType::Utf8),
        AttributeSchema::key(right, ScalarType::Utf8),
        AttributeSchema::value("v", ScalarType::Float64, N()),
    }));
    t.put({S("temp"), S("temp")}, {F(tt)});
    t.put({S("temp"), S("hum")}, {F(th)});
    t.put({S("hum"), S("temp")}, {F(th)});
    t.put({S("hum"), S("hum")}, {F(hh)});
    return t;
}

/// Covariance of goldenCentered (sample covariance, N-1 = 1).
inline AssociativeTable goldenCovariance() { return covTable(0.405, 1.08, 2.88); }

/// Covariance of roundCentered.
inline AssociativeTable roundCovariance() { return covTable(0.32, 0.96, 2.88); }

} // namespace fixture
