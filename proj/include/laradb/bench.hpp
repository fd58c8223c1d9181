#pragma once

#include "laradb/exec.hpp"
#include "laradb/rewrite.hpp"

namespace lara::bench {

/// One measurement class a sensor reports. Values follow a daily sinusoid
/// around `base` plus uniform noise of width `noise`.
struct SensorClassSpec {
    std::string name;
    double base = 50.0;
    double dailyAmplitude = 10.0;
    double noise = 2.0;
};

struct SensorGenConfig {
    int sensors = 2;                  // writes tables s1..s<N>
    std::int64_t startSeconds = 0;
    std::int64_t spanSeconds = 3600;
    double meanGapSeconds = 26.0;     // sensors sample at differing rates/phases
    std::vector<SensorClassSpec> classes = {{"temp", 55.0, 10.0, 2.0},
                                            {"hum", 40.0, 8.0, 2.0}};
    double dropProbability = 0.05;    // a class missing from a sample -> ⊥
    std::uint64_t seed = 1;
    /// Partition granularity of the stored tables (split keys fall on
    /// segment boundaries). Default three days, far wider than desk-scale
    /// spans — such runs get a single partition.
    std::int64_t segmentSeconds = 3 * 24 * 3600;
};

/// Generates and stores the sensor tables (schema t, c -> v nullable, path
/// [t, c]). Deterministic under the seed: same config, same bytes. Returns
/// the stored names.
std::vector<std::string> genSensorData(storage::Catalog& catalog, const SensorGenConfig& cfg);

/// Recursive-partitioning power-law graph generator config. Each edge lands
/// by `scale` quadrant choices with probabilities a, b, c, d = 1-a-b-c;
/// skewed corners give the power-law degree distribution.
struct RmatGenConfig {
    int scale = 10;                   // 2^scale rows and columns
    int edgesPerRow = 16;             // nnz target = edgesPerRow * 2^scale
    double a = 0.57, b = 0.19, c = 0.19;
    std::uint64_t seed = 7;
    std::string rowAttr = "i";
    std::string colAttr = "j";
    std::string valAttr = "v";
    bool colMajor = false;            // store with the column attribute first
    int partitions = 1;
};

/// Generates and stores a sparse power-law matrix (row, col -> v:Int64,
/// default 0; duplicates collapse, values in 1..8). Returns the stored
/// support size.
std::uint64_t genRmat(storage::Catalog& catalog, const RmatGenConfig& cfg, const std::string& name);

/// The sensor quality-control pipeline, as plan text. Single source of
/// truth: the CLI's plans/sensor.lara ships this exact text, and the
/// lowering golden tests parse it from here.
const std::string& sensorPlanText();

struct PipelineSegment {
    std::string name;
    double millis = 0.0;
};

struct SensorRunReport {
    std::vector<PipelineSegment> segments; // scan->X, X->U, U->C by statement label
    double totalMillis = 0.0;
    std::size_t partialProducts = 0;
    std::size_t tuplesMaterialized = 0;
    std::vector<std::string> stored;
    std::map<std::string, core::AssociativeTable> kept; // under opts.keepBindings
    std::string rulesText;
};

/// Runs the sensor pipeline against s1/s2 with the given rewrite rules
/// enabled, storing M and C and reporting wall time split into the three
/// pipeline thirds plus the work counters.
SensorRunReport runSensorPipeline(storage::Catalog& catalog,
                                  const std::vector<rewrite::Rule>& enabled,
                                  const exec::ExecOptions& opts = {});

struct MatmulScaleReport {
    int scale = 0;
    std::uint64_t nnzA = 0;
    std::uint64_t nnzB = 0;
    std::uint64_t outRows = 0;
    double millis = 0.0;
    std::size_t partialProducts = 0;
    double predictedPartialProducts = 0.0; // sum over j of colDegA(j)*rowDegB(j)
    std::size_t tuplesMaterialized = 0;
    bool checked = false; // oracle comparison runs at scale <= 12
    bool correct = false;
};

struct MatmulReport {
    std::vector<MatmulScaleReport> rows;
    std::string tsv; // plot-ready: one header line, one row per scale
};

/// For each scale: generate A (column-major) and B (row-major), run the
/// merge-join matmul plan, verify small scales against the brute-force
/// oracle, and report counters. Writes the TSV to `tsvPath` when nonempty.
MatmulReport runMatmulBench(storage::Catalog& catalog, const std::vector<int>& scales,
                            const std::vector<rewrite::Rule>& enabled,
                            const std::string& tsvPath = "");

/// Brute-force product under (+, x): a keyed {row, inner}, b keyed
/// {inner, col} (any stored order), shared numeric value attribute.
core::AssociativeTable matmulOracle(const core::AssociativeTable& a,
                                     const core::AssociativeTable& b,
                                     const std::string& rowAttr, const std::string& innerAttr,
                                     const std::string& colAttr, const std::string& valAttr);

struct KernelTiming {
    std::string kernel;
    std::uint64_t rows = 0;
    int threads = 1;
    double serialMillis = 0.0;
    double parallelMillis = 0.0;
    bool equalOutput = false; // parallel result byte-equal to serial
};

/// Times the sort kernels' serial reference against the parallel path on
/// synthetic encoded records: in-memory chunk sort and full external sort.
std::vector<KernelTiming> runSortKernelBench(std::uint64_t rows, std::uint64_t seed);

std::string toText(const SensorRunReport& report);
std::string toTsv(const SensorRunReport& report);
std::string toText(const MatmulReport& report);
std::string toText(const std::vector<KernelTiming>& timings);

} // namespace lara::bench
