#pragma once

#include "laradb/store.hpp"

namespace lara::storage {

using udf::PlusFn;

/// Pull source for rows to be stored. Returns nullopt when exhausted.
using RowSource = std::function<std::optional<TupleRow>()>;

struct StoreOptions {
    int partitions = 1;
    bool packed = false;
    std::uint64_t memBudgetRows = 1u << 20; // spill threshold for sorting
    int parallelism = 0;                    // 0 = library default
    /// Explicit partition boundaries (encoded keys); when nonempty they are
    /// used instead of choosing splits from the data, so a new table can be
    /// pre-split with the boundaries of an existing one.
    std::vector<EncodedKey> splitKeys;
};

/// Process-wide worker count used by the parallel kernels; 0 restores the
/// library default (all hardware threads under OpenMP, serial otherwise).
void setParallelism(int n);
int parallelism();

/// External merge sort over encoded records. Records are totally ordered by
/// (key bytes, arrival index), so the output order — and everything written
/// downstream — is byte-identical for any parallelism or spill pattern.
/// Run formation sorts in-memory chunks with the parallel kernel (a serial
/// reference path is kept alongside; see sortChunkSerial/sortChunkParallel).
class ExternalSorter {
public:
    struct Record {
        EncodedKey key; // key bytes + 8-byte big-endian arrival index
        std::string value;
    };

    ExternalSorter(std::string tempDir, std::uint64_t memBudgetRows, int parallelism);
    ~ExternalSorter();

    void add(const EncodedKey& key, std::string value);
    void finishAdding();
    /// Sorted records; the trailing 8 bytes of `key` are the arrival index.
    std::optional<Record> next();

    static constexpr std::size_t kSeqBytes = 8;

private:
    void spill();
    std::string tempDir_;
    std::uint64_t budget_;
    int parallelism_;
    std::uint64_t seq_ = 0;
    std::vector<Record> buffer_;
    std::vector<std::string> spillFiles_;
    bool finished_ = false;
    struct MergeState;
    std::unique_ptr<MergeState> merge_;
};

/// The two in-memory chunk sort kernels. Both produce the identical result;
/// the serial one is the reference the parallel one is tested against.
void sortChunkSerial(std::vector<ExternalSorter::Record>& records);
void sortChunkParallel(std::vector<ExternalSorter::Record>& records, int workers);

/// Partition boundaries giving near-equal record counts: at most parts-1
/// interior keys from `sortedKeys`, deduplicated. A boundary key belongs to
/// the partition it opens.
std::vector<EncodedKey> chooseSplits(const std::vector<EncodedKey>& sortedKeys, int parts);

/// Sorts `source` by `path` order and writes a fresh partitioned store at
/// `dir` (version bumped if one exists). Duplicate keys are an error unless
/// `foldWith` provides a fold per value attribute. All-default rows are
/// dropped: stores hold canonical supports only.
SortedTableStore sortWrite(const std::string& dir, const core::TableSchema& schema,
                           const AccessPath& path, const RowSource& source,
                           const StoreOptions& opts,
                           const std::map<std::string, PlusFn>* foldWith = nullptr);

/// Appends one whole-range sorted run to an existing store (schema and path
/// must match). Scans refuse until compactWithAgg folds it in.
SortedTableStore appendRun(const std::string& dir, const RowSource& source);

/// Merges partitions and appended runs, folding equal keys with `plusBy`
/// (order: main partitions first, then appended runs in manifest order) and
/// repartitioning for near-equal row counts. Equivalent to folding all
/// stored rows with the reference union.
SortedTableStore compactWithAgg(const std::string& dir,
                                const std::map<std::string, PlusFn>& plusBy,
                                const StoreOptions& opts);

/// Convenience: store an in-memory table (tests, golden fixtures, ingest).
SortedTableStore storeTable(const std::string& dir, const AssociativeTable& table,
                            const AccessPath& path, const StoreOptions& opts);

/// Building block shared with the fused sort-aggregate: writes an already
/// sorted, folded, canonical (key bytes, value bytes) record stream into a
/// fresh partitioned store at `dir`, bumping the version of any store there.
/// Only the partitioning fields of `opts` apply (partitions, splitKeys).
SortedTableStore writeSortedRecords(
    const std::string& dir, const core::TableSchema& schema, const AccessPath& path, bool packed,
    const std::function<std::optional<RunReader::Record>()>& records, const StoreOptions& opts);

} // namespace lara::storage
