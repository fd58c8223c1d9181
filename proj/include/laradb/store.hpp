#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "laradb/runfile.hpp"
#include "laradb/udf.hpp"

namespace lara::storage {

using core::AssociativeTable;
using core::TupleRow;

/// One partition of a stored table: a contiguous key range starting at `lo`
/// (empty = unbounded below), held in a single sorted run file.
struct Partition {
    EncodedKey lo;
    std::string file; // relative to the table directory
    std::uint64_t rows = 0;
};

/// A sorted, partitioned, immutable-on-disk table. A directory holds
///   manifest.txt   schema, access path, version, partitions
///   run-*.dat      one sorted run per partition
///   extra-*.dat    whole-range runs appended since the last compaction
/// Appended runs may repeat keys; scans refuse to run until a compaction
/// folds them (scans would otherwise need merge semantics they cannot know).
class SortedTableStore {
public:
    static SortedTableStore open(const std::string& dir);
    static bool existsAt(const std::string& dir);

    const core::TableSchema& schema() const { return schema_; }
    const AccessPath& path() const { return path_; }
    bool packed() const { return packed_; }
    std::uint64_t version() const { return version_; }
    std::uint64_t rowCount() const { return rows_; }
    const std::vector<Partition>& partitions() const { return partitions_; }
    const std::vector<Partition>& extras() const { return extras_; }
    bool needsCompaction() const { return !extras_.empty(); }
    const std::string& dir() const { return dir_; }

    /// Sorted scan in path order, over an optional inclusive range on a
    /// leading prefix of the path. Bound tuples give values for the first
    /// `bound.size()` path attributes.
    class Scan {
    public:
        std::optional<TupleRow> next();
        const TupleRow::Names& names() const { return names_; }

    private:
        friend class SortedTableStore;
        const SortedTableStore* store_ = nullptr;
        std::optional<std::vector<core::ScalarValue>> hi_;
        std::size_t part_ = 0;
        std::unique_ptr<RunReader> reader_;
        EncodedKey loBound_;
        TupleRow::Names names_;
        std::vector<core::ScalarType> keyTypes_;
        std::vector<core::ScalarType> valTypes_;
    };
    Scan scan(std::optional<std::vector<core::ScalarValue>> lo = std::nullopt,
              std::optional<std::vector<core::ScalarValue>> hi = std::nullopt) const;

    /// Materializes the whole store (small tables, tests, golden checks).
    AssociativeTable toTable() const;

    /// Row attribute names in scan order: path attributes, then values.
    TupleRow::Names rowNames() const;

private:
    std::string dir_;
    core::TableSchema schema_;
    AccessPath path_;
    bool packed_ = false;
    std::uint64_t version_ = 0;
    std::uint64_t rows_ = 0;
    std::vector<Partition> partitions_;
    std::vector<Partition> extras_;

    friend SortedTableStore writeManifestAndOpen(const std::string&, const core::TableSchema&,
                                                 const AccessPath&, bool, std::uint64_t,
                                                 std::uint64_t, std::vector<Partition>,
                                                 std::vector<Partition>);
};

/// Internal: rewrite manifest.txt and return the reopened store.
SortedTableStore writeManifestAndOpen(const std::string& dir, const core::TableSchema& schema,
                                      const AccessPath& path, bool packed, std::uint64_t version,
                                      std::uint64_t rows, std::vector<Partition> partitions,
                                      std::vector<Partition> extras);

/// A stored view (deferred computation): the plan text to run against pinned
/// base-table versions when the view is scanned. `outPath` records the key
/// order the replayed plan emits, so consumers can treat a view like a sorted
/// table.
struct ViewDef {
    std::string name;
    std::uint64_t version = 1;
    std::vector<std::pair<std::string, std::uint64_t>> bases; // (table, pinned version)
    AccessPath outPath;
    std::string planText;
};

/// The data directory: one subdirectory per table or view.
class Catalog {
public:
    explicit Catalog(std::string dataDir);

    const std::string& dataDir() const { return dataDir_; }
    std::string dirFor(const std::string& name) const;

    std::vector<std::string> tables() const; // sorted; includes views
    bool exists(const std::string& name) const;
    bool isView(const std::string& name) const;

    SortedTableStore open(const std::string& name) const;
    ViewDef openView(const std::string& name) const;
    void saveView(const ViewDef& view) const;
    void remove(const std::string& name) const;

    /// One line per table: name, kind, version, rows, partitions, path.
    std::string describe(const std::string& name) const;

private:
    std::string dataDir_;
};

} // namespace lara::storage
