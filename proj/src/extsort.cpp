#include "laradb/extsort.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <queue>

#include "laradb/metrics.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lara::storage {

namespace fs = std::filesystem;
using core::ScalarType;
using core::ScalarValue;
using core::TableSchema;

namespace {

std::atomic<int> gParallelism{0};

int defaultWorkers() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int resolveWorkers(int requested) {
    if (requested > 0) return requested;
    int g = gParallelism.load();
    return g > 0 ? g : defaultWorkers();
}

bool recordLess(const ExternalSorter::Record& a, const ExternalSorter::Record& b) {
    return a.key < b.key; // the appended arrival index makes keys unique
}

std::string seqBytes(std::uint64_t seq) {
    std::string out(ExternalSorter::kSeqBytes, '\0');
    for (std::size_t i = 0; i < ExternalSorter::kSeqBytes; ++i)
        out[i] = static_cast<char>((seq >> (8 * (ExternalSorter::kSeqBytes - 1 - i))) & 0xff);
    return out;
}

} // namespace

void setParallelism(int n) {
    gParallelism.store(n > 0 ? n : 0);
}

int parallelism() {
    return resolveWorkers(0);
}

// ---------------------------------------------------------------------------
// Chunk sort kernels

void sortChunkSerial(std::vector<ExternalSorter::Record>& records) {
    std::sort(records.begin(), records.end(), recordLess);
}

void sortChunkParallel(std::vector<ExternalSorter::Record>& records, int workers) {
    workers = resolveWorkers(workers);
#ifndef _OPENMP
    (void)workers;
    sortChunkSerial(records);
#else
    const std::size_t n = records.size();
    if (workers <= 1 || n < 4096) {
        sortChunkSerial(records);
        return;
    }
    // Sort contiguous slices in parallel, then pairwise inplace_merge passes.
    // All record keys are distinct, so the result is the unique sorted order
    // regardless of worker count.
    std::vector<std::size_t> bounds(static_cast<std::size_t>(workers) + 1);
    for (int i = 0; i <= workers; ++i)
        bounds[static_cast<std::size_t>(i)] = n * static_cast<std::size_t>(i) /
                                              static_cast<std::size_t>(workers);
#pragma omp parallel for num_threads(workers) schedule(static)
    for (int i = 0; i < workers; ++i)
        std::sort(records.begin() + static_cast<std::ptrdiff_t>(bounds[i]),
                  records.begin() + static_cast<std::ptrdiff_t>(bounds[i + 1]), recordLess);
    for (int width = 1; width < workers; width *= 2) {
#pragma omp parallel for num_threads(workers) schedule(dynamic)
        for (int i = 0; i < workers; i += 2 * width) {
            int mid = i + width;
            int end = std::min(i + 2 * width, workers);
            if (mid < end)
                std::inplace_merge(records.begin() + static_cast<std::ptrdiff_t>(bounds[i]),
                                   records.begin() + static_cast<std::ptrdiff_t>(bounds[mid]),
                                   records.begin() + static_cast<std::ptrdiff_t>(bounds[end]),
                                   recordLess);
        }
    }
#endif
}

// ---------------------------------------------------------------------------
// ExternalSorter

struct ExternalSorter::MergeState {
    struct Head {
        RunReader::Record rec;
        std::size_t src;
    };
    struct HeadGreater {
        bool operator()(const Head& a, const Head& b) const { return a.rec.key > b.rec.key; }
    };
    std::vector<std::unique_ptr<RunReader>> readers;
    std::priority_queue<Head, std::vector<Head>, HeadGreater> heap;
};

ExternalSorter::ExternalSorter(std::string tempDir, std::uint64_t memBudgetRows, int parallelism)
    : tempDir_(std::move(tempDir)),
      budget_(std::max<std::uint64_t>(memBudgetRows, 2)),
      parallelism_(parallelism) {}

ExternalSorter::~ExternalSorter() {
    for (const auto& f : spillFiles_) {
        std::error_code ec;
        fs::remove(f, ec);
    }
}

void ExternalSorter::add(const EncodedKey& key, std::string value) {
    LARA_CHECK(!finished_, "add after finishAdding");
    Metrics::global().tuplesMaterialized += 1;
    Metrics::global().bytesSorted += key.size() + kSeqBytes + value.size();
    Record r;
    r.key = key + seqBytes(seq_++);
    r.value = std::move(value);
    buffer_.push_back(std::move(r));
    if (buffer_.size() >= budget_) spill();
}

void ExternalSorter::spill() {
    if (buffer_.empty()) return;
    sortChunkParallel(buffer_, parallelism_);
    fs::create_directories(tempDir_);
    std::string file =
        (fs::path(tempDir_) / ("spill-" + std::to_string(spillFiles_.size()) + ".dat")).string();
    RunWriter w(file);
    for (const auto& r : buffer_) w.append(r.key, r.value);
    w.finish();
    spillFiles_.push_back(std::move(file));
    buffer_.clear();
}

void ExternalSorter::finishAdding() {
    LARA_CHECK(!finished_, "finishAdding twice");
    finished_ = true;
    if (spillFiles_.empty()) {
        sortChunkParallel(buffer_, parallelism_);
        std::reverse(buffer_.begin(), buffer_.end()); // consume cheaply from the back
        return;
    }
    spill();
    merge_ = std::make_unique<MergeState>();
    for (const auto& f : spillFiles_) {
        auto r = std::make_unique<RunReader>(f);
        if (auto rec = r->next())
            merge_->heap.push({std::move(*rec), merge_->readers.size()});
        merge_->readers.push_back(std::move(r));
    }
}

std::optional<ExternalSorter::Record> ExternalSorter::next() {
    LARA_CHECK(finished_, "next before finishAdding");
    if (!merge_) {
        if (buffer_.empty()) return std::nullopt;
        Record r = std::move(buffer_.back());
        buffer_.pop_back();
        return r;
    }
    if (merge_->heap.empty()) return std::nullopt;
    MergeState::Head top = merge_->heap.top();
    merge_->heap.pop();
    if (auto rec = merge_->readers[top.src]->next())
        merge_->heap.push({std::move(*rec), top.src});
    return Record{std::move(top.rec.key), std::move(top.rec.value)};
}

// ---------------------------------------------------------------------------
// Partition planning

std::vector<EncodedKey> chooseSplits(const std::vector<EncodedKey>& sortedKeys, int parts) {
    std::vector<EncodedKey> out;
    if (parts <= 1 || sortedKeys.empty()) return out;
    const std::size_t n = sortedKeys.size();
    for (int i = 1; i < parts; ++i) {
        const EncodedKey& k = sortedKeys[n * static_cast<std::size_t>(i) /
                                         static_cast<std::size_t>(parts)];
        if (k <= sortedKeys.front()) continue; // never open with an empty first partition
        if (!out.empty() && k <= out.back()) continue;
        out.push_back(k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Store writing

namespace {

/// A sorted, folded, canonical record stream: key bytes in path order plus
/// the encoded value tuple.
using RecordSource = std::function<std::optional<RunReader::Record>()>;

/// Writes `folded` into a temp run, picks splits for near-equal partition
/// sizes, re-splits into per-partition run files, swaps the manifest, and
/// removes files of earlier versions.
SortedTableStore writePartitioned(const std::string& dir, const TableSchema& schema,
                                  const AccessPath& path, bool packed, std::uint64_t version,
                                  const RecordSource& folded, int parts,
                                  const std::vector<EncodedKey>& requestedSplits = {}) {
    fs::create_directories(dir);
    const std::string tmpRun = (fs::path(dir) / "tmp-run.dat").string();
    std::vector<EncodedKey> keys;
    {
        RunWriter w(tmpRun);
        while (auto rec = folded()) {
            w.append(rec->key, rec->value);
            keys.push_back(std::move(rec->key));
        }
        Metrics::global().rowsOut += w.finish();
    }
    // Explicit boundaries are filtered like chosen ones: strictly increasing
    // and never opening an empty first partition.
    std::vector<EncodedKey> splits;
    if (!requestedSplits.empty() && !keys.empty()) {
        for (const auto& k : requestedSplits) {
            if (k <= keys.front()) continue;
            if (!splits.empty() && k <= splits.back()) continue;
            splits.push_back(k);
        }
    } else {
        splits = chooseSplits(keys, parts);
    }

    std::vector<Partition> partitions;
    {
        RunReader r(tmpRun);
        std::size_t split = 0;
        std::unique_ptr<RunWriter> w;
        Partition cur;
        auto closePart = [&]() {
            if (!w) return;
            cur.rows = w->finish();
            w.reset();
            partitions.push_back(std::move(cur));
        };
        auto openPart = [&](EncodedKey lo) {
            cur = Partition{};
            cur.lo = std::move(lo);
            cur.file = "run-v" + std::to_string(version) + "-p" +
                       std::to_string(partitions.size()) + ".dat";
            w = std::make_unique<RunWriter>((fs::path(dir) / cur.file).string());
        };
        while (auto rec = r.next()) {
            while (split < splits.size() && rec->key >= splits[split]) {
                closePart();
                openPart(splits[split]);
                ++split;
            }
            if (!w) openPart(EncodedKey());
            w->append(rec->key, rec->value);
        }
        closePart();
    }
    fs::remove(tmpRun);

    std::uint64_t rows = 0;
    for (const auto& p : partitions) rows += p.rows;
    SortedTableStore out =
        writeManifestAndOpen(dir, schema, path, packed, version, rows, partitions, {});

    // Drop data files that the fresh manifest no longer references.
    std::vector<std::string> keep;
    for (const auto& p : partitions) keep.push_back(p.file);
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        const bool dataFile = name.rfind("run-", 0) == 0 || name.rfind("extra-", 0) == 0;
        if (dataFile && std::find(keep.begin(), keep.end(), name) == keep.end())
            fs::remove(e.path());
    }
    return out;
}

/// Wraps a (key,seq)-ordered sorter in duplicate handling: equal keys are
/// folded attribute-by-attribute in arrival order, or rejected when no fold
/// is given. Rows folding to all defaults are dropped (canonical support).
class FoldingReader {
public:
    FoldingReader(ExternalSorter& sorter, const TableSchema& schema, bool packed,
                  const std::map<std::string, PlusFn>* foldWith)
        : sorter_(sorter), schema_(schema), packed_(packed) {
        for (const auto& a : schema.attrs()) {
            if (a.kind != core::AttrKind::Value) continue;
            valTypes_.push_back(a.type);
            defaults_.push_back(a.dflt);
            if (foldWith) {
                auto it = foldWith->find(a.name);
                if (it == foldWith->end())
                    throw UsageError("no fold given for value attribute " + a.name);
                folds_.push_back(&it->second);
            }
        }
        foldWith_ = foldWith != nullptr;
    }

    std::optional<RunReader::Record> next() {
        while (true) {
            if (!pending_) pending_ = sorter_.next();
            if (!pending_) return std::nullopt;
            EncodedKey key = stripSeq(pending_->key);
            std::vector<ScalarValue> acc = decodeValueTuple(pending_->value, valTypes_, packed_);
            pending_.reset();
            while ((pending_ = sorter_.next())) {
                if (stripSeq(pending_->key) != key) break;
                if (!foldWith_)
                    throw UsageError("duplicate key in store input (no fold given): " +
                                     describeKey(key));
                std::vector<ScalarValue> nxt =
                    decodeValueTuple(pending_->value, valTypes_, packed_);
                for (std::size_t i = 0; i < acc.size(); ++i)
                    acc[i] = folds_[i]->apply(acc[i], nxt[i]);
                pending_.reset();
            }
            bool allDefault = true;
            for (std::size_t i = 0; i < acc.size() && allDefault; ++i)
                if (acc[i].compare(defaults_[i]) != 0) allDefault = false;
            if (allDefault) continue;
            return RunReader::Record{std::move(key), encodeValueTuple(acc, packed_)};
        }
    }

private:
    static EncodedKey stripSeq(const EncodedKey& k) {
        return k.substr(0, k.size() - ExternalSorter::kSeqBytes);
    }
    std::string describeKey(const EncodedKey& key) const {
        std::vector<ScalarType> keyTypes;
        for (const auto& a : schema_.attrs())
            if (a.kind == core::AttrKind::Key) keyTypes.push_back(a.type);
        // Key bytes are in path order but path types are a permutation of key
        // types only by position; decode defensively for the error message.
        try {
            auto vals = decodeKeyTuple(key, keyTypes);
            std::string out = "(";
            for (std::size_t i = 0; i < vals.size(); ++i)
                out += (i ? ", " : "") + vals[i].toLiteral();
            return out + ")";
        } catch (const Error&) {
            return "<" + std::to_string(key.size()) + " key bytes>";
        }
    }

    ExternalSorter& sorter_;
    const TableSchema& schema_;
    bool packed_;
    bool foldWith_ = false;
    std::vector<ScalarType> valTypes_;
    std::vector<ScalarValue> defaults_;
    std::vector<const PlusFn*> folds_;
    std::optional<ExternalSorter::Record> pending_;
};

void checkPathMatchesSchema(const TableSchema& schema, const AccessPath& path) {
    if (path.size() != schema.keyCount())
        throw UsageError("access path " + path.toText() + " must name every key attribute");
    std::vector<std::string> sorted = path.attrs;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw UsageError("access path repeats an attribute: " + path.toText());
    for (const auto& p : path.attrs)
        if (!schema.hasKey(p)) throw UsageError("access path names non-key attribute " + p);
}

std::uint64_t nextVersion(const std::string& dir) {
    if (!SortedTableStore::existsAt(dir)) return 1;
    return SortedTableStore::open(dir).version() + 1;
}

} // namespace

SortedTableStore writeSortedRecords(
    const std::string& dir, const TableSchema& schema, const AccessPath& path, bool packed,
    const std::function<std::optional<RunReader::Record>()>& records, const StoreOptions& opts) {
    checkPathMatchesSchema(schema, path);
    return writePartitioned(dir, schema, path, packed, nextVersion(dir), records, opts.partitions,
                            opts.splitKeys);
}

SortedTableStore sortWrite(const std::string& dir, const TableSchema& schema,
                           const AccessPath& path, const RowSource& source,
                           const StoreOptions& opts, const std::map<std::string, PlusFn>* foldWith) {
    checkPathMatchesSchema(schema, path);
    const bool packed = opts.packed;
    if (packed && !valueSchemaIsPackable(schema))
        throw UsageError("schema is not packable (needs non-nullable numeric values)");
    const std::uint64_t version = nextVersion(dir);
    fs::create_directories(dir);

    ExternalSorter sorter((fs::path(dir) / "tmp-sort").string(), opts.memBudgetRows,
                          opts.parallelism);
    const auto valNames = schema.valueNames();
    while (auto row = source()) {
        std::vector<ScalarValue> key;
        key.reserve(path.size());
        for (const auto& p : path.attrs) key.push_back(row->get(p));
        std::vector<ScalarValue> vals;
        vals.reserve(valNames.size());
        for (const auto& v : valNames) vals.push_back(row->get(v));
        sorter.add(encodeKeyTuple(key), encodeValueTuple(vals, packed));
    }
    sorter.finishAdding();

    FoldingReader folded(sorter, schema, packed, foldWith);
    SortedTableStore out =
        writePartitioned(dir, schema, path, packed, version,
                         [&folded]() { return folded.next(); }, opts.partitions, opts.splitKeys);
    std::error_code ec;
    fs::remove_all(fs::path(dir) / "tmp-sort", ec);
    return out;
}

SortedTableStore appendRun(const std::string& dir, const RowSource& source) {
    SortedTableStore store = SortedTableStore::open(dir);
    const TableSchema& schema = store.schema();
    const AccessPath& path = store.path();

    // Sort the incoming rows; duplicates are allowed here (within the run and
    // against stored data) because only compaction interprets them.
    ExternalSorter sorter((fs::path(dir) / "tmp-sort").string(), 1u << 20, 0);
    const auto valNames = schema.valueNames();
    std::uint64_t appended = 0;
    while (auto row = source()) {
        std::vector<ScalarValue> key;
        for (const auto& p : path.attrs) key.push_back(row->get(p));
        std::vector<ScalarValue> vals;
        for (const auto& v : valNames) vals.push_back(row->get(v));
        sorter.add(encodeKeyTuple(key), encodeValueTuple(vals, store.packed()));
        ++appended;
    }
    sorter.finishAdding();

    std::vector<Partition> extras(store.extras().begin(), store.extras().end());
    Partition extra;
    extra.file = "extra-v" + std::to_string(store.version()) + "-" +
                 std::to_string(extras.size()) + ".dat";
    extra.rows = appended;
    {
        RunWriter w((fs::path(dir) / extra.file).string());
        while (auto rec = sorter.next())
            w.append(rec->key.substr(0, rec->key.size() - ExternalSorter::kSeqBytes), rec->value);
        w.finish();
    }
    std::error_code ec;
    fs::remove_all(fs::path(dir) / "tmp-sort", ec);
    extras.push_back(std::move(extra));

    return writeManifestAndOpen(dir, schema, path, store.packed(), store.version(),
                                store.rowCount() + appended,
                                std::vector<Partition>(store.partitions().begin(),
                                                       store.partitions().end()),
                                std::move(extras));
}

SortedTableStore compactWithAgg(const std::string& dir, const std::map<std::string, PlusFn>& plusBy,
                                const StoreOptions& opts) {
    SortedTableStore store = SortedTableStore::open(dir);
    const TableSchema& schema = store.schema();
    const bool packed = store.packed();

    std::vector<ScalarType> valTypes;
    std::vector<ScalarValue> defaults;
    std::vector<const PlusFn*> folds;
    for (const auto& a : schema.attrs()) {
        if (a.kind != core::AttrKind::Value) continue;
        valTypes.push_back(a.type);
        defaults.push_back(a.dflt);
        auto it = plusBy.find(a.name);
        if (it == plusBy.end()) throw UsageError("no fold given for value attribute " + a.name);
        folds.push_back(&it->second);
    }

    // Merge streams: stream 0 is the main partitions end-to-end (already
    // globally sorted), streams 1..n are the appended runs. Ties fold in
    // stream order, which is exactly main-then-appended arrival order.
    struct Stream {
        std::vector<std::string> files;
        std::size_t at = 0;
        std::unique_ptr<RunReader> reader;
        std::optional<RunReader::Record> head;
        void advance(const std::string& dir) {
            while (true) {
                if (reader) {
                    head = reader->next();
                    if (head) return;
                    reader.reset();
                }
                if (at >= files.size()) {
                    head.reset();
                    return;
                }
                reader = std::make_unique<RunReader>((fs::path(dir) / files[at++]).string());
            }
        }
    };
    std::vector<Stream> streams(1 + store.extras().size());
    for (const auto& p : store.partitions()) streams[0].files.push_back(p.file);
    for (std::size_t i = 0; i < store.extras().size(); ++i)
        streams[i + 1].files.push_back(store.extras()[i].file);
    for (auto& s : streams) s.advance(dir);

    auto popMin = [&]() -> std::optional<RunReader::Record> {
        std::size_t best = streams.size();
        for (std::size_t i = 0; i < streams.size(); ++i) {
            if (!streams[i].head) continue;
            if (best == streams.size() || streams[i].head->key < streams[best].head->key) best = i;
        }
        if (best == streams.size()) return std::nullopt;
        RunReader::Record rec = std::move(*streams[best].head);
        streams[best].advance(dir);
        return rec;
    };

    std::optional<RunReader::Record> pending = popMin();
    auto folded = [&]() -> std::optional<RunReader::Record> {
        while (pending) {
            EncodedKey key = pending->key;
            std::vector<ScalarValue> acc = decodeValueTuple(pending->value, valTypes, packed);
            pending = popMin();
            while (pending && pending->key == key) {
                std::vector<ScalarValue> nxt = decodeValueTuple(pending->value, valTypes, packed);
                for (std::size_t i = 0; i < acc.size(); ++i)
                    acc[i] = folds[i]->apply(acc[i], nxt[i]);
                pending = popMin();
            }
            bool allDefault = true;
            for (std::size_t i = 0; i < acc.size() && allDefault; ++i)
                if (acc[i].compare(defaults[i]) != 0) allDefault = false;
            if (allDefault) continue;
            return RunReader::Record{std::move(key), encodeValueTuple(acc, packed)};
        }
        return std::nullopt;
    };

    return writePartitioned(dir, schema, store.path(), packed, store.version() + 1, folded,
                            opts.partitions, opts.splitKeys);
}

SortedTableStore storeTable(const std::string& dir, const AssociativeTable& table,
                            const AccessPath& path, const StoreOptions& opts) {
    auto rows = std::make_shared<std::vector<TupleRow>>(table.rows());
    std::size_t at = 0;
    RowSource source = [rows, at]() mutable -> std::optional<TupleRow> {
        if (at >= rows->size()) return std::nullopt;
        return (*rows)[at++];
    };
    return sortWrite(dir, table.schema(), path, source, opts, nullptr);
}

} // namespace lara::storage
