#include "laradb/stream.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>

#include "laradb/metrics.hpp"

namespace lara::physical {

namespace fs = std::filesystem;
using core::AttributeSchema;
using core::ScalarType;
using core::TableSchema;
using storage::EncodedKey;
using storage::RunReader;
using storage::RunWriter;

namespace {

int compareTuples(const std::vector<ScalarValue>& a, const std::vector<ScalarValue>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        int c = a[i].compare(b[i]);
        if (c != 0) return c;
    }
    return 0;
}

std::vector<ScalarValue> projectValues(const TupleRow& row, const std::vector<std::string>& names) {
    std::vector<ScalarValue> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(row.get(n));
    return out;
}

std::string freshTempDir(const char* tag) {
    static std::atomic<std::uint64_t> counter{0};
    return (fs::temp_directory_path() /
            ("laradb-" + std::string(tag) + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++)))
        .string();
}

/// Per-input order sentinel: every stream must deliver strictly increasing
/// path keys; merges rely on it, so they verify as they pull.
class OrderSentinel {
public:
    explicit OrderSentinel(std::vector<std::string> pathAttrs, std::string who)
        : attrs_(std::move(pathAttrs)), who_(std::move(who)) {}

    void observe(const TupleRow& row) {
        std::vector<ScalarValue> key = projectValues(row, attrs_);
        if (!last_.empty() && compareTuples(last_, key) >= 0)
            throw Error("unsorted input to " + who_ + ": key " + row.toText() +
                        " does not ascend");
        last_ = std::move(key);
    }

private:
    std::vector<std::string> attrs_;
    std::string who_;
    std::vector<ScalarValue> last_;
};

/// A group of rows buffered in insertion order: in memory up to the budget,
/// then spilled to a temporary run file and replayed from disk.
class RowGroupBuffer {
public:
    RowGroupBuffer(TupleRow::Names names, std::vector<ScalarType> types, std::uint64_t budgetRows,
                   std::string spillFile)
        : names_(std::move(names)), types_(std::move(types)), budget_(budgetRows),
          spillFile_(std::move(spillFile)) {}

    ~RowGroupBuffer() { clear(); }

    void add(TupleRow row) {
        Metrics::global().tuplesMaterialized += 1;
        if (mem_.size() < budget_) {
            mem_.push_back(std::move(row));
            return;
        }
        if (!writer_) {
            fs::create_directories(fs::path(spillFile_).parent_path());
            writer_ = std::make_unique<RunWriter>(spillFile_);
        }
        std::string seq(8, '\0');
        for (int i = 0; i < 8; ++i)
            seq[static_cast<std::size_t>(i)] = static_cast<char>((spilled_ >> (8 * (7 - i))) & 0xff);
        writer_->append(seq, storage::encodeValueTuple(row.values(), false));
        ++spilled_;
    }

    std::uint64_t size() const { return mem_.size() + spilled_; }

    void clear() {
        mem_.clear();
        writer_.reset();
        if (spilled_ > 0) {
            std::error_code ec;
            fs::remove(spillFile_, ec);
            fs::remove(fs::path(spillFile_).parent_path(), ec); // only if empty
            spilled_ = 0;
        }
        sealed_ = false;
    }

    /// Replay in insertion order; may be called repeatedly per group.
    class Iter {
    public:
        explicit Iter(RowGroupBuffer* b) : b_(b) {}
        std::optional<TupleRow> next() {
            if (at_ < b_->mem_.size()) return b_->mem_[at_++];
            if (b_->spilled_ == 0) return std::nullopt;
            if (!reader_) reader_ = std::make_unique<RunReader>(b_->spillFile_);
            auto rec = reader_->next();
            if (!rec) return std::nullopt;
            return TupleRow(b_->names_, storage::decodeValueTuple(rec->value, b_->types_, false));
        }

    private:
        RowGroupBuffer* b_;
        std::size_t at_ = 0;
        std::unique_ptr<RunReader> reader_;
    };

    Iter iterate() {
        if (writer_ && !sealed_) {
            writer_->finish();
            writer_.reset();
            sealed_ = true;
        }
        return Iter(this);
    }

private:
    friend class Iter;
    TupleRow::Names names_;
    std::vector<ScalarType> types_;
    std::uint64_t budget_;
    std::string spillFile_;
    std::vector<TupleRow> mem_;
    std::unique_ptr<RunWriter> writer_;
    std::uint64_t spilled_ = 0;
    bool sealed_ = false;
};

std::vector<ScalarType> rowTypes(const TableSchema& schema, const std::vector<std::string>& names) {
    std::vector<ScalarType> out;
    for (const auto& n : names) out.push_back(schema.at(n).type);
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// RowStream base

RowStream::RowStream(TableSchema schema, AccessPath path)
    : schema_(std::move(schema)), path_(std::move(path)) {
    LARA_CHECK(path_.size() == schema_.keyCount(),
               "stream path must name every key attribute: " + path_.toText());
    std::vector<std::string> names = path_.attrs;
    for (const auto& p : names)
        LARA_CHECK(schema_.hasKey(p), "stream path names non-key attribute " + p);
    for (const auto& v : schema_.valueNames()) names.push_back(v);
    names_ = TupleRow::shareNames(std::move(names));
}

// ---------------------------------------------------------------------------
// Sources

namespace {

class ScanStream final : public RowStream {
public:
    ScanStream(std::shared_ptr<SortedTableStore> store, std::optional<std::vector<ScalarValue>> lo,
               std::optional<std::vector<ScalarValue>> hi)
        : RowStream(store->schema(), store->path()), store_(std::move(store)),
          scan_(store_->scan(std::move(lo), std::move(hi))) {}

    std::optional<TupleRow> next() override {
        auto row = scan_.next();
        if (row) Metrics::global().rowsIn += 1;
        return row;
    }

private:
    std::shared_ptr<SortedTableStore> store_;
    SortedTableStore::Scan scan_;
};

class VectorStream final : public RowStream {
public:
    VectorStream(TableSchema schema, AccessPath path, std::vector<TupleRow> rows)
        : RowStream(std::move(schema), std::move(path)), rows_(std::move(rows)) {}

    std::optional<TupleRow> next() override {
        if (at_ >= rows_.size()) return std::nullopt;
        return rows_[at_++];
    }

private:
    std::vector<TupleRow> rows_;
    std::size_t at_ = 0;
};

class OrderCheckStream final : public RowStream {
public:
    explicit OrderCheckStream(StreamPtr in)
        : RowStream(in->schema(), in->path()), in_(std::move(in)),
          sentinel_(path_.attrs, "stream of " + path_.toText()) {}

    std::optional<TupleRow> next() override {
        auto row = in_->next();
        if (row) sentinel_.observe(*row);
        return row;
    }

private:
    StreamPtr in_;
    OrderSentinel sentinel_;
};

} // namespace

StreamPtr scanStore(std::shared_ptr<SortedTableStore> store,
                    std::optional<std::vector<ScalarValue>> lo,
                    std::optional<std::vector<ScalarValue>> hi) {
    return std::make_unique<ScanStream>(std::move(store), std::move(lo), std::move(hi));
}

StreamPtr loadRange(const Catalog& catalog, const std::string& name,
                    std::optional<std::vector<ScalarValue>> lo,
                    std::optional<std::vector<ScalarValue>> hi) {
    auto store = std::make_shared<SortedTableStore>(catalog.open(name));
    return scanStore(std::move(store), std::move(lo), std::move(hi));
}

StreamPtr streamTable(AssociativeTable table, AccessPath path) {
    // Re-key the support into path order.
    TableSchema schema = table.schema();
    std::vector<std::string> names = path.attrs;
    for (const auto& v : schema.valueNames()) names.push_back(v);
    auto shared = TupleRow::shareNames(names);
    std::vector<TupleRow> rows;
    for (const auto& row : table.rows()) rows.push_back(row.project(*shared));
    std::sort(rows.begin(), rows.end(), [&](const TupleRow& a, const TupleRow& b) {
        for (std::size_t i = 0; i < path.size(); ++i) {
            int c = a.valueAt(i).compare(b.valueAt(i));
            if (c != 0) return c < 0;
        }
        return false;
    });
    return std::make_unique<VectorStream>(std::move(schema), std::move(path), std::move(rows));
}

StreamPtr orderChecked(StreamPtr in) {
    return std::make_unique<OrderCheckStream>(std::move(in));
}

// ---------------------------------------------------------------------------
// Merge join

namespace {

class MergeJoinStream final : public RowStream {
public:
    MergeJoinStream(StreamPtr a, StreamPtr b, const std::map<std::string, TimesFn>& times,
                    std::uint64_t budget, core::JoinShape shape, AccessPath outPath,
                    udf::ExprPtr emitFilter)
        : RowStream(shape.schema, std::move(outPath)), a_(std::move(a)), b_(std::move(b)),
          shape_(std::move(shape)), emitFilter_(std::move(emitFilter)),
          aSentinel_(a_->path().attrs, "merge join left input"),
          bSentinel_(b_->path().attrs, "merge join right input"),
          tempDir_(freshTempDir("join")),
          aBuf_(a_->names(), rowTypes(a_->schema(), *a_->names()), budget,
                tempDir_ + "/a-group.dat"),
          bBuf_(b_->names(), rowTypes(b_->schema(), *b_->names()), budget,
                tempDir_ + "/b-group.dat"),
          aIter_(nullptr), bIter_(nullptr) {
        (void)times; // already bound into shape_
        // Per-row layout: a's full path keys, b's not-shared path keys, values.
        for (const auto& p : b_->path().attrs)
            if (std::find(shape_.sharedKeys.begin(), shape_.sharedKeys.end(), p) ==
                shape_.sharedKeys.end())
                bOnlyPath_.push_back(p);
        for (const auto& n : shape_.values) valueTypes_.push_back(schema_.at(n).type);
        aHead_ = pull(*a_, aSentinel_);
        bHead_ = pull(*b_, bSentinel_);
    }

    std::optional<TupleRow> next() override {
        while (true) {
            if (aRow_) {
                if (auto brow = bIter_.next()) {
                    if (auto out = combine(*aRow_, *brow)) return out;
                    continue; // pair rejected by the emit filter
                }
                aRow_ = aIter_.next();
                if (aRow_) {
                    bIter_ = bBuf_.iterate();
                    continue;
                }
            }
            if (!loadNextGroup()) return std::nullopt;
        }
    }

private:
    std::optional<TupleRow> pull(RowStream& s, OrderSentinel& sentinel) {
        auto row = s.next();
        if (row) sentinel.observe(*row);
        return row;
    }

    std::vector<ScalarValue> sharedOf(const TupleRow& row) const {
        return projectValues(row, shape_.sharedKeys);
    }

    bool loadNextGroup() {
        aBuf_.clear();
        bBuf_.clear();
        while (aHead_ && bHead_) {
            int c = compareTuples(sharedOf(*aHead_), sharedOf(*bHead_));
            if (c < 0) {
                skipGroup(*a_, aHead_, aSentinel_);
            } else if (c > 0) {
                skipGroup(*b_, bHead_, bSentinel_);
            } else {
                std::vector<ScalarValue> g = sharedOf(*aHead_);
                fillGroup(*a_, aHead_, aSentinel_, g, aBuf_);
                fillGroup(*b_, bHead_, bSentinel_, g, bBuf_);
                aIter_ = aBuf_.iterate();
                bIter_ = bBuf_.iterate();
                aRow_ = aIter_.next();
                return true;
            }
        }
        return false;
    }

    void skipGroup(RowStream& s, std::optional<TupleRow>& head, OrderSentinel& sentinel) {
        std::vector<ScalarValue> g = sharedOf(*head);
        do {
            head = pull(s, sentinel);
        } while (head && compareTuples(sharedOf(*head), g) == 0);
    }

    void fillGroup(RowStream& s, std::optional<TupleRow>& head, OrderSentinel& sentinel,
                   const std::vector<ScalarValue>& g, RowGroupBuffer& buf) {
        while (head && compareTuples(sharedOf(*head), g) == 0) {
            buf.add(std::move(*head));
            head = pull(s, sentinel);
        }
    }

    std::optional<TupleRow> combine(const TupleRow& arow, const TupleRow& brow) {
        std::vector<ScalarValue> out;
        out.reserve(names_->size());
        for (const auto& p : a_->path().attrs) out.push_back(arow.get(p));
        for (const auto& p : bOnlyPath_) out.push_back(brow.get(p));
        // Expression combiners may reference output keys by name; hand them
        // the key slice of the output row.
        std::vector<ScalarValue> keyVals(out.begin(),
                                         out.begin() + static_cast<std::ptrdiff_t>(path_.size()));
        TupleRow keys(keysNames(), std::move(keyVals));
        if (emitFilter_) {
            const ScalarValue pass = udf::evalScalarExpr(*emitFilter_, keys);
            if (pass.isNull() || !truthy(pass)) return std::nullopt;
        }
        Metrics::global().partialProducts += 1;
        for (std::size_t i = 0; i < shape_.values.size(); ++i) {
            const auto& n = shape_.values[i];
            ScalarValue v = shape_.combiners.at(n).apply(arow.get(n), brow.get(n), &keys);
            out.push_back(udf::coerceTo(std::move(v), valueTypes_[i]));
        }
        return TupleRow(names_, std::move(out));
    }

    static bool truthy(const ScalarValue& v) {
        if (v.type() == core::ScalarType::Bool) return v.asBool();
        if (v.type() == core::ScalarType::Int64) return v.asI64() != 0;
        if (v.type() == core::ScalarType::Float64) return v.asF64() != 0.0;
        return false;
    }

    const TupleRow::Names& keysNames() {
        if (!keysNames_) keysNames_ = TupleRow::shareNames(path_.attrs);
        return keysNames_;
    }

    StreamPtr a_, b_;
    core::JoinShape shape_;
    udf::ExprPtr emitFilter_;
    OrderSentinel aSentinel_, bSentinel_;
    std::string tempDir_;
    RowGroupBuffer aBuf_, bBuf_;
    RowGroupBuffer::Iter aIter_, bIter_;
    std::optional<TupleRow> aHead_, bHead_, aRow_;
    std::vector<std::string> bOnlyPath_;
    std::vector<ScalarType> valueTypes_;
    TupleRow::Names keysNames_;
};

} // namespace

StreamPtr mergeJoin(StreamPtr a, StreamPtr b, const std::map<std::string, TimesFn>& times,
                    std::uint64_t aGroupBudgetRows, udf::ExprPtr emitFilter) {
    core::JoinShape shape = core::joinShape(a->schema(), b->schema(), times);

    // Both inputs must present the shared keys as an identical path prefix.
    const std::size_t s = shape.sharedKeys.size();
    for (std::size_t i = 0; i < s; ++i) {
        if (i >= a->path().size() || i >= b->path().size() ||
            a->path().attrs[i] != b->path().attrs[i] ||
            std::find(shape.sharedKeys.begin(), shape.sharedKeys.end(), a->path().attrs[i]) ==
                shape.sharedKeys.end())
            throw PlanError("sort required: merge join inputs must share their common keys as an "
                            "identical path prefix (" +
                            a->path().toText() + " vs " + b->path().toText() + ")");
    }

    AccessPath outPath;
    outPath.attrs = a->path().attrs;
    for (const auto& p : b->path().attrs)
        if (std::find(shape.sharedKeys.begin(), shape.sharedKeys.end(), p) ==
            shape.sharedKeys.end())
            outPath.attrs.push_back(p);

    if (emitFilter)
        for (const auto& r : emitFilter->referencedAttrs())
            if (std::find(outPath.attrs.begin(), outPath.attrs.end(), r) == outPath.attrs.end())
                throw PlanError("join emit filter may reference output key attributes only; found " +
                                r);

    return std::make_unique<MergeJoinStream>(std::move(a), std::move(b), times, aGroupBudgetRows,
                                             std::move(shape), std::move(outPath),
                                             std::move(emitFilter));
}

// ---------------------------------------------------------------------------
// Merge union / aggregate

namespace {

class MergeUnionAggStream final : public RowStream {
public:
    MergeUnionAggStream(StreamPtr a, StreamPtr b, AccessPath onKeys, core::UnionShape shape)
        : RowStream(shape.schema, onKeys), a_(std::move(a)), b_(std::move(b)),
          shape_(std::move(shape)), onKeys_(std::move(onKeys)),
          aSentinel_(a_->path().attrs, "merge union/aggregate left input"),
          bSentinel_(b_ ? b_->path().attrs : std::vector<std::string>{},
                     "merge union/aggregate right input") {
        defaults_ = schema_.defaultValues();
        for (const auto& n : shape_.values) {
            aHas_.push_back(a_->schema().hasValue(n));
            bHas_.push_back(b_ && b_->schema().hasValue(n));
        }
        aHead_ = pull(*a_, aSentinel_);
        if (b_) bHead_ = pull(*b_, bSentinel_);
    }

    std::optional<TupleRow> next() override {
        if (!aHead_ && !bHead_) return std::nullopt;

        // The next group key is the smaller head projection.
        std::vector<ScalarValue> g;
        if (aHead_ && bHead_) {
            std::vector<ScalarValue> pa = proj(*aHead_), pb = proj(*bHead_);
            g = compareTuples(pa, pb) <= 0 ? std::move(pa) : std::move(pb);
        } else {
            g = proj(aHead_ ? *aHead_ : *bHead_);
        }

        std::vector<ScalarValue> acc = defaults_;
        drain(*a_, aHead_, aSentinel_, g, aHas_, acc);
        if (b_) drain(*b_, bHead_, bSentinel_, g, bHas_, acc);

        std::vector<ScalarValue> out = std::move(g);
        out.insert(out.end(), std::make_move_iterator(acc.begin()),
                   std::make_move_iterator(acc.end()));
        return TupleRow(names_, std::move(out));
    }

private:
    std::optional<TupleRow> pull(RowStream& s, OrderSentinel& sentinel) {
        auto row = s.next();
        if (row) sentinel.observe(*row);
        return row;
    }

    std::vector<ScalarValue> proj(const TupleRow& row) const {
        return projectValues(row, onKeys_.attrs);
    }

    void drain(RowStream& s, std::optional<TupleRow>& head, OrderSentinel& sentinel,
               const std::vector<ScalarValue>& g, const std::vector<bool>& has,
               std::vector<ScalarValue>& acc) {
        while (head && compareTuples(proj(*head), g) == 0) {
            for (std::size_t i = 0; i < shape_.values.size(); ++i) {
                if (!has[i]) continue;
                const auto& n = shape_.values[i];
                acc[i] = shape_.folds.at(n).apply(acc[i], head->get(n));
            }
            head = pull(s, sentinel);
        }
    }

    StreamPtr a_, b_;
    core::UnionShape shape_;
    AccessPath onKeys_;
    OrderSentinel aSentinel_, bSentinel_;
    std::vector<ScalarValue> defaults_;
    std::vector<bool> aHas_, bHas_;
    std::optional<TupleRow> aHead_, bHead_;
};

void requirePrefix(const AccessPath& onKeys, const AccessPath& path, const char* side) {
    if (onKeys.size() > path.size())
        throw PlanError(std::string("sort required: ") + side + " input path " + path.toText() +
                        " is shorter than the merge key prefix " + onKeys.toText());
    for (std::size_t i = 0; i < onKeys.size(); ++i)
        if (onKeys.attrs[i] != path.attrs[i])
            throw PlanError(std::string("sort required: ") + side + " input path " +
                            path.toText() + " does not begin with " + onKeys.toText());
}

} // namespace

StreamPtr mergeUnionAgg(StreamPtr a, StreamPtr b, const AccessPath& onKeys,
                        const std::map<std::string, PlusFn>& plus) {
    requirePrefix(onKeys, a->path(), "left");
    core::UnionShape shape;
    if (b) {
        requirePrefix(onKeys, b->path(), "right");
        shape = core::unionShape(a->schema(), b->schema(), plus);
        if (shape.keys.size() != onKeys.size())
            throw PlanError("merge union on " + onKeys.toText() +
                            " must keep exactly the common key attributes");
        for (const auto& k : shape.keys)
            if (!onKeys.contains(k))
                throw PlanError("merge union on " + onKeys.toText() + " drops common key " + k);
    } else {
        shape = core::unionShape(a->schema(), core::aggKeySchema(a->schema(), onKeys.attrs), plus);
    }
    return std::make_unique<MergeUnionAggStream>(std::move(a), std::move(b), onKeys,
                                                 std::move(shape));
}

// ---------------------------------------------------------------------------
// Ext / Map

namespace {

class ExtMapStream final : public RowStream {
public:
    ExtMapStream(StreamPtr in, ExtFn fn, TableSchema outSchema, AccessPath outPath)
        : RowStream(std::move(outSchema), std::move(outPath)), in_(std::move(in)),
          fn_(std::move(fn)) {}

    std::optional<TupleRow> next() override {
        while (at_ >= pending_.size()) {
            auto row = in_->next();
            if (!row) return std::nullopt;
            emitRow(*row);
        }
        return std::move(pending_[at_++]);
    }

private:
    void emitRow(const TupleRow& row) {
        pending_.clear();
        at_ = 0;
        auto emissions = fn_.applyToRow(row);
        std::sort(emissions.begin(), emissions.end(),
                  [](const ExtFn::Emitted& x, const ExtFn::Emitted& y) {
                      return compareTuples(x.newKeys, y.newKeys) < 0;
                  });
        for (std::size_t i = 1; i < emissions.size(); ++i)
            if (compareTuples(emissions[i - 1].newKeys, emissions[i].newKeys) == 0)
                throw UsageError("tableau emitted the same key twice for input row " +
                                 row.toText());
        for (auto& e : emissions) {
            std::vector<ScalarValue> out;
            out.reserve(names_->size());
            for (const auto& p : in_->path().attrs) out.push_back(row.get(p));
            out.insert(out.end(), std::make_move_iterator(e.newKeys.begin()),
                       std::make_move_iterator(e.newKeys.end()));
            out.insert(out.end(), std::make_move_iterator(e.values.begin()),
                       std::make_move_iterator(e.values.end()));
            pending_.push_back(TupleRow(names_, std::move(out)));
        }
    }

    StreamPtr in_;
    ExtFn fn_;
    std::vector<TupleRow> pending_;
    std::size_t at_ = 0;
};

/// Re-orders tableau emissions to the target path without a full sort.
/// Input rows are grouped by their leading path attribute; since the new-key
/// expressions read only that attribute, each group emits a fixed set of
/// new-key tuples, non-decreasing across groups (the function is monotone).
/// Groups with overlapping new-key ranges are buffered together and sorted as
/// one run; a run flushes once the next group's smallest new key exceeds
/// every new key buffered, which is what bounds the buffer and removes the
/// downstream sort. A global order check backstops the monotonicity claim.
class ExtOverStream final : public RowStream {
public:
    ExtOverStream(StreamPtr in, ExtFn fn, AccessPath targetPath, TableSchema outSchema,
                  std::uint64_t budget)
        : RowStream(std::move(outSchema), std::move(targetPath)), in_(std::move(in)),
          fn_(std::move(fn)), budget_(budget), tempDir_(freshTempDir("extover")) {
        lead_ = in_->path().attrs.front();
        for (const auto& p : path_.attrs) keyTypes_.push_back(schema_.at(p).type);
        for (const auto& v : schema_.valueNames()) valTypes_.push_back(schema_.at(v).type);
        // Position of each target attribute: new key i, or input attribute.
        for (const auto& p : path_.attrs) {
            auto it = std::find(fn_.newKeyNames().begin(), fn_.newKeyNames().end(), p);
            newKeyPos_.push_back(it == fn_.newKeyNames().end()
                                     ? -1
                                     : static_cast<int>(it - fn_.newKeyNames().begin()));
        }
        head_ = in_->next();
    }

    ~ExtOverStream() override {
        filling_.reset();
        draining_.reset();
        std::error_code ec;
        fs::remove_all(tempDir_, ec);
    }

    std::optional<TupleRow> next() override {
        while (true) {
            if (draining_) {
                if (auto rec = draining_->next()) {
                    EncodedKey key =
                        rec->key.substr(0, rec->key.size() - storage::ExternalSorter::kSeqBytes);
                    if (!lastKey_.empty() && key == lastKey_)
                        throw UsageError("tableau emitted the same key twice");
                    if (!lastKey_.empty() && key < lastKey_)
                        throw PropertyError("function is not monotone on live data: a later "
                                            "input row emitted a smaller key");
                    lastKey_ = key;
                    std::vector<ScalarValue> out = storage::decodeKeyTuple(key, keyTypes_);
                    for (auto& v : storage::decodeValueTuple(rec->value, valTypes_, false))
                        out.push_back(std::move(v));
                    return TupleRow(names_, std::move(out));
                }
                draining_.reset();
            }
            if (!head_ && !filling_) return std::nullopt;
            fillRun();
        }
    }

private:
    /// Consumes input groups into `filling_` until a flush point (or input
    /// end), then moves it to `draining_`. Called only while not draining.
    void fillRun() {
        while (head_) {
            // Peek the group's new-key range off its first row; the new-key
            // expressions read only the leading attribute, so the whole
            // group emits these same new-key tuples.
            EncodedKey groupLo;
            for (const auto& e : fn_.applyToRow(*head_)) {
                EncodedKey k = storage::encodeKeyTuple(e.newKeys);
                if (groupLo.empty() || k < groupLo) groupLo = std::move(k);
            }
            if (filling_ && groupLo > bufferedHi_) break; // run complete

            ScalarValue g = head_->get(lead_);
            if (!filling_)
                filling_ = std::make_unique<storage::ExternalSorter>(tempDir_, budget_, 0);
            while (head_ && head_->get(lead_).compare(g) == 0) {
                for (auto& e : fn_.applyToRow(*head_)) {
                    std::vector<ScalarValue> key;
                    key.reserve(path_.size());
                    for (std::size_t i = 0; i < path_.size(); ++i)
                        key.push_back(newKeyPos_[i] >= 0
                                          ? e.newKeys[static_cast<std::size_t>(newKeyPos_[i])]
                                          : head_->get(path_.attrs[i]));
                    EncodedKey newPart = storage::encodeKeyTuple(e.newKeys);
                    if (newPart > bufferedHi_) bufferedHi_ = std::move(newPart);
                    filling_->add(storage::encodeKeyTuple(key),
                                  storage::encodeValueTuple(e.values, false));
                }
                head_ = in_->next();
            }
        }
        if (filling_) {
            filling_->finishAdding();
            draining_ = std::move(filling_);
            bufferedHi_.clear();
        }
    }

    StreamPtr in_;
    ExtFn fn_;
    std::uint64_t budget_;
    std::string tempDir_;
    std::string lead_;
    std::vector<ScalarType> keyTypes_, valTypes_;
    std::vector<int> newKeyPos_;
    std::optional<TupleRow> head_;
    std::unique_ptr<storage::ExternalSorter> filling_, draining_;
    EncodedKey bufferedHi_;
    EncodedKey lastKey_;
};

} // namespace

StreamPtr extMapStream(StreamPtr in, ExtFn f) {
    if (!f.bound()) f.bind(in->schema());
    TableSchema outSchema = core::extShape(in->schema(), f);
    AccessPath outPath = in->path();
    for (const auto& k : f.newKeyNames()) outPath.attrs.push_back(k);
    return std::make_unique<ExtMapStream>(std::move(in), std::move(f), std::move(outSchema),
                                          std::move(outPath));
}

StreamPtr extOverStream(StreamPtr in, ExtFn f, const AccessPath& targetPath,
                        std::uint64_t groupBudgetRows) {
    if (!f.bound()) f.bind(in->schema());
    LARA_CHECK(!f.newKeyNames().empty(), "ordered ext requires new key attributes");
    LARA_CHECK(!in->path().empty(), "ordered ext requires a leading input attribute to group by");
    // Soundness of the group-at-a-time re-sort needs the new keys to be a
    // pure function of the leading attribute (peeked off each group's first
    // row) — and that is also what makes monotonicity meaningful.
    for (const auto& row : f.rows())
        for (const auto& ke : row.keyExprs)
            for (const auto& ref : ke->referencedAttrs())
                if (ref != in->path().attrs.front())
                    throw PlanError("ordered ext requires new-key expressions over the leading "
                                    "path attribute only; found reference to " + ref);
    TableSchema outSchema = core::extShape(in->schema(), f);

    // Target: f's new keys first (f's order), then a permutation of the
    // input's keys.
    LARA_CHECK(targetPath.size() == outSchema.keyCount(),
               "ordered ext target must name every output key");
    for (std::size_t i = 0; i < f.newKeyNames().size(); ++i)
        LARA_CHECK(i < targetPath.size() && targetPath.attrs[i] == f.newKeyNames()[i],
                   "ordered ext target must start with the function's new keys");
    for (std::size_t i = f.newKeyNames().size(); i < targetPath.size(); ++i)
        LARA_CHECK(in->schema().hasKey(targetPath.attrs[i]),
                   "ordered ext target tail must permute the input keys");

    return std::make_unique<ExtOverStream>(std::move(in), std::move(f), targetPath,
                                           std::move(outSchema), groupBudgetRows);
}

// ---------------------------------------------------------------------------
// Rename

namespace {

class RenameStream final : public RowStream {
public:
    RenameStream(StreamPtr in, TableSchema outSchema, AccessPath outPath)
        : RowStream(std::move(outSchema), std::move(outPath)), in_(std::move(in)) {}

    std::optional<TupleRow> next() override {
        auto row = in_->next();
        if (!row) return std::nullopt;
        return TupleRow(names_, row->values());
    }

private:
    StreamPtr in_;
};

} // namespace

StreamPtr renameStream(StreamPtr in,
                       const std::vector<std::pair<std::string, std::string>>& renames) {
    TableSchema schema = in->schema();
    AccessPath path = in->path();
    for (const auto& [from, to] : renames) {
        schema = core::renameShape(schema, from, to);
        for (auto& p : path.attrs)
            if (p == from) p = to;
    }
    return std::make_unique<RenameStream>(std::move(in), std::move(schema), std::move(path));
}

// ---------------------------------------------------------------------------
// Materializing terminals

SortedTableStore sortToStore(StreamPtr in, const std::string& dir, const AccessPath& target,
                             const storage::StoreOptions& opts) {
    RowStream* s = in.get();
    storage::RowSource source = [s]() { return s->next(); };
    return storage::sortWrite(dir, in->schema(), target, source, opts, nullptr);
}

SortedTableStore sortAgg(StreamPtr in, const std::string& dir, const AccessPath& targetPath,
                         const std::map<std::string, PlusFn>& plus,
                         const storage::StoreOptions& opts) {
    core::UnionShape shape =
        core::unionShape(in->schema(), core::aggKeySchema(in->schema(), targetPath.attrs), plus);
    const TableSchema& out = shape.schema;
    const bool packed = opts.packed && storage::valueSchemaIsPackable(out);
    if (opts.packed && !packed)
        throw UsageError("schema is not packable (needs non-nullable numeric values)");

    std::vector<const PlusFn*> folds;
    std::vector<bool> has;
    for (const auto& n : shape.values) {
        folds.push_back(&shape.folds.at(n));
        has.push_back(in->schema().hasValue(n));
    }
    const std::vector<ScalarValue> defaults = out.defaultValues();

    // Fold-as-you-sort: each buffer folds equal keys on arrival, so at most
    // one buffer of *distinct* keys is ever materialized; spilled runs are
    // already folded and the final merge folds across runs.
    const std::string tempDir = freshTempDir("sortagg");
    std::vector<std::string> runs;
    std::map<EncodedKey, std::vector<ScalarValue>> buffer;
    const std::uint64_t budget = std::max<std::uint64_t>(opts.memBudgetRows, 2);
    std::uint64_t foldCount = 0;

    auto spotCheckIdentity = [&](std::size_t i, const ScalarValue& v) {
        // Cheap runtime audit of the identity law the fold relies on; a ⊕
        // that fails it (e.g. max with identity 0 meeting negatives) would
        // silently corrupt defaults-seeded folding.
        ScalarValue r = folds[i]->apply(defaults[i], v);
        bool same = (r.isNull() && v.isNull()) ||
                    (!r.isNull() && !v.isNull() && r.compare(v) == 0);
        if (!same)
            throw PropertyError("aggregate for " + shape.values[i] +
                                " violates its identity law on " + v.toLiteral());
    };

    auto flush = [&]() {
        if (buffer.empty()) return;
        fs::create_directories(tempDir);
        std::string file =
            (fs::path(tempDir) / ("agg-" + std::to_string(runs.size()) + ".dat")).string();
        RunWriter w(file);
        for (const auto& [k, v] : buffer) {
            const std::string enc = storage::encodeValueTuple(v, packed);
            Metrics::global().bytesSorted += k.size() + enc.size();
            w.append(k, enc);
        }
        w.finish();
        runs.push_back(std::move(file));
        buffer.clear();
    };

    while (auto row = in->next()) {
        EncodedKey key = storage::encodeKeyTuple(projectValues(*row, targetPath.attrs));
        auto it = buffer.find(key);
        if (it == buffer.end()) {
            Metrics::global().tuplesMaterialized += 1;
            it = buffer.emplace(std::move(key), defaults).first;
        }
        for (std::size_t i = 0; i < folds.size(); ++i) {
            if (!has[i]) continue;
            const ScalarValue& v = row->get(shape.values[i]);
            if (++foldCount % 1024 == 1) spotCheckIdentity(i, v);
            it->second[i] = folds[i]->apply(it->second[i], v);
        }
        if (buffer.size() >= budget) flush();
    }

    // Merge the spilled runs with the live buffer, folding equal keys.
    struct Src {
        std::unique_ptr<RunReader> reader;
        std::optional<RunReader::Record> head;
        void advance() { head = reader ? reader->next() : std::nullopt; }
    };
    std::vector<Src> srcs;
    for (const auto& f : runs) {
        Src s;
        s.reader = std::make_unique<RunReader>(f);
        s.advance();
        srcs.push_back(std::move(s));
    }
    auto bufIt = buffer.begin();
    std::vector<ScalarType> valTypes;
    for (const auto& n : shape.values) valTypes.push_back(out.at(n).type);

    auto nextRecord = [&]() -> std::optional<RunReader::Record> {
        while (true) {
            // Find the smallest key across runs and the in-memory buffer.
            const EncodedKey* best = nullptr;
            for (auto& s : srcs)
                if (s.head && (!best || s.head->key < *best)) best = &s.head->key;
            if (bufIt != buffer.end() && (!best || bufIt->first < *best)) best = &bufIt->first;
            if (!best) return std::nullopt;
            EncodedKey key = *best;

            std::vector<ScalarValue> acc = defaults;
            bool first = true;
            auto foldIn = [&](const std::vector<ScalarValue>& v) {
                for (std::size_t i = 0; i < folds.size(); ++i)
                    acc[i] = first ? v[i] : folds[i]->apply(acc[i], v[i]);
                first = false;
            };
            for (auto& s : srcs)
                while (s.head && s.head->key == key) {
                    foldIn(storage::decodeValueTuple(s.head->value, valTypes, packed));
                    s.advance();
                }
            if (bufIt != buffer.end() && bufIt->first == key) {
                foldIn(bufIt->second);
                ++bufIt;
            }

            bool allDefault = true;
            for (std::size_t i = 0; i < acc.size() && allDefault; ++i)
                if (acc[i].compare(defaults[i]) != 0) allDefault = false;
            if (allDefault) continue; // canonical stores drop default rows
            return RunReader::Record{std::move(key), storage::encodeValueTuple(acc, packed)};
        }
    };

    SortedTableStore store =
        storage::writeSortedRecords(dir, out, targetPath, packed, nextRecord, opts);
    std::error_code ec;
    fs::remove_all(tempDir, ec);
    return store;
}

AssociativeTable materialize(RowStream& in) {
    AssociativeTable t(in.schema());
    OrderSentinel sentinel(in.path().attrs, "materialize");
    const auto keyNames = in.schema().keyNames();
    const auto valNames = in.schema().valueNames();
    while (auto row = in.next()) {
        sentinel.observe(*row);
        t.put(projectValues(*row, keyNames), projectValues(*row, valNames));
    }
    return t;
}

} // namespace lara::physical
