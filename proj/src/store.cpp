#include "laradb/store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lara::storage {

namespace fs = std::filesystem;
using core::AttributeSchema;
using core::ScalarType;
using core::ScalarValue;
using core::TableSchema;

namespace {

std::string hexEncode(const std::string& bytes) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

std::string hexDecode(const std::string& hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw IoError("bad hex digit in manifest");
    };
    if (hex.size() % 2 != 0) throw IoError("odd hex length in manifest");
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2)
        out.push_back(static_cast<char>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
    return out;
}

std::vector<std::string> splitWords(const std::string& line, std::size_t maxParts) {
    // Splits on spaces into at most maxParts tokens; the last token keeps
    // any remaining spaces (defaults may be string literals with spaces).
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size() && out.size() + 1 < maxParts) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    while (i < line.size() && line[i] == ' ') ++i;
    if (i < line.size()) out.push_back(line.substr(i));
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Manifest

SortedTableStore writeManifestAndOpen(const std::string& dir, const TableSchema& schema,
                                      const AccessPath& path, bool packed, std::uint64_t version,
                                      std::uint64_t rows, std::vector<Partition> partitions,
                                      std::vector<Partition> extras) {
    fs::create_directories(dir);
    std::ostringstream os;
    os << "laradb table\n";
    os << "version " << version << "\n";
    for (const auto& a : schema.attrs()) {
        os << "attr " << (a.kind == core::AttrKind::Key ? "key" : "value") << " " << a.name << " "
           << core::typeName(a.type);
        os << " " << (a.kind == core::AttrKind::Key ? "-" : a.dflt.toLiteral()) << "\n";
    }
    os << "path";
    for (const auto& p : path.attrs) os << " " << p;
    os << "\n";
    os << "packed " << (packed ? 1 : 0) << "\n";
    os << "rows " << rows << "\n";
    for (const auto& p : partitions)
        os << "run " << (p.lo.empty() ? "-" : hexEncode(p.lo)) << " " << p.file << " " << p.rows
           << "\n";
    for (const auto& e : extras) os << "extra " << e.file << " " << e.rows << "\n";

    const std::string tmp = dir + "/manifest.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write manifest in " + dir);
        out << os.str();
    }
    fs::rename(tmp, dir + "/manifest.txt");
    return SortedTableStore::open(dir);
}

bool SortedTableStore::existsAt(const std::string& dir) {
    return fs::exists(fs::path(dir) / "manifest.txt");
}

SortedTableStore SortedTableStore::open(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.txt");
    if (!in) throw IoError("no table at " + dir + " (missing manifest.txt)");

    SortedTableStore s;
    s.dir_ = dir;
    std::string line;
    if (!std::getline(in, line) || line != "laradb table")
        throw IoError("not a table manifest: " + dir);

    std::vector<AttributeSchema> attrs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto words = splitWords(line, 2);
        const std::string& kind = words[0];
        const std::string rest = words.size() > 1 ? words[1] : "";
        if (kind == "version") {
            s.version_ = std::stoull(rest);
        } else if (kind == "attr") {
            auto f = splitWords(rest, 4);
            if (f.size() < 3) throw IoError("bad attr line in manifest: " + line);
            ScalarType t = core::typeFromName(f[2]);
            if (f[0] == "key") {
                attrs.push_back(AttributeSchema::key(f[1], t));
            } else {
                ScalarValue dflt = ScalarValue::parseLiteral(f.size() > 3 ? f[3] : "null");
                attrs.push_back(AttributeSchema::value(f[1], t, dflt));
            }
        } else if (kind == "path") {
            for (const auto& w : splitWords(rest, 64)) s.path_.attrs.push_back(w);
        } else if (kind == "packed") {
            s.packed_ = rest == "1";
        } else if (kind == "rows") {
            s.rows_ = std::stoull(rest);
        } else if (kind == "run") {
            auto f = splitWords(rest, 3);
            if (f.size() != 3) throw IoError("bad run line in manifest: " + line);
            Partition p;
            p.lo = f[0] == "-" ? EncodedKey() : hexDecode(f[0]);
            p.file = f[1];
            p.rows = std::stoull(f[2]);
            s.partitions_.push_back(std::move(p));
        } else if (kind == "extra") {
            auto f = splitWords(rest, 2);
            if (f.size() != 2) throw IoError("bad extra line in manifest: " + line);
            Partition p;
            p.file = f[0];
            p.rows = std::stoull(f[1]);
            s.extras_.push_back(std::move(p));
        } else {
            throw IoError("unknown manifest line: " + line);
        }
    }
    s.schema_ = TableSchema(attrs);

    // The path must be a permutation of the key attributes.
    if (s.path_.size() != s.schema_.keyCount())
        throw IoError("manifest path arity mismatch in " + dir);
    for (const auto& p : s.path_.attrs)
        if (!s.schema_.hasKey(p)) throw IoError("manifest path names non-key " + p);
    for (std::size_t i = 1; i < s.partitions_.size(); ++i)
        if (s.partitions_[i].lo <= s.partitions_[i - 1].lo)
            throw IoError("manifest partitions out of order in " + dir);
    return s;
}

TupleRow::Names SortedTableStore::rowNames() const {
    std::vector<std::string> names = path_.attrs;
    for (auto& v : schema_.valueNames()) names.push_back(std::move(v));
    return TupleRow::shareNames(std::move(names));
}

SortedTableStore::Scan SortedTableStore::scan(std::optional<std::vector<ScalarValue>> lo,
                                              std::optional<std::vector<ScalarValue>> hi) const {
    if (needsCompaction())
        throw UsageError("table at " + dir_ +
                         " has appended runs pending compaction; scans would be ambiguous");
    Scan sc;
    sc.store_ = this;
    sc.hi_ = std::move(hi);
    sc.names_ = rowNames();
    for (const auto& p : path_.attrs) sc.keyTypes_.push_back(schema_.at(p).type);
    for (const auto& v : schema_.valueNames()) sc.valTypes_.push_back(schema_.at(v).type);
    if (lo) {
        LARA_CHECK(lo->size() <= path_.size(), "scan lower bound longer than path");
        sc.loBound_ = encodeKeyTuple(*lo);
    }
    if (sc.hi_) LARA_CHECK(sc.hi_->size() <= path_.size(), "scan upper bound longer than path");

    // Start at the last partition whose lo is <= the lower bound.
    sc.part_ = 0;
    if (!sc.loBound_.empty()) {
        for (std::size_t i = 0; i < partitions_.size(); ++i)
            if (partitions_[i].lo <= sc.loBound_) sc.part_ = i;
    }
    return sc;
}

std::optional<TupleRow> SortedTableStore::Scan::next() {
    const auto& parts = store_->partitions();
    while (true) {
        if (!reader_) {
            if (part_ >= parts.size()) return std::nullopt;
            reader_ = std::make_unique<RunReader>(
                (fs::path(store_->dir()) / parts[part_].file).string());
            if (!loBound_.empty()) reader_->seekToKey(loBound_);
        }
        auto rec = reader_->next();
        if (!rec) {
            reader_.reset();
            ++part_;
            continue;
        }
        std::size_t pos = 0;
        std::vector<ScalarValue> key = decodeKeyTuple(rec->key, pos, keyTypes_);
        if (pos != rec->key.size()) throw IoError("trailing bytes in stored key");
        if (hi_) {
            // Inclusive upper bound on the leading prefix of the path.
            for (std::size_t i = 0; i < hi_->size(); ++i) {
                int c = key[i].compare((*hi_)[i]);
                if (c > 0) return std::nullopt; // sorted: nothing later can match
                if (c < 0) break;
            }
        }
        std::vector<ScalarValue> vals = decodeValueTuple(rec->value, valTypes_, store_->packed());
        key.insert(key.end(), std::make_move_iterator(vals.begin()),
                   std::make_move_iterator(vals.end()));
        return TupleRow(names_, std::move(key));
    }
}

AssociativeTable SortedTableStore::toTable() const {
    AssociativeTable t(schema_);
    auto sc = scan();
    const auto keyNames = schema_.keyNames();
    const auto valNames = schema_.valueNames();
    while (auto row = sc.next()) {
        std::vector<ScalarValue> k, v;
        for (const auto& n : keyNames) k.push_back(row->get(n));
        for (const auto& n : valNames) v.push_back(row->get(n));
        t.put(std::move(k), std::move(v));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Catalog

Catalog::Catalog(std::string dataDir) : dataDir_(std::move(dataDir)) {
    if (dataDir_.empty()) throw UsageError("empty data directory");
    fs::create_directories(dataDir_);
}

std::string Catalog::dirFor(const std::string& name) const {
    if (name.empty() || name.find('/') != std::string::npos || name[0] == '.')
        throw UsageError("bad table name: " + name);
    return (fs::path(dataDir_) / name).string();
}

std::vector<std::string> Catalog::tables() const {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dataDir_)) {
        if (!e.is_directory()) continue;
        if (fs::exists(e.path() / "manifest.txt") || fs::exists(e.path() / "view.txt"))
            out.push_back(e.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool Catalog::exists(const std::string& name) const {
    fs::path d = dirFor(name);
    return fs::exists(d / "manifest.txt") || fs::exists(d / "view.txt");
}

bool Catalog::isView(const std::string& name) const {
    return fs::exists(fs::path(dirFor(name)) / "view.txt");
}

SortedTableStore Catalog::open(const std::string& name) const {
    return SortedTableStore::open(dirFor(name));
}

void Catalog::saveView(const ViewDef& view) const {
    const std::string dir = dirFor(view.name);
    fs::create_directories(dir);
    std::ostringstream os;
    os << "laradb view\n";
    os << "version " << view.version << "\n";
    for (const auto& [base, ver] : view.bases) os << "base " << base << " " << ver << "\n";
    if (!view.outPath.empty()) os << "path " << view.outPath.toText() << "\n";
    os << "plan\n" << view.planText;
    if (!view.planText.empty() && view.planText.back() != '\n') os << "\n";
    std::ofstream out(dir + "/view.txt", std::ios::trunc);
    if (!out) throw IoError("cannot write view at " + dir);
    out << os.str();
}

ViewDef Catalog::openView(const std::string& name) const {
    std::ifstream in(fs::path(dirFor(name)) / "view.txt");
    if (!in) throw IoError("no view named " + name);
    ViewDef v;
    v.name = name;
    std::string line;
    if (!std::getline(in, line) || line != "laradb view")
        throw IoError("not a view manifest: " + name);
    while (std::getline(in, line)) {
        if (line == "plan") break;
        auto words = splitWords(line, 3);
        if (words.size() >= 2 && words[0] == "version") {
            v.version = std::stoull(words[1]);
        } else if (words.size() == 3 && words[0] == "base") {
            v.bases.emplace_back(words[1], std::stoull(words[2]));
        } else if (words.size() >= 2 && words[0] == "path") {
            v.outPath = AccessPath::parse(line.substr(line.find(' ') + 1));
        } else {
            throw IoError("unknown view manifest line: " + line);
        }
    }
    std::ostringstream plan;
    while (std::getline(in, line)) plan << line << "\n";
    v.planText = plan.str();
    return v;
}

void Catalog::remove(const std::string& name) const {
    fs::remove_all(dirFor(name));
}

std::string Catalog::describe(const std::string& name) const {
    std::ostringstream os;
    if (isView(name)) {
        ViewDef v = openView(name);
        os << name << "  view  version " << v.version << "\n";
        for (const auto& [base, ver] : v.bases)
            os << "  base " << base << " @ version " << ver << "\n";
        os << "  plan:\n";
        std::istringstream plan(v.planText);
        std::string line;
        while (std::getline(plan, line)) os << "    " << line << "\n";
        return os.str();
    }
    SortedTableStore s = open(name);
    os << name << "  table  version " << s.version() << "\n";
    os << "  schema " << s.schema().describe() << "\n";
    os << "  path " << s.path().toText() << (s.packed() ? "  packed" : "") << "\n";
    os << "  rows " << s.rowCount() << " in " << s.partitions().size() << " partition(s)";
    if (s.needsCompaction()) os << " + " << s.extras().size() << " uncompacted run(s)";
    os << "\n";
    for (const auto& p : s.partitions())
        os << "    " << p.file << "  rows " << p.rows << "\n";
    for (const auto& e : s.extras()) os << "    " << e.file << "  rows " << e.rows << " (extra)\n";
    return os.str();
}

} // namespace lara::storage
