#include "laradb/runfile.hpp"

#include <algorithm>

namespace lara::storage {

namespace {

void writeU32(std::ofstream& out, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 4);
}

void writeU64(std::ofstream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

std::uint32_t readU32(std::ifstream& in) {
    char buf[4];
    if (!in.read(buf, 4)) throw IoError("run file truncated (u32)");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

std::uint64_t readU64(std::ifstream& in) {
    char buf[8];
    if (!in.read(buf, 8)) throw IoError("run file truncated (u64)");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

} // namespace

RunWriter::RunWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot create run file " + path);
}

RunWriter::~RunWriter() {
    // Abandoned writers (e.g. after an exception) leave no half-valid file.
    if (!finished_ && out_.is_open()) {
        out_.close();
        std::remove(path_.c_str());
    }
}

void RunWriter::append(const EncodedKey& key, const std::string& value) {
    LARA_CHECK(!finished_, "append to a finished run file");
    if (count_ > 0 && key < lastKey_)
        throw UsageError("run file keys must be non-decreasing: " + path_);
    if (offset_ >= nextIndexAt_) {
        index_.push_back({key, offset_});
        nextIndexAt_ = offset_ + kRunBlockBytes;
    }
    writeU32(out_, static_cast<std::uint32_t>(key.size()));
    out_.write(key.data(), static_cast<std::streamsize>(key.size()));
    writeU32(out_, static_cast<std::uint32_t>(value.size()));
    out_.write(value.data(), static_cast<std::streamsize>(value.size()));
    offset_ += 8 + key.size() + value.size();
    lastKey_ = key;
    ++count_;
}

std::uint64_t RunWriter::finish() {
    LARA_CHECK(!finished_, "finish called twice");
    const std::uint64_t indexOffset = offset_;
    writeU32(out_, static_cast<std::uint32_t>(index_.size()));
    for (const auto& e : index_) {
        writeU32(out_, static_cast<std::uint32_t>(e.key.size()));
        out_.write(e.key.data(), static_cast<std::streamsize>(e.key.size()));
        writeU64(out_, e.offset);
    }
    writeU64(out_, count_);
    writeU64(out_, indexOffset);
    out_.flush();
    if (!out_) throw IoError("failed writing run file " + path_);
    out_.close();
    finished_ = true;
    return count_;
}

RunReader::RunReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open run file " + path);
    in_.seekg(0, std::ios::end);
    std::uint64_t fileSize = static_cast<std::uint64_t>(in_.tellg());
    if (fileSize < 16) throw IoError("run file too small: " + path);
    in_.seekg(static_cast<std::streamoff>(fileSize - 16));
    count_ = readU64(in_);
    dataEnd_ = readU64(in_);
    if (dataEnd_ > fileSize - 16) throw IoError("corrupt run file footer: " + path);

    in_.seekg(static_cast<std::streamoff>(dataEnd_));
    std::uint32_t entries = readU32(in_);
    index_.reserve(entries);
    for (std::uint32_t i = 0; i < entries; ++i) {
        std::uint32_t klen = readU32(in_);
        EncodedKey key(klen, '\0');
        if (!in_.read(key.data(), klen)) throw IoError("corrupt run file index: " + path);
        std::uint64_t off = readU64(in_);
        index_.push_back({std::move(key), off});
    }
    rewind();
}

void RunReader::rewind() {
    pos_ = 0;
    in_.clear();
    in_.seekg(0);
}

void RunReader::seekToKey(const EncodedKey& key) {
    // Last index entry with key <= target; records before it cannot match.
    std::uint64_t off = 0;
    auto it = std::upper_bound(index_.begin(), index_.end(), key,
                               [](const EncodedKey& k, const IndexEntry& e) { return k < e.key; });
    if (it != index_.begin()) off = std::prev(it)->offset;
    pos_ = off;
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(off));
    // Skip records below the bound.
    while (pos_ < dataEnd_) {
        std::uint64_t recordStart = pos_;
        std::uint32_t klen = readU32(in_);
        EncodedKey k(klen, '\0');
        if (!in_.read(k.data(), klen)) throw IoError("run file truncated: " + path_);
        if (k >= key) {
            pos_ = recordStart;
            in_.seekg(static_cast<std::streamoff>(recordStart));
            return;
        }
        std::uint32_t vlen = readU32(in_);
        in_.seekg(vlen, std::ios::cur);
        pos_ = recordStart + 8 + klen + vlen;
    }
}

std::optional<RunReader::Record> RunReader::next() {
    if (pos_ >= dataEnd_) return std::nullopt;
    Record r;
    std::uint32_t klen = readU32(in_);
    r.key.resize(klen);
    if (!in_.read(r.key.data(), klen)) throw IoError("run file truncated: " + path_);
    std::uint32_t vlen = readU32(in_);
    r.value.resize(vlen);
    if (!in_.read(r.value.data(), vlen)) throw IoError("run file truncated: " + path_);
    pos_ += 8 + klen + vlen;
    return r;
}

} // namespace lara::storage
