#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "laradb/keycodec.hpp"

namespace lara::storage {

// A run file holds records sorted by encoded key:
//
//   record   := u32le key_len, key bytes, u32le val_len, value bytes
//   data     := record*                 (non-decreasing key order)
//   index    := u32le entry_count, entry*
//   entry    := u32le key_len, key bytes, u64le file_offset
//   footer   := u64le record_count, u64le index_offset
//
// One index entry is kept per ~4 KiB of record data (the first record at or
// after each block boundary), so a range scan seeks close to its lower bound
// instead of reading from the start.

constexpr std::size_t kRunBlockBytes = 4096;

class RunWriter {
public:
    explicit RunWriter(const std::string& path);
    ~RunWriter();

    /// Keys must arrive in non-decreasing encoded order (checked).
    void append(const EncodedKey& key, const std::string& value);
    /// Writes index and footer; no appends afterwards. Returns record count.
    std::uint64_t finish();

    std::uint64_t recordCount() const { return count_; }

private:
    std::string path_;
    std::ofstream out_;
    std::uint64_t count_ = 0;
    std::uint64_t offset_ = 0;
    std::uint64_t nextIndexAt_ = 0;
    EncodedKey lastKey_;
    bool finished_ = false;
    struct IndexEntry {
        EncodedKey key;
        std::uint64_t offset;
    };
    std::vector<IndexEntry> index_;
};

class RunReader {
public:
    explicit RunReader(const std::string& path);

    std::uint64_t recordCount() const { return count_; }

    /// Positions the cursor at the first record whose key is >= `key`.
    void seekToKey(const EncodedKey& key);
    /// Rewinds to the first record.
    void rewind();

    struct Record {
        EncodedKey key;
        std::string value;
    };
    /// Next record, or nullopt at end of data.
    std::optional<Record> next();

private:
    std::string path_;
    std::ifstream in_;
    std::uint64_t count_ = 0;
    std::uint64_t dataEnd_ = 0; // == index offset
    std::uint64_t pos_ = 0;
    struct IndexEntry {
        EncodedKey key;
        std::uint64_t offset;
    };
    std::vector<IndexEntry> index_;
};

} // namespace lara::storage
