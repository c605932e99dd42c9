#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gla {

// Version string stamped into every emitted artifact.
const char* artifact_version();

// FNV-1a 64-bit hash (config provenance).
std::uint64_t fnv1a(const std::string& data);
std::string fnv1a_hex(const std::string& data);

// Shortest round-trip decimal formatting.
std::string format_double(double v);

// Plain CSV emitter: `#`-prefixed comment lines, one header row, data rows.
class CsvWriter {
public:
    CsvWriter(std::string path, std::vector<std::string> columns,
              std::vector<std::string> comment_lines = {});

    void row(const std::vector<std::string>& cells);
    // Flushes and closes; throws on write failure. Called by the destructor
    // (without throwing) if not invoked explicitly.
    void finish();
    ~CsvWriter();

    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

private:
    std::string path_;
    std::size_t columns_ = 0;
    std::string buffer_;
    bool finished_ = false;
};

// Provenance comment lines shared by all emitted CSVs.
std::vector<std::string> provenance_comments(const std::string& config_hash_hex);

} // namespace gla
