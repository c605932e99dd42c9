#include "gla/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gla {

const char* artifact_version() { return "gla 0.1.0"; }

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string fnv1a_hex(const std::string& data) {
    std::ostringstream out;
    out << std::hex << fnv1a(data);
    return out.str();
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> provenance_comments(const std::string& config_hash_hex) {
    return {"config " + config_hash_hex, std::string("artifact ") + artifact_version()};
}

CsvWriter::CsvWriter(std::string path, std::vector<std::string> columns,
                     std::vector<std::string> comment_lines)
    : path_(std::move(path)), columns_(columns.size()) {
    if (columns.empty()) throw std::invalid_argument("csv needs at least one column");
    for (const std::string& c : comment_lines) buffer_ += "# " + c + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += columns[i];
    }
    buffer_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
        throw std::invalid_argument("csv row has " + std::to_string(cells.size()) +
                                    " cells, expected " + std::to_string(columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += cells[i];
    }
    buffer_ += '\n';
}

void CsvWriter::finish() {
    if (finished_) return;
    finished_ = true;
    // Whole-file buffer written in one pass: emitted files are never observed
    // half-finished by concurrent readers of the output directory.
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write csv file: " + path_);
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw std::runtime_error("write failed: " + path_);
}

CsvWriter::~CsvWriter() {
    try {
        finish();
    } catch (...) {
        // Destructor must not throw; an explicit finish() reports failures.
    }
}

} // namespace gla
