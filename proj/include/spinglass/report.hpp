#pragma once

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spinglass/errors.hpp"

namespace spinglass::cli {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// CSV table with fixed 17-significant-digit formatting; bodies are
// byte-stable across runs, the header carries a timestamp only on request.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != columns_.size()) throw domain_error("CsvTable: row width mismatch");
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += ',';
            line += format_g17(row[i]);
        }
        rows_.push_back(std::move(line));
    }

    void add_text_row(const std::vector<std::string>& row) {
        if (row.size() != columns_.size()) throw domain_error("CsvTable: row width mismatch");
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += ',';
            line += row[i];
        }
        rows_.push_back(std::move(line));
    }

    std::string body(std::uint64_t config_hash, std::uint64_t seed) const {
        std::ostringstream os;
        char meta[80];
        std::snprintf(meta, sizeof(meta), "# config_hash=%016" PRIx64 " seed=%" PRIu64 "\n",
                      config_hash, seed);
        os << meta;
        for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
        os << '\n';
        for (const auto& r : rows_) os << r << '\n';
        return os.str();
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::string> rows_;
};

// write-then-rename so interrupted runs never leave partial files
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw numerical_error("cannot open output file " + tmp.string());
        os << content;
        if (!os.flush()) throw numerical_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string timestamp_line() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::strftime(buf, sizeof(buf), "# timestamp=%Y-%m-%dT%H:%M:%SZ\n", std::gmtime(&t));
    return buf;
}

} // namespace spinglass::cli
