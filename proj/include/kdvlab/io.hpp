#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kdvlab/errors.hpp"

namespace kdvlab {

/// Shortest round-trippable decimal form; keeps CLI outputs byte-stable.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Write via a sibling temp file and rename, so readers never observe a
/// partial file.
inline void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw error("atomic_write_text: cannot open " + tmp.string());
        out << content;
        if (!out.good()) throw error("atomic_write_text: short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < header.size(); ++i) {
            s += header[i];
            s += (i + 1 == header.size()) ? '\n' : ',';
        }
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                s += format_double(row[i]);
                s += (i + 1 == row.size()) ? '\n' : ',';
            }
        }
        return s;
    }
};

}  // namespace kdvlab
