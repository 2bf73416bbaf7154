#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace manipsim {

/// Shortest round-trip-safe rendering with 17 significant digits; "nan"/"inf" as text.
std::string format_double(double v);

/// Writes through a temporary file in the same directory, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

/// Minimal CSV reader for the files this project writes (no quoting).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace manipsim
