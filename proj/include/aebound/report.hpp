#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace aebound {

/// In-memory CSV table. Files start with a "# config_hash=<hex>" comment
/// line followed by the header row; numbers are written with 17
/// significant digits.
struct CsvTable {
    std::string config_hash;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    /// Index of `name`; throws DataError when the column is absent.
    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
};

std::string format_real(double v);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

/// Throws DataError naming the first expected column missing from `table`.
void require_columns(const CsvTable& table, const std::vector<std::string>& expected, const std::string& file);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace aebound
