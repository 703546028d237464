#include "aebound/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aebound/errors.hpp"

namespace aebound {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("csv row has " + std::to_string(row.size()) + " cells, header " +
                                    std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw DataError(DataErrorCode::malformed, "missing column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    const std::string& cell = rows.at(row).at(column(name));
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw DataError(DataErrorCode::malformed,
                        "column '" + name + "' row " + std::to_string(row + 1) + " is not a number: '" + cell + "'");
    }
}

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ostringstream out;
    out << "# config_hash=" << table.config_hash << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
    write_text(path, out.str());
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            const std::string key = "# config_hash=";
            if (line.rfind(key, 0) == 0) table.config_hash = line.substr(key.size());
            continue;
        }
        auto cells = split_line(line);
        if (!have_header) {
            table.columns = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.columns.size())
            throw DataError(DataErrorCode::malformed, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                                          std::to_string(table.columns.size()) + " cells, got " +
                                                          std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
    }
    if (!have_header) throw DataError(DataErrorCode::malformed, path.string() + ": no header row");
    return table;
}

void require_columns(const CsvTable& table, const std::vector<std::string>& expected, const std::string& file) {
    for (const auto& name : expected) {
        bool found = false;
        for (const auto& c : table.columns) found = found || c == name;
        if (!found) throw DataError(DataErrorCode::malformed, file + ": missing column '" + name + "'");
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataErrorCode::io, "cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrorCode::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace aebound
