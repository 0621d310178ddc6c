#include "apbs/csv.hpp"

#include "apbs/errors.hpp"

#include <charconv>
#include <istream>
#include <ostream>

namespace apbs::csv {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

} // namespace

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw SpecError("csv: missing column '" + name + "'");
}

Table read(std::istream& is) {
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto cells = split(t);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw SpecError("csv line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " cells, got " + std::to_string(cells.size()));
        }
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const char* first = cells[i].data();
            const char* last = first + cells[i].size();
            auto [ptr, ec] = std::from_chars(first, last, row[i]);
            if (ec != std::errc{} || ptr != last) {
                throw SpecError("csv line " + std::to_string(line_no) + ": non-numeric cell '" + cells[i] + "'");
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (!have_header) throw SpecError("csv: no header line");
    return table;
}

void write(std::ostream& os, const Table& table) {
    for (std::size_t i = 0; i < table.header.size(); ++i) os << (i ? "," : "") << table.header[i];
    os << '\n';
    const auto old = os.precision(17);
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    }
    os.precision(old);
}

} // namespace apbs::csv
