// csv.hpp: plain numeric CSV tables.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace apbs::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    // Index of a named column; throws SpecError when absent.
    std::size_t column(const std::string& name) const;
};

// Comma-separated, one header line, '#' comment lines and blank lines skipped.
// Throws SpecError naming the line on a malformed or non-numeric cell.
Table read(std::istream& is);

// 17 significant digits so values round-trip exactly.
void write(std::ostream& os, const Table& table);

} // namespace apbs::csv
