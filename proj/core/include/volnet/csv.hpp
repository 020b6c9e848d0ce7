#pragma once

#include "volnet/panel.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace volnet::csv {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double x);

/// Strict decimal parse; throws InputError on trailing garbage or empty text.
double parse_double(std::string_view text);

/// Splits one CSV line on commas (no quoting); trailing '\r' is stripped.
std::vector<std::string> split_line(std::string_view line);

struct PanelReadReport {
    std::size_t rows_read = 0;
    // rows holding an empty / NA / NaN cell; such dates are treated as absent
    std::vector<std::string> incomplete_dates;
};

/**
 * Reads `date,<node1>,<node2>,...`. Rows with missing cells are dropped and
 * listed in `report`. Rows are sorted by date; duplicate dates throw.
 */
TimeSeriesPanel read_panel(std::istream& in, const std::string& source_name,
                           PanelReadReport* report = nullptr);
TimeSeriesPanel read_panel(const std::filesystem::path& path, PanelReadReport* report = nullptr);

void write_panel(std::ostream& out, const TimeSeriesPanel& panel);
void write_panel(const std::filesystem::path& path, const TimeSeriesPanel& panel);

}  // namespace volnet::csv
