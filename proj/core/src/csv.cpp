#include "volnet/csv.hpp"

#include "volnet/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace volnet::csv {

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw InputError("not a number: '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string> split_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

namespace {

bool is_missing(const std::string& cell) {
    std::string s;
    for (char c : cell) {
        if (c != ' ' && c != '\t') s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return s.empty() || s == "na" || s == "nan" || s == "null";
}

}  // namespace

TimeSeriesPanel read_panel(std::istream& in, const std::string& source_name, PanelReadReport* report) {
    std::string line;
    if (!std::getline(in, line)) throw InputError(source_name + ": empty file");
    auto header = split_line(line);
    if (header.size() < 2 || header[0] != "date") {
        throw InputError(source_name + ": header must be 'date,<node1>,<node2>,...'");
    }
    std::vector<std::string> nodes(header.begin() + 1, header.end());

    std::vector<std::pair<std::string, std::vector<double>>> rows;
    PanelReadReport local;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << source_name << ":" << line_no << ": expected " << header.size() << " columns, found "
                << cells.size();
            throw InputError(msg.str());
        }
        ++local.rows_read;
        bool missing = false;
        std::vector<double> values(nodes.size());
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto& cell = cells[k + 1];
            if (is_missing(cell)) {
                missing = true;
                continue;
            }
            try {
                values[k] = parse_double(cell);
            } catch (const InputError& e) {
                std::ostringstream msg;
                msg << source_name << ":" << line_no << ": " << e.what();
                throw InputError(msg.str());
            }
            if (!std::isfinite(values[k])) missing = true;
        }
        if (missing) {
            local.incomplete_dates.push_back(cells[0]);
            continue;
        }
        rows.emplace_back(cells[0], std::move(values));
    }

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rows[a].first < rows[b].first; });

    std::vector<std::string> dates;
    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& row = rows[order[k]];
        if (!dates.empty() && dates.back() == row.first) {
            throw InputError(source_name + ": duplicate date " + row.first);
        }
        dates.push_back(row.first);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = row.second[i];
        }
    }
    if (report) *report = std::move(local);
    try {
        return TimeSeriesPanel(std::move(nodes), std::move(dates), std::move(values));
    } catch (const InputError& e) {
        throw InputError(source_name + ": " + e.what());
    }
}

TimeSeriesPanel read_panel(const std::filesystem::path& path, PanelReadReport* report) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return read_panel(in, path.string(), report);
}

void write_panel(std::ostream& out, const TimeSeriesPanel& panel) {
    out << "date";
    for (const auto& n : panel.node_ids()) out << ',' << n;
    out << '\n';
    for (std::size_t t = 0; t < panel.n_dates(); ++t) {
        out << panel.dates()[t];
        for (std::size_t i = 0; i < panel.n_nodes(); ++i) out << ',' << format_double(panel(t, i));
        out << '\n';
    }
}

void write_panel(const std::filesystem::path& path, const TimeSeriesPanel& panel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    write_panel(out, panel);
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace volnet::csv
