#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace volnet {

/**
 * Date-aligned panel of one daily series across N nodes.
 *
 * Rows are trading dates (strictly increasing ISO-8601 labels), columns are
 * nodes. Dates are compared as opaque strings; lags are positional.
 */
class TimeSeriesPanel {
public:
    TimeSeriesPanel() = default;

    /// Throws InputError if dates are not strictly increasing, node ids are
    /// not unique, the shape disagrees, or any value is non-finite.
    TimeSeriesPanel(std::vector<std::string> node_ids, std::vector<std::string> dates,
                    Eigen::MatrixXd values);

    const std::vector<std::string>& node_ids() const { return node_ids_; }
    const std::vector<std::string>& dates() const { return dates_; }
    const Eigen::MatrixXd& values() const { return values_; }

    std::size_t n_nodes() const { return node_ids_.size(); }
    std::size_t n_dates() const { return dates_.size(); }
    bool empty() const { return dates_.empty(); }

    double operator()(std::size_t t, std::size_t i) const { return values_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)); }

    /// Rows [begin, end).
    TimeSeriesPanel slice_rows(std::size_t begin, std::size_t end) const;

    /// Same dates, columns permuted into `order` (which must be a permutation of node_ids()).
    TimeSeriesPanel reorder_nodes(const std::vector<std::string>& order) const;

    /// Row position of `date`, or npos.
    std::size_t find_date(const std::string& date) const;

    /// True when both panels carry identical dates and node ids (in order).
    bool same_shape(const TimeSeriesPanel& other) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<std::string> node_ids_;
    std::vector<std::string> dates_;
    Eigen::MatrixXd values_;
};

using NamedPanels = std::map<std::string, TimeSeriesPanel>;

/// Intraday log prices for one node on one day.
struct IntradayDay {
    std::vector<double> log_prices;
    // finest-grid observations per five-minute interval
    std::size_t base_spacing = 1;
};

/**
 * Subsampled realised variance.
 *
 * Averages the realised variance over `base_spacing` staggered grids. Grid l
 * starts at finest-grid offset l and strides by base_spacing; its last
 * (possibly shorter) return runs to the final price of the day.
 */
double compute_rv_ss(const IntradayDay& day);

/// Elementwise natural log. Nonpositive entries throw InputError naming node and date.
TimeSeriesPanel log_transform(const TimeSeriesPanel& rv_panel);

/// (max(r, 0), min(r, 0)) elementwise.
std::pair<TimeSeriesPanel, TimeSeriesPanel> split_returns(const TimeSeriesPanel& returns);

/// Open_t / Close_{t-1} - 1; the first date is dropped.
TimeSeriesPanel overnight_returns(const TimeSeriesPanel& opens, const TimeSeriesPanel& closes);

struct AlignResult {
    NamedPanels panels;
    std::size_t dropped_dates = 0;  // dates present in some panel but not in all
};

/**
 * Restricts every panel to the common dates, in increasing order, with columns
 * in the node order of the first panel (by name). All panels must carry the
 * same node set.
 */
AlignResult align(const NamedPanels& panels);

}  // namespace volnet
