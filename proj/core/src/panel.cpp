#include "volnet/panel.hpp"

#include "volnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace volnet {

TimeSeriesPanel::TimeSeriesPanel(std::vector<std::string> node_ids, std::vector<std::string> dates,
                                 Eigen::MatrixXd values)
    : node_ids_(std::move(node_ids)), dates_(std::move(dates)), values_(std::move(values)) {
    if (values_.rows() != static_cast<Eigen::Index>(dates_.size()) ||
        values_.cols() != static_cast<Eigen::Index>(node_ids_.size())) {
        std::ostringstream msg;
        msg << "panel shape " << values_.rows() << "x" << values_.cols() << " does not match "
            << dates_.size() << " dates and " << node_ids_.size() << " nodes";
        throw InputError(msg.str());
    }
    for (std::size_t t = 1; t < dates_.size(); ++t) {
        if (!(dates_[t - 1] < dates_[t])) {
            throw InputError("dates not strictly increasing at '" + dates_[t] + "'");
        }
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : node_ids_) {
        if (!seen.insert(id).second) throw InputError("duplicate node id '" + id + "'");
    }
    for (Eigen::Index t = 0; t < values_.rows(); ++t) {
        for (Eigen::Index i = 0; i < values_.cols(); ++i) {
            if (!std::isfinite(values_(t, i))) {
                throw InputError("non-finite value for node '" + node_ids_[i] + "' on " + dates_[t]);
            }
        }
    }
}

TimeSeriesPanel TimeSeriesPanel::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > dates_.size()) throw InputError("row slice out of range");
    std::vector<std::string> d(dates_.begin() + static_cast<std::ptrdiff_t>(begin),
                               dates_.begin() + static_cast<std::ptrdiff_t>(end));
    Eigen::MatrixXd v = values_.middleRows(static_cast<Eigen::Index>(begin),
                                           static_cast<Eigen::Index>(end - begin));
    return TimeSeriesPanel(node_ids_, std::move(d), std::move(v));
}

TimeSeriesPanel TimeSeriesPanel::reorder_nodes(const std::vector<std::string>& order) const {
    if (order.size() != node_ids_.size()) throw InputError("node order has the wrong length");
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < node_ids_.size(); ++i) pos.emplace(node_ids_[i], i);
    Eigen::MatrixXd v(values_.rows(), values_.cols());
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto it = pos.find(order[k]);
        if (it == pos.end()) throw InputError("node '" + order[k] + "' not present in panel");
        v.col(static_cast<Eigen::Index>(k)) = values_.col(static_cast<Eigen::Index>(it->second));
    }
    return TimeSeriesPanel(order, dates_, std::move(v));
}

std::size_t TimeSeriesPanel::find_date(const std::string& date) const {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), date);
    if (it == dates_.end() || *it != date) return npos;
    return static_cast<std::size_t>(it - dates_.begin());
}

bool TimeSeriesPanel::same_shape(const TimeSeriesPanel& other) const {
    return node_ids_ == other.node_ids_ && dates_ == other.dates_;
}

double compute_rv_ss(const IntradayDay& day) {
    const std::size_t spacing = day.base_spacing;
    if (spacing == 0) throw InputError("base_spacing must be at least 1");
    const auto& p = day.log_prices;
    // the last grid starts at offset spacing-1 and needs one more price after it
    if (p.size() < spacing + 1) throw InputError("insufficient intraday data");

    const std::size_t last = p.size() - 1;
    double total = 0.0;
    for (std::size_t offset = 0; offset < spacing; ++offset) {
        double grid_rv = 0.0;
        std::size_t prev = offset;
        for (std::size_t k = offset + spacing; k <= last; k += spacing) {
            const double r = p[k] - p[prev];
            grid_rv += r * r;
            prev = k;
        }
        if (prev != last) {
            const double r = p[last] - p[prev];
            grid_rv += r * r;
        }
        total += grid_rv;
    }
    return total / static_cast<double>(spacing);
}

TimeSeriesPanel log_transform(const TimeSeriesPanel& rv_panel) {
    const auto& v = rv_panel.values();
    Eigen::MatrixXd out(v.rows(), v.cols());
    for (Eigen::Index t = 0; t < v.rows(); ++t) {
        for (Eigen::Index i = 0; i < v.cols(); ++i) {
            if (!(v(t, i) > 0.0)) {
                std::ostringstream msg;
                msg << "cannot log-transform nonpositive value " << v(t, i) << " for node '"
                    << rv_panel.node_ids()[i] << "' on " << rv_panel.dates()[t];
                throw InputError(msg.str());
            }
            out(t, i) = std::log(v(t, i));
        }
    }
    return TimeSeriesPanel(rv_panel.node_ids(), rv_panel.dates(), std::move(out));
}

std::pair<TimeSeriesPanel, TimeSeriesPanel> split_returns(const TimeSeriesPanel& returns) {
    Eigen::MatrixXd pos = returns.values().cwiseMax(0.0);
    Eigen::MatrixXd neg = returns.values().cwiseMin(0.0);
    return {TimeSeriesPanel(returns.node_ids(), returns.dates(), std::move(pos)),
            TimeSeriesPanel(returns.node_ids(), returns.dates(), std::move(neg))};
}

TimeSeriesPanel overnight_returns(const TimeSeriesPanel& opens, const TimeSeriesPanel& closes) {
    if (!opens.same_shape(closes)) throw InputError("opens and closes must share dates and nodes");
    const std::size_t n_dates = opens.n_dates();
    if (n_dates < 2) throw InputError("overnight returns need at least two dates");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n_dates - 1), static_cast<Eigen::Index>(opens.n_nodes()));
    for (std::size_t t = 1; t < n_dates; ++t) {
        for (std::size_t i = 0; i < opens.n_nodes(); ++i) {
            const double prev_close = closes(t - 1, i);
            if (prev_close == 0.0) {
                throw InputError("zero close for node '" + closes.node_ids()[i] + "' on " +
                                 closes.dates()[t - 1]);
            }
            out(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(i)) = opens(t, i) / prev_close - 1.0;
        }
    }
    std::vector<std::string> dates(opens.dates().begin() + 1, opens.dates().end());
    return TimeSeriesPanel(opens.node_ids(), std::move(dates), std::move(out));
}

AlignResult align(const NamedPanels& panels) {
    if (panels.empty()) throw InputError("nothing to align");

    const auto& reference = panels.begin()->second.node_ids();
    const std::set<std::string> reference_set(reference.begin(), reference.end());
    std::set<std::string> all_dates;
    std::vector<std::string> common = panels.begin()->second.dates();
    for (const auto& [name, panel] : panels) {
        const std::set<std::string> nodes(panel.node_ids().begin(), panel.node_ids().end());
        if (nodes != reference_set) {
            throw InputError("panel '" + name + "' does not carry the same node set as '" +
                             panels.begin()->first + "'");
        }
        all_dates.insert(panel.dates().begin(), panel.dates().end());
        std::vector<std::string> next;
        std::set_intersection(common.begin(), common.end(), panel.dates().begin(), panel.dates().end(),
                              std::back_inserter(next));
        common = std::move(next);
    }
    if (common.empty()) throw InputError("panels share no dates");

    AlignResult result;
    result.dropped_dates = all_dates.size() - common.size();
    for (const auto& [name, panel] : panels) {
        const TimeSeriesPanel ordered = panel.reorder_nodes(reference);
        Eigen::MatrixXd v(static_cast<Eigen::Index>(common.size()), static_cast<Eigen::Index>(reference.size()));
        std::size_t src = 0;
        for (std::size_t k = 0; k < common.size(); ++k) {
            while (ordered.dates()[src] != common[k]) ++src;
            v.row(static_cast<Eigen::Index>(k)) = ordered.values().row(static_cast<Eigen::Index>(src));
        }
        result.panels.emplace(name, TimeSeriesPanel(reference, common, std::move(v)));
    }
    return result;
}

}  // namespace volnet
