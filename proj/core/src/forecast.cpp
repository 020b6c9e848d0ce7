#include "volnet/forecast.hpp"

#include "volnet/csv.hpp"
#include "volnet/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace volnet {

std::string_view to_string(NetworkMode m) {
    switch (m) {
        case NetworkMode::fully_connected: return "fully_connected";
        case NetworkMode::graphical_lasso: return "graphical_lasso";
        case NetworkMode::empty: return "empty";
    }
    return "unknown";
}

NetworkMode parse_network_mode(std::string_view text) {
    if (text == "fully_connected" || text == "FC" || text == "fc") return NetworkMode::fully_connected;
    if (text == "graphical_lasso" || text == "GL" || text == "gl") return NetworkMode::graphical_lasso;
    if (text == "empty" || text == "none") return NetworkMode::empty;
    throw InputError("unknown network mode '" + std::string(text) +
                     "' (expected fully_connected, graphical_lasso or empty)");
}

void RollingConfig::validate(const ModelSpec& spec) const {
    if (block < 1) throw InputError("block must be at least 1");
    if (refit_window > initial_window) {
        throw InputError("refit_window (" + std::to_string(refit_window) + ") exceeds initial_window (" +
                         std::to_string(initial_window) + ")");
    }
    const std::size_t need = kHarHistory + spec.max_exog_lag();
    if (refit_window <= need) {
        throw InputError("refit_window must exceed 22 + max exogenous lag (" + std::to_string(need) + ")");
    }
    if (glasso_rho && !(*glasso_rho >= 0.0)) throw InputError("glasso rho must be nonnegative");
    if (cv_folds < 2) throw InputError("cv_folds must be at least 2");
}

Standardised standardise_window(std::span<const double> x, std::string_view series) {
    if (x.size() < 2) throw EstimationError("cannot standardise " + std::string(series) + ": fewer than two values");
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    Standardised out;
    out.mean = v.mean();
    const double var = (v.array() - out.mean).square().sum() / static_cast<double>(x.size() - 1);
    out.std = std::sqrt(var);
    if (!(out.std > 0.0)) throw EstimationError("cannot standardise " + std::string(series) + ": zero standard deviation");
    out.z = (v.array() - out.mean) / out.std;
    return out;
}

double jensen_backtransform(double y_hat_log, double sigma2_log) {
    return std::exp(y_hat_log + 0.5 * sigma2_log);
}

namespace {

struct RefitOutput {
    RefitRecord record;
    // forecasts for rows origin .. origin+n_forecasts-1
    Eigen::MatrixXd log_mean;
    Eigen::MatrixXd rv;
};

class Backtester {
public:
    Backtester(const TimeSeriesPanel& log_rv, const NamedPanels& exog, const TimeSeriesPanel& returns,
               const ModelSpec& spec, const RollingConfig& cfg)
        : log_rv_(log_rv), returns_(returns), spec_(spec), cfg_(cfg), n_(log_rv.n_nodes()) {
        for (const auto& term : spec_.exog) {
            auto it = exog.find(term.name);
            if (it == exog.end()) throw InputError("missing exogenous series '" + term.name + "'");
            if (!it->second.same_shape(log_rv)) {
                throw InputError("exogenous series '" + term.name + "' is not aligned with the log-RV panel");
            }
            exog_.push_back(&it->second.values());
        }
    }

    void set_rho(std::optional<double> rho) { rho_ = rho; }

    RefitOutput refit(std::size_t origin) const {
        const std::string refit_date = log_rv_.dates()[origin - 1];
        try {
            return refit_impl(origin, refit_date);
        } catch (const Error& e) {
            throw EstimationError("refit " + refit_date + ": " + e.what());
        }
    }

private:
    Network window_network(std::size_t begin, std::size_t end, bool& converged) const {
        converged = true;
        switch (cfg_.network_mode) {
            case NetworkMode::fully_connected: return fully_connected(n_);
            case NetworkMode::empty: return Network(n_, {});
            case NetworkMode::graphical_lasso: {
                const Eigen::MatrixXd window = returns_.values().middleRows(
                    static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
                return estimate_glasso_network(window, *rho_, cfg_.glasso, cfg_.zero_tol, &converged);
            }
        }
        return fully_connected(n_);
    }

    RefitOutput refit_impl(std::size_t origin, const std::string& refit_date) const {
        const std::size_t begin = origin - cfg_.refit_window;
        const auto w = static_cast<Eigen::Index>(cfg_.refit_window);
        const auto b = static_cast<Eigen::Index>(begin);

        RefitOutput out;
        out.record.refit_date = refit_date;
        out.record.origin = origin;
        out.record.network = window_network(begin, origin, out.record.glasso_converged);

        const Eigen::MatrixXd y_window = log_rv_.values().middleRows(b, w);
        std::vector<Eigen::MatrixXd> exog_window;
        exog_window.reserve(exog_.size());
        for (const auto* x : exog_) exog_window.push_back(x->middleRows(b, w));
        std::vector<const Eigen::MatrixXd*> exog_window_ptrs;
        for (const auto& x : exog_window) exog_window_ptrs.push_back(&x);

        const FeatureBuilder train_builder(y_window, exog_window_ptrs, out.record.network, spec_);
        const std::size_t k = spec_.n_features();
        const std::size_t t0 = spec_.first_row();
        const std::size_t rows_per_node = cfg_.refit_window - t0;

        // per-node raw features and targets
        std::vector<Eigen::MatrixXd> feats(n_, Eigen::MatrixXd(static_cast<Eigen::Index>(rows_per_node), static_cast<Eigen::Index>(k)));
        std::vector<Eigen::VectorXd> targets(n_, Eigen::VectorXd(static_cast<Eigen::Index>(rows_per_node)));
        Eigen::VectorXd row(static_cast<Eigen::Index>(k));
        for (std::size_t t = t0; t < cfg_.refit_window; ++t) {
            for (std::size_t i = 0; i < n_; ++i) {
                const auto r = static_cast<Eigen::Index>(t - t0);
                train_builder.features(t, i, row);
                feats[i].row(r) = row.transpose();
                targets[i](r) = y_window(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
            }
        }

        const auto names = feature_names(spec_);
        Standardisation st;
        st.response.resize(n_);
        st.features.assign(n_, std::vector<SeriesStats>(k));
        for (std::size_t i = 0; i < n_; ++i) {
            const std::string& node = log_rv_.node_ids()[i];
            const auto resp = standardise_window(std::span<const double>(targets[i].data(), rows_per_node),
                                                 "log RV of node '" + node + "'");
            st.response[i] = {resp.mean, resp.std};
            targets[i] = resp.z;
            for (std::size_t f = 0; f < k; ++f) {
                auto col = feats[i].col(static_cast<Eigen::Index>(f));
                if (train_builder.empty_network_feature(f, i)) {
                    // no neighbours at this stage: the column is identically zero and stays so
                    st.features[i][f] = {0.0, 1.0};
                    continue;
                }
                const Eigen::VectorXd raw = col;
                const auto z = standardise_window(std::span<const double>(raw.data(), rows_per_node),
                                                  names[f] + " of node '" + node + "'");
                st.features[i][f] = {z.mean, z.std};
                col = z.z;
            }
        }

        Design design;
        design.n_nodes = n_;
        design.node_ids = log_rv_.node_ids();
        const auto total_rows = static_cast<Eigen::Index>(rows_per_node * n_);
        Eigen::MatrixXd stacked(total_rows, static_cast<Eigen::Index>(k));
        design.targets.resize(total_rows);
        design.rows.reserve(static_cast<std::size_t>(total_rows));
        for (std::size_t t = 0; t < rows_per_node; ++t) {
            for (std::size_t i = 0; i < n_; ++i) {
                const auto r = static_cast<Eigen::Index>(design.rows.size());
                stacked.row(r) = feats[i].row(static_cast<Eigen::Index>(t));
                design.targets(r) = targets[i](static_cast<Eigen::Index>(t));
                design.rows.push_back({begin + t0 + t, i});
            }
        }
        design.X = layout_design(stacked, design.rows, spec_.variant, n_);
        FittedModel model = fit_ols(design, spec_);

        out.record.coefficients = model.coefficients;
        out.record.coefficient_keys.reserve(model.keys.size());
        for (std::size_t c = 0; c < model.keys.size(); ++c) out.record.coefficient_keys.push_back(model.key(c));
        out.record.resid_var_std = model.resid_var;
        out.record.resid_var_log.resize(static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < n_; ++i) {
            const double s = st.response[i].std;
            out.record.resid_var_log(static_cast<Eigen::Index>(i)) = s * s * model.resid_var(static_cast<Eigen::Index>(i));
        }
        out.record.rank_deficient = model.rank_deficient;

        // one-step forecasts from observed lags; the builder only reads rows before each target date
        const std::size_t end = std::min(origin + cfg_.block, log_rv_.n_dates());
        out.record.n_forecasts = end - origin;
        const FeatureBuilder full_builder(log_rv_.values(), exog_, out.record.network, spec_);
        out.log_mean.resize(static_cast<Eigen::Index>(end - origin), static_cast<Eigen::Index>(n_));
        out.rv.resizeLike(out.log_mean);
        std::vector<Eigen::VectorXd> effective;
        for (std::size_t i = 0; i < n_; ++i) effective.push_back(model.effective_coefficients(i));
        Eigen::VectorXd f(static_cast<Eigen::Index>(k));
        for (std::size_t t = origin; t < end; ++t) {
            for (std::size_t i = 0; i < n_; ++i) {
                full_builder.features(t, i, f);
                for (std::size_t c = 0; c < k; ++c) {
                    const SeriesStats& s = st.features[i][c];
                    const auto ci = static_cast<Eigen::Index>(c);
                    f(ci) = train_builder.empty_network_feature(c, i) ? 0.0 : (f(ci) - s.mean) / s.std;
                }
                const double y_std = effective[i].dot(f);
                const double y_log = st.response[i].mean + st.response[i].std * y_std;
                const auto r = static_cast<Eigen::Index>(t - origin);
                const auto c = static_cast<Eigen::Index>(i);
                out.log_mean(r, c) = y_log;
                out.rv(r, c) = jensen_backtransform(y_log, out.record.resid_var_log(c));
            }
        }
        return out;
    }

    const TimeSeriesPanel& log_rv_;
    const TimeSeriesPanel& returns_;
    std::vector<const Eigen::MatrixXd*> exog_;
    ModelSpec spec_;
    RollingConfig cfg_;
    std::size_t n_;
    std::optional<double> rho_;
};

}  // namespace

BacktestResult run_backtest(const TimeSeriesPanel& log_rv, const NamedPanels& exog, const TimeSeriesPanel& returns,
                            const ModelSpec& spec, const RollingConfig& cfg, std::size_t threads) {
    spec.validate();
    cfg.validate(spec);
    const std::size_t T = log_rv.n_dates();
    if (log_rv.n_nodes() == 0) throw InputError("log-RV panel has no nodes");
    if (T <= cfg.initial_window) {
        throw InputError("need more than initial_window (" + std::to_string(cfg.initial_window) + ") dates, have " +
                         std::to_string(T));
    }
    if (cfg.network_mode == NetworkMode::graphical_lasso && !returns.same_shape(log_rv)) {
        throw InputError("graphical lasso networks need a returns panel aligned with the log-RV panel");
    }

    Backtester bt(log_rv, exog, returns, spec, cfg);
    BacktestResult result;
    result.n_params = param_count(spec, log_rv.n_nodes());
    if (cfg.network_mode == NetworkMode::graphical_lasso) {
        if (cfg.glasso_rho) {
            result.rho = cfg.glasso_rho;
        } else {
            const Eigen::MatrixXd initial = returns.values().topRows(static_cast<Eigen::Index>(cfg.initial_window));
            try {
                result.rho = select_rho(initial, cfg.cv_folds, {}, cfg.glasso).rho;
            } catch (const Error& e) {
                throw EstimationError(std::string("rho selection on the initial window: ") + e.what());
            }
        }
        bt.set_rho(result.rho);
    }

    std::vector<std::size_t> origins;
    for (std::size_t o = cfg.initial_window; o < T; o += cfg.block) origins.push_back(o);

    std::vector<RefitOutput> outputs(origins.size());
    std::vector<std::exception_ptr> errors(origins.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t job = next++; job < origins.size(); job = next++) {
            try {
                outputs[job] = bt.refit(origins[job]);
            } catch (...) {
                errors[job] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, origins.size());
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    const std::size_t n_out = T - cfg.initial_window;
    const auto n = static_cast<Eigen::Index>(log_rv.n_nodes());
    Eigen::MatrixXd fc(static_cast<Eigen::Index>(n_out), n);
    Eigen::MatrixXd lf(static_cast<Eigen::Index>(n_out), n);
    for (auto& out : outputs) {
        const auto r0 = static_cast<Eigen::Index>(out.record.origin - cfg.initial_window);
        fc.middleRows(r0, out.rv.rows()) = out.rv;
        lf.middleRows(r0, out.log_mean.rows()) = out.log_mean;
        result.refits.push_back(std::move(out.record));
    }
    std::vector<std::string> dates(log_rv.dates().begin() + static_cast<std::ptrdiff_t>(cfg.initial_window),
                                   log_rv.dates().end());
    const Eigen::MatrixXd actual =
        log_rv.values().bottomRows(static_cast<Eigen::Index>(n_out)).array().exp().matrix();
    result.forecasts = TimeSeriesPanel(log_rv.node_ids(), dates, std::move(fc));
    result.log_forecasts = TimeSeriesPanel(log_rv.node_ids(), dates, std::move(lf));
    result.actuals = TimeSeriesPanel(log_rv.node_ids(), std::move(dates), actual);
    return result;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

}  // namespace

void write_forecasts_csv(const std::filesystem::path& path, const BacktestResult& result) {
    auto out = open_out(path);
    out << "date,node,rv_actual,rv_forecast,logrv_forecast\n";
    const auto& f = result.forecasts;
    for (std::size_t t = 0; t < f.n_dates(); ++t) {
        for (std::size_t i = 0; i < f.n_nodes(); ++i) {
            out << f.dates()[t] << ',' << f.node_ids()[i] << ',' << csv::format_double(result.actuals(t, i)) << ','
                << csv::format_double(f(t, i)) << ',' << csv::format_double(result.log_forecasts(t, i)) << '\n';
        }
    }
}

void write_coefficients_csv(const std::filesystem::path& path, const BacktestResult& result) {
    auto out = open_out(path);
    out << "refit_date,coefficient_key,value\n";
    for (const auto& rec : result.refits) {
        for (std::size_t k = 0; k < rec.coefficient_keys.size(); ++k) {
            out << rec.refit_date << ',' << rec.coefficient_keys[k] << ','
                << csv::format_double(rec.coefficients(static_cast<Eigen::Index>(k))) << '\n';
        }
    }
}

void write_residual_var_csv(const std::filesystem::path& path, const BacktestResult& result) {
    auto out = open_out(path);
    out << "refit_date,node,resid_var_log\n";
    const auto& nodes = result.forecasts.node_ids();
    for (const auto& rec : result.refits) {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            out << rec.refit_date << ',' << nodes[i] << ','
                << csv::format_double(rec.resid_var_log(static_cast<Eigen::Index>(i))) << '\n';
        }
    }
}

void write_network_trajectory(const std::filesystem::path& dir, const BacktestResult& result) {
    std::filesystem::create_directories(dir);
    for (const auto& rec : result.refits) {
        write_network_json(dir / (rec.refit_date + ".json"), {result.forecasts.node_ids(), rec.network});
    }
}

std::pair<TimeSeriesPanel, TimeSeriesPanel> read_forecasts_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || csv::split_line(line) != std::vector<std::string>{"date", "node", "rv_actual",
                                                                                      "rv_forecast", "logrv_forecast"}) {
        throw InputError(path.string() + ": expected header date,node,rv_actual,rv_forecast,logrv_forecast");
    }
    std::vector<std::string> dates;
    std::vector<std::string> nodes;
    std::map<std::string, std::size_t> node_pos;
    std::vector<std::vector<std::pair<double, double>>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = csv::split_line(line);
        if (cells.size() != 5) throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected 5 columns");
        if (dates.empty() || dates.back() != cells[0]) {
            dates.push_back(cells[0]);
            rows.emplace_back();
        }
        auto [it, inserted] = node_pos.emplace(cells[1], nodes.size());
        if (inserted) {
            if (dates.size() > 1) throw InputError(path.string() + ": node '" + cells[1] + "' missing on earlier dates");
            nodes.push_back(cells[1]);
        }
        auto& row = rows.back();
        if (it->second != row.size()) throw InputError(path.string() + ":" + std::to_string(line_no) + ": node order differs");
        row.emplace_back(csv::parse_double(cells[2]), csv::parse_double(cells[3]));
    }
    Eigen::MatrixXd a(static_cast<Eigen::Index>(dates.size()), static_cast<Eigen::Index>(nodes.size()));
    Eigen::MatrixXd f(a.rows(), a.cols());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != nodes.size()) throw InputError(path.string() + ": incomplete date " + dates[t]);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = rows[t][i].first;
            f(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = rows[t][i].second;
        }
    }
    return {TimeSeriesPanel(nodes, dates, std::move(a)), TimeSeriesPanel(nodes, std::move(dates), std::move(f))};
}

}  // namespace volnet
