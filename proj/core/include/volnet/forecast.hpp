#pragma once

#include "volnet/glasso.hpp"
#include "volnet/model.hpp"
#include "volnet/network.hpp"
#include "volnet/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace volnet {

enum class NetworkMode {
    fully_connected,
    graphical_lasso,
    empty,  // no edges: the HAR / HARX benchmarks
};

std::string_view to_string(NetworkMode m);
NetworkMode parse_network_mode(std::string_view text);

struct RollingConfig {
    std::size_t initial_window = 1008;  // four years of trading days
    std::size_t refit_window = 756;     // three years
    std::size_t block = 22;             // one-step forecasts per refit
    NetworkMode network_mode = NetworkMode::fully_connected;
    std::optional<double> glasso_rho;   // selected by CV on the initial window when unset
    std::size_t cv_folds = 10;
    GlassoOptions glasso{1e-6, 500, 10000};
    double zero_tol = 1e-8;

    /// Throws InputError when the window invariants fail for `spec`.
    void validate(const ModelSpec& spec) const;
};

struct Standardised {
    Eigen::VectorXd z;
    double mean = 0.0;
    double std = 0.0;
};

/// z = (x - mean) / std with the sample std (n-1). Throws EstimationError naming `series` on zero std.
Standardised standardise_window(std::span<const double> x, std::string_view series = "series");

/// exp(y_hat_log + sigma2_log / 2).
double jensen_backtransform(double y_hat_log, double sigma2_log);

/// One refit of the rolling procedure.
struct RefitRecord {
    std::string refit_date;  // last date of the training window
    std::size_t origin = 0;  // row of the first forecast
    std::size_t n_forecasts = 0;
    std::vector<std::string> coefficient_keys;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd resid_var_std;  // standardised space, per node
    Eigen::VectorXd resid_var_log;  // log space, per node (used by the back-transform)
    Network network;
    bool rank_deficient = false;
    bool glasso_converged = true;
};

struct BacktestResult {
    TimeSeriesPanel forecasts;      // RV forecasts on the out-of-sample dates
    TimeSeriesPanel actuals;        // realised RV on the same dates
    TimeSeriesPanel log_forecasts;  // mean log-RV forecasts before the back-transform
    std::vector<RefitRecord> refits;
    std::optional<double> rho;      // glasso penalty in use
    std::size_t n_params = 0;
};

/**
 * Rolling-window one-step-ahead backtest.
 *
 * Origins start at initial_window and advance by block. At each origin o the
 * model is refitted on rows [o - refit_window, o): the network is re-estimated
 * (graphical lasso mode) or kept complete, every design column and the
 * response are standardised per node within the window, and OLS is run.
 * Dates o .. o+block-1 are then forecast from observed lags with the frozen
 * model and mapped back to RV with the Jensen correction, using the residual
 * variance scaled by the squared response std.
 *
 * `returns` is only read in graphical lasso mode. Refits run on up to
 * `threads` workers; the result does not depend on the thread count.
 *
 * Throws InputError on misaligned inputs or config violations and
 * EstimationError (naming the refit date) when a window cannot be fitted.
 */
BacktestResult run_backtest(const TimeSeriesPanel& log_rv, const NamedPanels& exog,
                            const TimeSeriesPanel& returns, const ModelSpec& spec,
                            const RollingConfig& cfg, std::size_t threads = 1);

// date,node,rv_actual,rv_forecast,logrv_forecast
void write_forecasts_csv(const std::filesystem::path& path, const BacktestResult& result);
// refit_date,coefficient_key,value
void write_coefficients_csv(const std::filesystem::path& path, const BacktestResult& result);
// refit_date,node,resid_var_log
void write_residual_var_csv(const std::filesystem::path& path, const BacktestResult& result);
// one <refit_date>.json per refit
void write_network_trajectory(const std::filesystem::path& dir, const BacktestResult& result);

/// Reads a forecasts CSV back into (actuals, forecasts) panels.
std::pair<TimeSeriesPanel, TimeSeriesPanel> read_forecasts_csv(const std::filesystem::path& path);

}  // namespace volnet
