#pragma once

#include "volnet/model.hpp"
#include "volnet/network.hpp"
#include "volnet/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace volnet {

/**
 * Counter-based Gaussian source: the k-th draw of stream s depends only on
 * (seed, s, k), so per-node streams do not depend on iteration order.
 */
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    /// Uniform on (0, 1).
    double uniform(std::uint64_t counter) const;
    /// Standard normal via Box-Muller on two uniforms.
    double normal(std::uint64_t counter) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// x_t = phi x_{t-1} + noise_std e_t
struct ExogGenerator {
    double phi = 0.0;
    double noise_std = 1.0;
};

/// Gaussian daily returns with precision  diag - coupling * adjacency.
struct ReturnsGenerator {
    Network network;
    double coupling = 0.3;
    double diagonal = 1.0;  // raised automatically to keep the precision diagonally dominant
};

struct SimSpec {
    std::size_t n_nodes = 0;
    std::size_t length = 0;   // rows kept after burn-in
    std::size_t burn_in = 500;
    Network network;
    ModelSpec model;
    Eigen::VectorXd coefficients;  // layout of coefficient_keys(model, n_nodes)
    std::vector<double> noise_std;  // per node; zero gives a deterministic recursion
    std::map<std::string, ExogGenerator> exog;  // one per model.exog name
    std::optional<ReturnsGenerator> returns;
    double offset = 0.0;  // added to the log-RV output
    std::uint64_t seed = 0;
    std::string start_date = "2000-01-03";
    std::vector<std::string> node_ids;  // defaults to N01, N02, ...

    /// Throws InputError on shape problems and non-stationary coefficients (citing the margin).
    void validate() const;
};

struct SimOutput {
    TimeSeriesPanel log_rv;
    NamedPanels exog;
    std::optional<TimeSeriesPanel> returns;
};

/**
 * Generates the exogenous AR(1) drivers first, then iterates the GNAR-HARX
 * recursion from 22 zero lags with Gaussian innovations and drops burn_in rows.
 */
SimOutput simulate(const SimSpec& spec);

/// N01, N02, ... (wider when n >= 100).
std::vector<std::string> default_node_ids(std::size_t n);

/// Consecutive weekdays starting at `start` (YYYY-MM-DD, moved forward to a weekday).
std::vector<std::string> weekday_dates(const std::string& start, std::size_t count);

/// Draws `length` rows from N(0, precision^-1) using stream ids offset by `stream_base`.
Eigen::MatrixXd gaussian_from_precision(const Eigen::MatrixXd& precision, std::size_t length,
                                        std::uint64_t seed, std::uint64_t stream_base = 0);

/// Precision matrix a ReturnsGenerator implies.
Eigen::MatrixXd returns_precision(const ReturnsGenerator& gen);

}  // namespace volnet
