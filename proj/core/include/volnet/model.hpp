#pragma once

#include "volnet/network.hpp"
#include "volnet/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace volnet {

// Rows of history a HAR regression needs: daily lag 1, weekly 2..5, monthly 6..22.
inline constexpr std::size_t kHarHistory = 22;

/// Degree of parameter sharing across nodes.
enum class Variant {
    global,    // everything shared
    standard,  // per-node autoregressive terms, shared network/exogenous terms
    local,     // everything per node
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

/// One exogenous regressor and the lags at which it enters (0 = same day).
struct ExogTerm {
    std::string name;
    std::vector<std::size_t> lags{1};
};

struct ModelSpec {
    Variant variant = Variant::global;
    std::size_t r_d = 1;
    std::size_t r_w = 1;
    std::size_t r_m = 1;
    std::vector<ExogTerm> exog;

    /// Throws InputError on duplicate exog names or empty lag lists.
    void validate() const;

    std::size_t max_stage() const;
    std::size_t max_exog_lag() const;  // 0 when there are no exogenous terms
    std::size_t n_network_terms() const { return r_d + r_w + r_m; }
    std::size_t n_exog_terms() const;
    /// Regressors per (date, node) row: 3 own HAR terms, network terms, exogenous terms.
    std::size_t n_features() const { return 3 + n_network_terms() + n_exog_terms(); }
    /// First row index with enough history: max(22, max exog lag).
    std::size_t first_row() const;
};

/// Names of the per-row regressors in feature order, e.g. alpha_d, beta_w_1, lambda_iv_1.
std::vector<std::string> feature_names(const ModelSpec& spec);

/// Number of free coefficients for the variant on n nodes.
std::size_t param_count(const ModelSpec& spec, std::size_t n);

struct HarComponents {
    double daily = 0.0;    // y[t-1]
    double weekly = 0.0;   // mean y[t-5 .. t-2]
    double monthly = 0.0;  // mean y[t-22 .. t-6]
};

/// Throws InputError("insufficient history") when t < 22.
HarComponents har_components(const Eigen::MatrixXd& y, std::size_t t, std::size_t i);
HarComponents har_components(const TimeSeriesPanel& y, std::size_t t, std::size_t i);

struct RowIndex {
    std::size_t t = 0;
    std::size_t node = 0;
    friend bool operator==(const RowIndex&, const RowIndex&) = default;
};

/**
 * Computes the raw regressors of one (t, node) row.
 *
 * Holds references to the response and exogenous matrices; they must outlive
 * the builder. Exogenous matrices are matched to spec.exog by position.
 */
class FeatureBuilder {
public:
    FeatureBuilder(const Eigen::MatrixXd& y, std::vector<const Eigen::MatrixXd*> exog,
                   const Network& net, const ModelSpec& spec);

    std::size_t n_features() const { return n_features_; }
    std::size_t n_nodes() const { return n_nodes_; }

    /// Reads y rows t-22..t-1 and exogenous rows t-lag only.
    void features(std::size_t t, std::size_t i, Eigen::Ref<Eigen::VectorXd> out) const;
    Eigen::VectorXd features(std::size_t t, std::size_t i) const;

    /// True when the network feature has no neighbours for node i (the column is identically zero).
    bool empty_network_feature(std::size_t feature, std::size_t i) const;

private:
    const Eigen::MatrixXd& y_;
    std::vector<const Eigen::MatrixXd*> exog_;
    ModelSpec spec_;
    NeighborStages stages_;
    std::size_t n_nodes_;
    std::size_t n_features_;
};

/// Per-row regressors before they are laid out into variant-specific columns.
struct FeatureMatrix {
    Eigen::MatrixXd features;  // rows x n_features
    Eigen::VectorXd targets;
    std::vector<RowIndex> rows;  // t-major, nodes in order
    std::size_t n_nodes = 0;
};

/// Rows t = spec.first_row() .. T-1 for every node.
FeatureMatrix build_features(const TimeSeriesPanel& y, const NamedPanels& exog, const Network& net,
                             const ModelSpec& spec);

/// Places per-row features into the column layout of the variant.
Eigen::MatrixXd layout_design(const Eigen::MatrixXd& features, const std::vector<RowIndex>& rows,
                              Variant variant, std::size_t n_nodes);

struct Design {
    Eigen::MatrixXd X;
    Eigen::VectorXd targets;
    std::vector<RowIndex> rows;
    std::size_t n_nodes = 0;
    std::vector<std::string> node_ids;  // optional labels for coefficient keys
};

/**
 * Design matrix for the GNAR-HARX regression.
 *
 * Global: one column per feature. Standard: per-node blocks of the three own
 * HAR columns followed by shared network/exogenous columns. Local: one full
 * feature block per node. Column count equals param_count(spec, N).
 */
Design build_design(const TimeSeriesPanel& y, const NamedPanels& exog, const Network& net,
                    const ModelSpec& spec);

/// Coefficient identity: term name plus the node it belongs to (nullopt when shared).
struct CoefficientKey {
    std::string term;
    std::optional<std::size_t> node;
    friend bool operator==(const CoefficientKey&, const CoefficientKey&) = default;
};

/// Keys in design column order.
std::vector<CoefficientKey> coefficient_keys(const ModelSpec& spec, std::size_t n);

/// "term" or "term:<node label>" (node index when no labels are given).
std::string key_string(const CoefficientKey& key, const std::vector<std::string>& node_ids = {});

struct SeriesStats {
    double mean = 0.0;
    double std = 1.0;
};

/// Window statistics used to standardise a fit; empty when fitted on raw data.
struct Standardisation {
    std::vector<SeriesStats> response;               // per node
    std::vector<std::vector<SeriesStats>> features;  // [node][feature]
    bool empty() const { return response.empty(); }
};

struct FittedModel {
    ModelSpec spec;
    std::size_t n_nodes = 0;
    std::vector<std::string> node_ids;
    std::vector<CoefficientKey> keys;
    Eigen::VectorXd coefficients;  // aligned with keys
    Eigen::VectorXd resid_var;     // per node
    std::size_t rank = 0;          // summed over regressions for the local variant
    bool rank_deficient = false;
    Standardisation standardisation;
    Network network;
    std::string train_start;
    std::string train_end;

    std::string key(std::size_t k) const { return key_string(keys[k], node_ids); }

    /// Coefficients acting on node i's features, in feature order.
    Eigen::VectorXd effective_coefficients(std::size_t node) const;

    /// Value by key string; throws InputError when absent.
    double coefficient(std::string_view key) const;
};

/**
 * Least squares through a complete orthogonal decomposition.
 *
 * The local variant is solved as one regression per node (rows partitioned by
 * RowIndex::node). Rank-deficient designs yield the minimum-norm solution and
 * set rank_deficient. resid_var[i] = RSS_i / (T_i - rank) over the regression
 * node i belongs to; for a full-rank design rank is the column count.
 *
 * Throws InputError when any regression has no more rows than columns.
 */
FittedModel fit_ols(const Design& design, const ModelSpec& spec);

struct StationarityReport {
    bool stationary = false;
    double margin = 0.0;  // sum of absolute autoregressive and network coefficients
};

/// |a_d|+|a_w|+|a_m| + sum_r |b_{d,r}|+|b_{w,r}|+|b_{m,r}| < 1 for one node's effective coefficients.
StationarityReport stationarity_check(const ModelSpec& spec, const Eigen::VectorXd& effective);
std::vector<StationarityReport> stationarity_check(const FittedModel& model);

/// JSON: spec, coefficients keyed "term[:node]", resid_var, standardisation, network, train span.
std::string to_json(const FittedModel& model);
FittedModel fitted_model_from_json(const std::string& text);

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

}  // namespace volnet
