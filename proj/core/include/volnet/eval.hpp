#pragma once

#include "volnet/panel.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace volnet {

/// mean(log f + a / f). Throws InputError on shape mismatch or nonpositive entries.
double qlike(const TimeSeriesPanel& actual, const TimeSeriesPanel& forecast);

/// mean((a - f)^2). Throws InputError on shape mismatch.
double mse(const TimeSeriesPanel& actual, const TimeSeriesPanel& forecast);

/// Forecasts of one model, plus descriptive columns for the ranking table.
struct ModelRun {
    std::string label;
    std::string variant;
    std::string network;
    std::vector<std::string> exog;
    TimeSeriesPanel actuals;
    TimeSeriesPanel forecasts;
    std::size_t n_params = 0;
};

struct NodeLoss {
    double qlike = 0.0;
    double mse = 0.0;
};

struct LossSummary {
    std::string label;
    std::string variant;
    std::string network;
    std::vector<std::string> exog;
    double qlike = 0.0;
    double mse = 0.0;
    double rel_qlike = 1.0;
    double rel_mse = 1.0;
    std::size_t n_params = 0;
    std::map<std::string, NodeLoss> per_node;
};

/// 1 + (loss - best) / |best|: the plain ratio loss / best for positive
/// losses, and still >= 1 when losses are negative (QLIKE on small RV).
double relative_loss(double loss, double best);

/**
 * Losses on the common sample, ratios to the per-metric best, sorted by
 * QLIKE ascending with ties broken by label. Throws InputError when runs
 * disagree on dates or nodes.
 */
std::vector<LossSummary> rank_models(const std::vector<ModelRun>& runs);

// model,variant,network,exogenous,qlike,rel_qlike,rel_mse,n_params
void write_ranking_csv(const std::filesystem::path& path, const std::vector<LossSummary>& table);

}  // namespace volnet
