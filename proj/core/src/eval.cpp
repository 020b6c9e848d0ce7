#include "volnet/eval.hpp"

#include "volnet/csv.hpp"
#include "volnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace volnet {

namespace {

void check_shapes(const TimeSeriesPanel& actual, const TimeSeriesPanel& forecast) {
    if (actual.values().rows() != forecast.values().rows() || actual.values().cols() != forecast.values().cols()) {
        std::ostringstream msg;
        msg << "loss: shape mismatch " << actual.values().rows() << "x" << actual.values().cols() << " vs "
            << forecast.values().rows() << "x" << forecast.values().cols();
        throw InputError(msg.str());
    }
    if (actual.n_dates() == 0 || actual.n_nodes() == 0) throw InputError("loss: empty panel");
}

double qlike_values(const Eigen::MatrixXd& a, const Eigen::MatrixXd& f) {
    double sum = 0.0;
    for (Eigen::Index t = 0; t < a.rows(); ++t) {
        for (Eigen::Index i = 0; i < a.cols(); ++i) {
            if (!(f(t, i) > 0.0)) throw InputError("qlike: nonpositive forecast");
            if (!(a(t, i) > 0.0)) throw InputError("qlike: nonpositive realised variance");
            sum += std::log(f(t, i)) + a(t, i) / f(t, i);
        }
    }
    return sum / static_cast<double>(a.size());
}

}  // namespace

double qlike(const TimeSeriesPanel& actual, const TimeSeriesPanel& forecast) {
    check_shapes(actual, forecast);
    return qlike_values(actual.values(), forecast.values());
}

double mse(const TimeSeriesPanel& actual, const TimeSeriesPanel& forecast) {
    check_shapes(actual, forecast);
    return (actual.values() - forecast.values()).squaredNorm() / static_cast<double>(actual.values().size());
}

double relative_loss(double loss, double best) {
    if (best == 0.0) return loss == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return 1.0 + (loss - best) / std::abs(best);
}

std::vector<LossSummary> rank_models(const std::vector<ModelRun>& runs) {
    if (runs.empty()) return {};
    const auto& ref = runs.front();
    std::vector<LossSummary> out;
    out.reserve(runs.size());
    for (const auto& run : runs) {
        if (!run.actuals.same_shape(ref.actuals) || !run.forecasts.same_shape(ref.actuals)) {
            throw InputError("model '" + run.label + "' is not evaluated on the same dates and nodes as '" +
                             ref.label + "'");
        }
        LossSummary s;
        s.label = run.label;
        s.variant = run.variant;
        s.network = run.network;
        s.exog = run.exog;
        s.n_params = run.n_params;
        s.qlike = qlike(run.actuals, run.forecasts);
        s.mse = mse(run.actuals, run.forecasts);
        for (std::size_t i = 0; i < run.actuals.n_nodes(); ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            const Eigen::MatrixXd a = run.actuals.values().col(c);
            const Eigen::MatrixXd f = run.forecasts.values().col(c);
            s.per_node[run.actuals.node_ids()[i]] = {qlike_values(a, f), (a - f).squaredNorm() / static_cast<double>(a.size())};
        }
        out.push_back(std::move(s));
    }
    double best_q = out.front().qlike;
    double best_m = out.front().mse;
    for (const auto& s : out) {
        best_q = std::min(best_q, s.qlike);
        best_m = std::min(best_m, s.mse);
    }
    for (auto& s : out) {
        s.rel_qlike = relative_loss(s.qlike, best_q);
        s.rel_mse = relative_loss(s.mse, best_m);
    }
    std::sort(out.begin(), out.end(), [](const LossSummary& a, const LossSummary& b) {
        if (a.qlike != b.qlike) return a.qlike < b.qlike;
        return a.label < b.label;
    });
    return out;
}

void write_ranking_csv(const std::filesystem::path& path, const std::vector<LossSummary>& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "model,variant,network,exogenous,qlike,rel_qlike,rel_mse,n_params\n";
    for (const auto& s : table) {
        std::string ex;
        for (std::size_t k = 0; k < s.exog.size(); ++k) ex += (k ? ";" : "") + s.exog[k];
        out << s.label << ',' << s.variant << ',' << s.network << ',' << ex << ',' << csv::format_double(s.qlike) << ','
            << csv::format_double(s.rel_qlike) << ',' << csv::format_double(s.rel_mse) << ',' << s.n_params << '\n';
    }
}

}  // namespace volnet
