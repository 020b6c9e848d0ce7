#include "volnet/model.hpp"

#include "volnet/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace volnet {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::global: return "global";
        case Variant::standard: return "standard";
        case Variant::local: return "local";
    }
    return "unknown";
}

Variant parse_variant(std::string_view text) {
    if (text == "global") return Variant::global;
    if (text == "standard") return Variant::standard;
    if (text == "local") return Variant::local;
    throw InputError("unknown variant '" + std::string(text) + "' (expected global, standard or local)");
}

void ModelSpec::validate() const {
    std::set<std::string> names;
    for (const auto& term : exog) {
        if (term.name.empty()) throw InputError("exogenous variable with an empty name");
        if (term.name.find(':') != std::string::npos) {
            throw InputError("exogenous name '" + term.name + "' must not contain ':'");
        }
        if (!names.insert(term.name).second) throw InputError("duplicate exogenous variable '" + term.name + "'");
        if (term.lags.empty()) throw InputError("exogenous variable '" + term.name + "' has no lags");
        std::set<std::size_t> lags(term.lags.begin(), term.lags.end());
        if (lags.size() != term.lags.size()) {
            throw InputError("exogenous variable '" + term.name + "' repeats a lag");
        }
    }
}

std::size_t ModelSpec::max_stage() const { return std::max({r_d, r_w, r_m}); }

std::size_t ModelSpec::max_exog_lag() const {
    std::size_t m = 0;
    for (const auto& term : exog) {
        for (auto lag : term.lags) m = std::max(m, lag);
    }
    return m;
}

std::size_t ModelSpec::n_exog_terms() const {
    std::size_t n = 0;
    for (const auto& term : exog) n += term.lags.size();
    return n;
}

std::size_t ModelSpec::first_row() const { return std::max(kHarHistory, max_exog_lag()); }

std::vector<std::string> feature_names(const ModelSpec& spec) {
    std::vector<std::string> names{"alpha_d", "alpha_w", "alpha_m"};
    for (std::size_t r = 1; r <= spec.r_d; ++r) names.push_back("beta_d_" + std::to_string(r));
    for (std::size_t r = 1; r <= spec.r_w; ++r) names.push_back("beta_w_" + std::to_string(r));
    for (std::size_t r = 1; r <= spec.r_m; ++r) names.push_back("beta_m_" + std::to_string(r));
    for (const auto& term : spec.exog) {
        for (auto lag : term.lags) names.push_back("lambda_" + term.name + "_" + std::to_string(lag));
    }
    return names;
}

std::size_t param_count(const ModelSpec& spec, std::size_t n) {
    const std::size_t shared = spec.n_network_terms() + spec.n_exog_terms();
    switch (spec.variant) {
        case Variant::global: return 3 + shared;
        case Variant::standard: return 3 * n + shared;
        case Variant::local: return n * (3 + shared);
    }
    return 0;
}

HarComponents har_components(const Eigen::MatrixXd& y, std::size_t t, std::size_t i) {
    if (t < kHarHistory) throw InputError("insufficient history: row " + std::to_string(t) + " < 22");
    if (t > static_cast<std::size_t>(y.rows()) || i >= static_cast<std::size_t>(y.cols())) {
        throw InputError("har_components: index out of range");
    }
    const auto col = static_cast<Eigen::Index>(i);
    const auto row = static_cast<Eigen::Index>(t);
    HarComponents h;
    h.daily = y(row - 1, col);
    h.weekly = y.col(col).segment(row - 5, 4).mean();
    h.monthly = y.col(col).segment(row - 22, 17).mean();
    return h;
}

HarComponents har_components(const TimeSeriesPanel& y, std::size_t t, std::size_t i) {
    return har_components(y.values(), t, i);
}

FeatureBuilder::FeatureBuilder(const Eigen::MatrixXd& y, std::vector<const Eigen::MatrixXd*> exog,
                               const Network& net, const ModelSpec& spec)
    : y_(y),
      exog_(std::move(exog)),
      spec_(spec),
      stages_(neighbor_stages(net, spec.max_stage())),
      n_nodes_(static_cast<std::size_t>(y.cols())),
      n_features_(spec.n_features()) {
    spec_.validate();
    if (net.n_nodes() != n_nodes_) {
        throw InputError("network has " + std::to_string(net.n_nodes()) + " nodes but the panel has " +
                         std::to_string(n_nodes_));
    }
    if (exog_.size() != spec_.exog.size()) throw InputError("one exogenous matrix per exogenous term is required");
    for (std::size_t h = 0; h < exog_.size(); ++h) {
        if (exog_[h]->rows() != y_.rows() || exog_[h]->cols() != y_.cols()) {
            throw InputError("exogenous series '" + spec_.exog[h].name + "' is not aligned with the response");
        }
    }
}

void FeatureBuilder::features(std::size_t t, std::size_t i, Eigen::Ref<Eigen::VectorXd> out) const {
    const HarComponents own = har_components(y_, t, i);
    Eigen::Index k = 0;
    out(k++) = own.daily;
    out(k++) = own.weekly;
    out(k++) = own.monthly;

    const std::size_t r_max = stages_.r_max;
    // neighbour averages of each HAR component, by stage
    std::vector<HarComponents> by_stage(r_max);
    for (std::size_t r = 1; r <= r_max; ++r) {
        const Stage& stage = stages_.at(i, r);
        HarComponents acc{0.0, 0.0, 0.0};
        for (std::size_t j : stage.nodes) {
            const HarComponents nb = har_components(y_, t, j);
            acc.daily += stage.weight * nb.daily;
            acc.weekly += stage.weight * nb.weekly;
            acc.monthly += stage.weight * nb.monthly;
        }
        by_stage[r - 1] = acc;
    }
    for (std::size_t r = 1; r <= spec_.r_d; ++r) out(k++) = by_stage[r - 1].daily;
    for (std::size_t r = 1; r <= spec_.r_w; ++r) out(k++) = by_stage[r - 1].weekly;
    for (std::size_t r = 1; r <= spec_.r_m; ++r) out(k++) = by_stage[r - 1].monthly;

    for (std::size_t h = 0; h < spec_.exog.size(); ++h) {
        for (auto lag : spec_.exog[h].lags) {
            if (lag > t || t - lag >= static_cast<std::size_t>(exog_[h]->rows())) {
                throw InputError("exogenous lag " + std::to_string(lag) + " out of range at row " + std::to_string(t));
            }
            out(k++) = (*exog_[h])(static_cast<Eigen::Index>(t - lag), static_cast<Eigen::Index>(i));
        }
    }
}

Eigen::VectorXd FeatureBuilder::features(std::size_t t, std::size_t i) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(n_features_));
    features(t, i, out);
    return out;
}

bool FeatureBuilder::empty_network_feature(std::size_t feature, std::size_t i) const {
    if (feature < 3 || feature >= 3 + spec_.n_network_terms()) return false;
    std::size_t f = feature - 3;
    std::size_t r;
    if (f < spec_.r_d) {
        r = f + 1;
    } else if (f < spec_.r_d + spec_.r_w) {
        r = f - spec_.r_d + 1;
    } else {
        r = f - spec_.r_d - spec_.r_w + 1;
    }
    return stages_.at(i, r).nodes.empty();
}

namespace {

std::vector<const Eigen::MatrixXd*> exog_matrices(const TimeSeriesPanel& y, const NamedPanels& exog,
                                                  const ModelSpec& spec) {
    std::vector<const Eigen::MatrixXd*> out;
    for (const auto& term : spec.exog) {
        auto it = exog.find(term.name);
        if (it == exog.end()) throw InputError("missing exogenous series '" + term.name + "'");
        if (!it->second.same_shape(y)) {
            throw InputError("exogenous series '" + term.name + "' is not aligned with the response panel");
        }
        out.push_back(&it->second.values());
    }
    return out;
}

}  // namespace

FeatureMatrix build_features(const TimeSeriesPanel& y, const NamedPanels& exog, const Network& net,
                             const ModelSpec& spec) {
    const FeatureBuilder builder(y.values(), exog_matrices(y, exog, spec), net, spec);
    const std::size_t n = y.n_nodes();
    const std::size_t t0 = spec.first_row();
    if (y.n_dates() <= t0) {
        throw InputError("insufficient history: " + std::to_string(y.n_dates()) + " dates, need more than " +
                         std::to_string(t0));
    }
    const std::size_t n_rows = (y.n_dates() - t0) * n;
    FeatureMatrix out;
    out.n_nodes = n;
    out.features.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(builder.n_features()));
    out.targets.resize(static_cast<Eigen::Index>(n_rows));
    out.rows.reserve(n_rows);
    Eigen::VectorXd f(static_cast<Eigen::Index>(builder.n_features()));
    for (std::size_t t = t0; t < y.n_dates(); ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(out.rows.size());
            builder.features(t, i, f);
            out.features.row(r) = f.transpose();
            out.targets(r) = y(t, i);
            out.rows.push_back({t, i});
        }
    }
    return out;
}

Eigen::MatrixXd layout_design(const Eigen::MatrixXd& features, const std::vector<RowIndex>& rows,
                              Variant variant, std::size_t n_nodes) {
    if (static_cast<std::size_t>(features.rows()) != rows.size()) {
        throw InputError("layout_design: feature rows and row index disagree");
    }
    const Eigen::Index k = features.cols();
    const auto n = static_cast<Eigen::Index>(n_nodes);
    switch (variant) {
        case Variant::global: return features;
        case Variant::standard: {
            Eigen::MatrixXd x = Eigen::MatrixXd::Zero(features.rows(), 3 * n + (k - 3));
            for (Eigen::Index r = 0; r < features.rows(); ++r) {
                const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].node);
                x.block(r, 3 * i, 1, 3) = features.block(r, 0, 1, 3);
                x.block(r, 3 * n, 1, k - 3) = features.block(r, 3, 1, k - 3);
            }
            return x;
        }
        case Variant::local: {
            Eigen::MatrixXd x = Eigen::MatrixXd::Zero(features.rows(), n * k);
            for (Eigen::Index r = 0; r < features.rows(); ++r) {
                const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].node);
                x.block(r, i * k, 1, k) = features.row(r);
            }
            return x;
        }
    }
    return features;
}

Design build_design(const TimeSeriesPanel& y, const NamedPanels& exog, const Network& net,
                    const ModelSpec& spec) {
    FeatureMatrix fm = build_features(y, exog, net, spec);
    Design d;
    d.X = layout_design(fm.features, fm.rows, spec.variant, fm.n_nodes);
    d.targets = std::move(fm.targets);
    d.rows = std::move(fm.rows);
    d.n_nodes = fm.n_nodes;
    d.node_ids = y.node_ids();
    return d;
}

std::vector<CoefficientKey> coefficient_keys(const ModelSpec& spec, std::size_t n) {
    const auto names = feature_names(spec);
    std::vector<CoefficientKey> keys;
    switch (spec.variant) {
        case Variant::global:
            for (const auto& name : names) keys.push_back({name, std::nullopt});
            break;
        case Variant::standard:
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < 3; ++k) keys.push_back({names[k], i});
            }
            for (std::size_t k = 3; k < names.size(); ++k) keys.push_back({names[k], std::nullopt});
            break;
        case Variant::local:
            for (std::size_t i = 0; i < n; ++i) {
                for (const auto& name : names) keys.push_back({name, i});
            }
            break;
    }
    return keys;
}

std::string key_string(const CoefficientKey& key, const std::vector<std::string>& node_ids) {
    if (!key.node) return key.term;
    const std::size_t i = *key.node;
    return key.term + ":" + (i < node_ids.size() ? node_ids[i] : std::to_string(i));
}

Eigen::VectorXd FittedModel::effective_coefficients(std::size_t node) const {
    const auto k = static_cast<Eigen::Index>(spec.n_features());
    const auto i = static_cast<Eigen::Index>(node);
    const auto n = static_cast<Eigen::Index>(n_nodes);
    if (node >= n_nodes) throw InputError("effective_coefficients: node out of range");
    Eigen::VectorXd eff(k);
    switch (spec.variant) {
        case Variant::global: eff = coefficients; break;
        case Variant::standard:
            eff.head(3) = coefficients.segment(3 * i, 3);
            eff.tail(k - 3) = coefficients.segment(3 * n, k - 3);
            break;
        case Variant::local: eff = coefficients.segment(i * k, k); break;
    }
    return eff;
}

double FittedModel::coefficient(std::string_view wanted) const {
    for (std::size_t k = 0; k < keys.size(); ++k) {
        if (key(k) == wanted) return coefficients(static_cast<Eigen::Index>(k));
    }
    throw InputError("no coefficient '" + std::string(wanted) + "'");
}

namespace {

// Least squares for one regression; returns coefficients and sets rank.
Eigen::VectorXd solve_min_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::Index& rank) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x.rows(), x.cols());
    cod.setThreshold(1e-11);
    cod.compute(x);
    rank = cod.rank();
    return cod.solve(y);
}

void require_rows(std::size_t rows, std::size_t cols, const std::string& what) {
    if (rows <= cols) {
        std::ostringstream msg;
        msg << what << ": " << rows << " rows for " << cols << " columns; need more rows than columns";
        throw InputError(msg.str());
    }
}

}  // namespace

FittedModel fit_ols(const Design& design, const ModelSpec& spec) {
    spec.validate();
    const std::size_t n = design.n_nodes;
    const std::size_t cols = param_count(spec, n);
    if (static_cast<std::size_t>(design.X.cols()) != cols) {
        throw InputError("design has " + std::to_string(design.X.cols()) + " columns, expected " + std::to_string(cols));
    }
    if (design.X.rows() != design.targets.size() || design.rows.size() != static_cast<std::size_t>(design.X.rows())) {
        throw InputError("design rows, targets and row index disagree");
    }

    FittedModel fit;
    fit.spec = spec;
    fit.n_nodes = n;
    fit.node_ids = design.node_ids;
    fit.keys = coefficient_keys(spec, n);
    fit.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols));
    fit.resid_var = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

    std::vector<std::vector<Eigen::Index>> by_node(n);
    for (std::size_t r = 0; r < design.rows.size(); ++r) {
        const std::size_t i = design.rows[r].node;
        if (i >= n) throw InputError("row index refers to node " + std::to_string(i));
        by_node[i].push_back(static_cast<Eigen::Index>(r));
    }

    if (spec.variant == Variant::local) {
        const auto k = static_cast<Eigen::Index>(spec.n_features());
        std::size_t rank_total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rows = by_node[i];
            require_rows(rows.size(), static_cast<std::size_t>(k), "regression for node " + std::to_string(i));
            const auto m = static_cast<Eigen::Index>(rows.size());
            Eigen::MatrixXd xi(m, k);
            Eigen::VectorXd yi(m);
            for (Eigen::Index r = 0; r < m; ++r) {
                xi.row(r) = design.X.block(rows[static_cast<std::size_t>(r)], static_cast<Eigen::Index>(i) * k, 1, k);
                yi(r) = design.targets(rows[static_cast<std::size_t>(r)]);
            }
            Eigen::Index rank = 0;
            const Eigen::VectorXd b = solve_min_norm(xi, yi, rank);
            rank_total += static_cast<std::size_t>(rank);
            if (rank < k) fit.rank_deficient = true;
            fit.coefficients.segment(static_cast<Eigen::Index>(i) * k, k) = b;
            // structurally zero columns (stages without neighbours) carry no parameter
            fit.resid_var(static_cast<Eigen::Index>(i)) = (yi - xi * b).squaredNorm() / static_cast<double>(m - rank);
        }
        fit.rank = rank_total;
        return fit;
    }

    for (std::size_t i = 0; i < n; ++i) {
        require_rows(by_node[i].size(), cols, "pooled regression rows for node " + std::to_string(i));
    }
    Eigen::Index rank = 0;
    fit.coefficients = solve_min_norm(design.X, design.targets, rank);
    fit.rank = static_cast<std::size_t>(rank);
    fit.rank_deficient = rank < static_cast<Eigen::Index>(cols);
    const Eigen::VectorXd resid = design.targets - design.X * fit.coefficients;
    for (std::size_t i = 0; i < n; ++i) {
        double rss = 0.0;
        for (auto r : by_node[i]) rss += resid(r) * resid(r);
        fit.resid_var(static_cast<Eigen::Index>(i)) = rss / static_cast<double>(static_cast<Eigen::Index>(by_node[i].size()) - rank);
    }
    return fit;
}

StationarityReport stationarity_check(const ModelSpec& spec, const Eigen::VectorXd& effective) {
    const auto n_ar = static_cast<Eigen::Index>(3 + spec.n_network_terms());
    if (effective.size() < n_ar) throw InputError("stationarity_check: coefficient vector too short");
    StationarityReport rep;
    rep.margin = effective.head(n_ar).cwiseAbs().sum();
    rep.stationary = rep.margin < 1.0;
    return rep;
}

std::vector<StationarityReport> stationarity_check(const FittedModel& model) {
    std::vector<StationarityReport> out;
    out.reserve(model.n_nodes);
    for (std::size_t i = 0; i < model.n_nodes; ++i) {
        out.push_back(stationarity_check(model.spec, model.effective_coefficients(i)));
    }
    return out;
}

namespace {

using ojson = nlohmann::ordered_json;

ojson spec_json(const ModelSpec& spec) {
    ojson j;
    j["variant"] = std::string(to_string(spec.variant));
    j["stages"] = {spec.r_d, spec.r_w, spec.r_m};
    auto ex = ojson::array();
    for (const auto& term : spec.exog) ex.push_back({{"name", term.name}, {"lags", term.lags}});
    j["exog"] = std::move(ex);
    return j;
}

ModelSpec spec_from(const nlohmann::json& j) {
    ModelSpec spec;
    if (j.contains("variant")) spec.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("stages")) {
        const auto s = j.at("stages").get<std::vector<std::size_t>>();
        if (s.size() != 3) throw InputError("stages must be [r_d, r_w, r_m]");
        spec.r_d = s[0];
        spec.r_w = s[1];
        spec.r_m = s[2];
    }
    if (j.contains("exog")) {
        for (const auto& e : j.at("exog")) {
            ExogTerm term;
            if (e.is_string()) {
                term.name = e.get<std::string>();
            } else {
                term.name = e.at("name").get<std::string>();
                if (e.contains("lags")) term.lags = e.at("lags").get<std::vector<std::size_t>>();
            }
            spec.exog.push_back(std::move(term));
        }
    }
    spec.validate();
    return spec;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(); }

ModelSpec spec_from_json(const std::string& text) {
    try {
        return spec_from(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model spec JSON: ") + e.what());
    }
}

std::string to_json(const FittedModel& model) {
    ojson j;
    j["spec"] = spec_json(model.spec);
    j["n_nodes"] = model.n_nodes;
    j["node_ids"] = model.node_ids;
    ojson coefs = ojson::object();
    for (std::size_t k = 0; k < model.keys.size(); ++k) coefs[model.key(k)] = model.coefficients(static_cast<Eigen::Index>(k));
    j["coefficients"] = std::move(coefs);
    j["resid_var"] = std::vector<double>(model.resid_var.data(), model.resid_var.data() + model.resid_var.size());
    j["rank"] = model.rank;
    j["rank_deficient"] = model.rank_deficient;
    ojson st = ojson::object();
    auto pair = [](const SeriesStats& s) { return ojson::array({s.mean, s.std}); };
    auto resp = ojson::array();
    for (const auto& s : model.standardisation.response) resp.push_back(pair(s));
    auto feats = ojson::array();
    for (const auto& node : model.standardisation.features) {
        auto row = ojson::array();
        for (const auto& s : node) row.push_back(pair(s));
        feats.push_back(std::move(row));
    }
    st["response"] = std::move(resp);
    st["features"] = std::move(feats);
    j["standardisation"] = std::move(st);
    ojson net;
    net["nodes"] = model.node_ids;
    auto edges = ojson::array();
    for (const auto& [a, b] : model.network.edges()) edges.push_back({a, b});
    net["edges"] = std::move(edges);
    j["network"] = std::move(net);
    j["train_range"] = {model.train_start, model.train_end};
    return j.dump(2);
}

FittedModel fitted_model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        FittedModel m;
        m.spec = spec_from(j.at("spec"));
        m.n_nodes = j.at("n_nodes").get<std::size_t>();
        m.node_ids = j.value("node_ids", std::vector<std::string>{});
        m.keys = coefficient_keys(m.spec, m.n_nodes);
        m.coefficients.resize(static_cast<Eigen::Index>(m.keys.size()));
        const auto& coefs = j.at("coefficients");
        for (std::size_t k = 0; k < m.keys.size(); ++k) {
            const std::string key = m.key(k);
            if (!coefs.contains(key)) throw InputError("fitted model JSON lacks coefficient '" + key + "'");
            m.coefficients(static_cast<Eigen::Index>(k)) = coefs.at(key).get<double>();
        }
        if (coefs.size() != m.keys.size()) throw InputError("fitted model JSON has unexpected coefficients");
        const auto rv = j.at("resid_var").get<std::vector<double>>();
        m.resid_var = Eigen::Map<const Eigen::VectorXd>(rv.data(), static_cast<Eigen::Index>(rv.size()));
        m.rank = j.value("rank", std::size_t{0});
        m.rank_deficient = j.value("rank_deficient", false);
        if (j.contains("standardisation")) {
            const auto& st = j.at("standardisation");
            for (const auto& s : st.at("response")) m.standardisation.response.push_back({s[0].get<double>(), s[1].get<double>()});
            for (const auto& node : st.at("features")) {
                std::vector<SeriesStats> row;
                for (const auto& s : node) row.push_back({s[0].get<double>(), s[1].get<double>()});
                m.standardisation.features.push_back(std::move(row));
            }
        }
        if (j.contains("network")) {
            std::vector<Edge> edges;
            for (const auto& e : j.at("network").at("edges")) edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
            m.network = Network(m.n_nodes, std::move(edges));
        }
        if (j.contains("train_range")) {
            m.train_start = j.at("train_range")[0].get<std::string>();
            m.train_end = j.at("train_range")[1].get<std::string>();
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("fitted model JSON: ") + e.what());
    }
}

}  // namespace volnet
