#include "volnet_cli/cli.hpp"

#include "config.hpp"

#include "volnet/csv.hpp"
#include "volnet/error.hpp"
#include "volnet/eval.hpp"
#include "volnet/forecast.hpp"
#include "volnet/panel.hpp"
#include "volnet/sim.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <regex>
#include <set>

namespace volnet::cli {
namespace {

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    f << j.dump(2) << '\n';
    if (!f) throw InputError("cannot write " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- ingest

int cmd_ingest(const Options& opts, std::ostream& out) {
    const Config cfg = load_config(opts.config);
    const fs::path dir = output_dir(cfg, opts);

    json inputs = json::object();
    auto load = [&](const std::string& key) {
        const fs::path p = resolve(cfg, get_string(cfg.doc, key));
        csv::PanelReadReport rep;
        auto panel = csv::read_panel(p, &rep);
        inputs[key] = {{"path", display_path(cfg, p)},
                       {"rows", rep.rows_read},
                       {"incomplete_dates", rep.incomplete_dates}};
        return panel;
    };

    NamedPanels panels;
    if (cfg.has("rv") == cfg.has("log_rv")) throw InputError("ingest needs exactly one of \"rv\" and \"log_rv\"");
    panels["log_rv"] = cfg.has("rv") ? log_transform(load("rv")) : load("log_rv");
    if (cfg.has("returns")) {
        auto r = load("returns");
        auto [good, bad] = split_returns(r);
        panels["returns"] = std::move(r);
        panels["good"] = std::move(good);
        panels["bad"] = std::move(bad);
    }
    if (cfg.has("opens") != cfg.has("closes")) throw InputError("\"opens\" and \"closes\" must be given together");
    if (cfg.has("opens")) {
        const auto oc = align({{"closes", load("closes")}, {"opens", load("opens")}});
        panels["on"] = overnight_returns(oc.panels.at("opens"), oc.panels.at("closes"));
    }
    if (cfg.has("iv")) panels["iv"] = load("iv");
    if (cfg.has("exog")) {
        for (const auto& [name, path] : cfg.doc.at("exog").items()) {
            if (panels.count(name)) throw InputError("exogenous name '" + name + "' clashes with a derived panel");
            const fs::path p = resolve(cfg, path.get<std::string>());
            csv::PanelReadReport rep;
            panels[name] = csv::read_panel(p, &rep);
            inputs[name] = {{"path", display_path(cfg, p)}, {"rows", rep.rows_read}, {"incomplete_dates", rep.incomplete_dates}};
        }
    }

    // align() orders nodes like the first panel by name; make that the response
    NamedPanels keyed;
    for (auto& [name, p] : panels) keyed[name == "log_rv" ? std::string() : name] = std::move(p);
    auto aligned = align(keyed);

    fs::create_directories(dir);
    json written = json::array();
    for (const auto& [key, p] : aligned.panels) {
        const std::string name = key.empty() ? "log_rv" : key;
        csv::write_panel(dir / (name + ".csv"), p);
        written.push_back(name + ".csv");
    }
    const auto& y = aligned.panels.at("");
    json report = json::object();
    report["inputs"] = inputs;
    report["nodes"] = y.node_ids();
    report["dates"] = y.n_dates();
    report["first_date"] = y.dates().front();
    report["last_date"] = y.dates().back();
    report["dropped_dates"] = aligned.dropped_dates;
    report["panels"] = written;
    write_json(dir / "alignment_report.json", report);
    echo_config(dir, cfg, opts, {{"out", display_path(cfg, dir)}});

    out << "aligned " << y.n_nodes() << " nodes on " << y.n_dates() << " dates (" << y.dates().front() << " .. "
        << y.dates().back() << "), dropped " << aligned.dropped_dates << " dates\n";
    for (const auto& [name, info] : inputs.items()) {
        out << "  " << name << ": " << info.at("rows").get<std::size_t>() << " rows, "
            << info.at("incomplete_dates").size() << " incomplete\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Options& opts, std::ostream& out) {
    const Config cfg = load_config(opts.config);
    const fs::path dir = output_dir(cfg, opts);
    const json& j = cfg.doc;

    SimSpec spec;
    spec.n_nodes = get_size(j, "n_nodes", 0);
    spec.length = get_size(j, "length", 0);
    spec.burn_in = get_size(j, "burn_in", spec.burn_in);
    spec.seed = opts.seed ? *opts.seed : static_cast<std::uint64_t>(get_size(j, "seed", 0));
    spec.offset = get_double(j, "offset", 0.0);
    if (cfg.has("start_date")) spec.start_date = get_string(j, "start_date");
    if (cfg.has("node_ids")) spec.node_ids = j.at("node_ids").get<std::vector<std::string>>();
    if (spec.n_nodes == 0 || spec.length == 0) throw InputError("simulate needs positive \"n_nodes\" and \"length\"");

    const auto ids = spec.node_ids.empty() ? default_node_ids(spec.n_nodes) : spec.node_ids;
    spec.network = parse_network(cfg.has("network") ? j.at("network") : json("fully_connected"), spec.n_nodes, ids);
    spec.model = spec_from_json(cfg.has("model") ? j.at("model").dump() : "{}");

    const auto keys = coefficient_keys(spec.model, spec.n_nodes);
    if (!cfg.has("coefficients")) throw InputError("missing config key 'coefficients'");
    const json& coef = j.at("coefficients");
    spec.coefficients.resize(static_cast<Eigen::Index>(keys.size()));
    if (coef.is_array()) {
        if (coef.size() != keys.size()) {
            throw InputError("coefficients: expected " + std::to_string(keys.size()) + " values, got " +
                             std::to_string(coef.size()));
        }
        for (std::size_t k = 0; k < keys.size(); ++k) spec.coefficients(static_cast<Eigen::Index>(k)) = coef[k].get<double>();
    } else {
        std::set<std::string> used;
        for (std::size_t k = 0; k < keys.size(); ++k) {
            const std::string name = key_string(keys[k], ids);
            // per-node keys fall back to the bare term, so one value can fill a whole block
            const std::string key = coef.contains(name) ? name : keys[k].term;
            if (!coef.contains(key)) throw InputError("coefficients: missing '" + name + "'");
            spec.coefficients(static_cast<Eigen::Index>(k)) = coef.at(key).get<double>();
            used.insert(key);
        }
        for (const auto& [k, v] : coef.items()) {
            if (!used.count(k)) throw InputError("coefficients: unknown key '" + k + "'");
        }
    }

    const json noise = cfg.has("noise_std") ? j.at("noise_std") : json(1.0);
    if (noise.is_array()) {
        spec.noise_std = noise.get<std::vector<double>>();
    } else {
        spec.noise_std.assign(spec.n_nodes, noise.get<double>());
    }
    if (cfg.has("exog")) {
        for (const auto& [name, g] : j.at("exog").items()) {
            spec.exog[name] = ExogGenerator{get_double(g, "phi", 0.0), get_double(g, "noise_std", 1.0)};
        }
    }
    if (cfg.has("returns")) {
        const json& r = j.at("returns");
        ReturnsGenerator gen;
        gen.coupling = get_double(r, "coupling", gen.coupling);
        gen.diagonal = get_double(r, "diagonal", gen.diagonal);
        gen.network = parse_network(r.contains("network") ? r.at("network") : json("empty"), spec.n_nodes, ids);
        spec.returns = std::move(gen);
    }

    const SimOutput sim = simulate(spec);

    fs::create_directories(dir);
    csv::write_panel(dir / "log_rv.csv", sim.log_rv);
    for (const auto& [name, p] : sim.exog) csv::write_panel(dir / (name + ".csv"), p);
    if (sim.returns) csv::write_panel(dir / "returns.csv", *sim.returns);

    json truth = json::object();
    truth["model"] = json::parse(spec_to_json(spec.model));
    json values = json::object();
    for (std::size_t k = 0; k < keys.size(); ++k) {
        values[key_string(keys[k], sim.log_rv.node_ids())] = spec.coefficients(static_cast<Eigen::Index>(k));
    }
    truth["coefficients"] = std::move(values);
    json edges = json::array();
    for (const auto& [a, b] : spec.network.edges()) edges.push_back({a, b});
    truth["network"] = {{"nodes", sim.log_rv.node_ids()}, {"edges", edges}};
    write_json(dir / "truth.json", truth);
    echo_config(dir, cfg, opts, {{"out", display_path(cfg, dir)}, {"seed", spec.seed}});

    out << "simulated " << spec.n_nodes << " nodes x " << spec.length << " dates (seed " << spec.seed << ") into "
        << dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- backtest

struct ModelEntry {
    std::string label;
    ModelSpec spec;
    NetworkMode mode = NetworkMode::fully_connected;
};

std::vector<ModelEntry> parse_models(const Config& cfg) {
    if (!cfg.has("models") || !cfg.doc.at("models").is_array() || cfg.doc.at("models").empty()) {
        throw InputError("backtest needs a nonempty \"models\" array");
    }
    static const std::regex safe("[A-Za-z0-9_.+-]+");
    std::vector<ModelEntry> models;
    std::set<std::string> labels;
    for (const auto& m : cfg.doc.at("models")) {
        ModelEntry e;
        e.label = get_string(m, "label");
        if (!std::regex_match(e.label, safe) || e.label == "." || e.label == "..") {
            throw InputError("model label '" + e.label + "' must use only letters, digits and _.+-");
        }
        if (!labels.insert(e.label).second) throw InputError("duplicate model label '" + e.label + "'");
        e.spec = spec_from_json(m.dump());
        e.mode = parse_network_mode(m.contains("network") ? get_string(m, "network") : "fully_connected");
        models.push_back(std::move(e));
    }
    return models;
}

RollingConfig parse_rolling(const Config& cfg) {
    RollingConfig rc;
    if (!cfg.has("rolling")) return rc;
    const json& r = cfg.doc.at("rolling");
    rc.initial_window = get_size(r, "initial_window", rc.initial_window);
    rc.refit_window = get_size(r, "refit_window", rc.refit_window);
    rc.block = get_size(r, "block", rc.block);
    rc.cv_folds = get_size(r, "cv_folds", rc.cv_folds);
    if (r.contains("glasso_rho") && !r.at("glasso_rho").is_null()) rc.glasso_rho = get_double(r, "glasso_rho", 0.0);
    rc.glasso.tol = get_double(r, "glasso_tol", rc.glasso.tol);
    rc.glasso.max_iter = static_cast<int>(get_size(r, "glasso_max_iter", static_cast<std::size_t>(rc.glasso.max_iter)));
    rc.zero_tol = get_double(r, "zero_tol", rc.zero_tol);
    return rc;
}

std::vector<std::string> exog_names(const ModelSpec& spec) {
    std::vector<std::string> names;
    for (const auto& t : spec.exog) names.push_back(t.name);
    return names;
}

int cmd_backtest(const Options& opts, std::ostream& out) {
    const Config cfg = load_config(opts.config);
    const fs::path dir = output_dir(cfg, opts);
    const std::size_t threads = thread_count(cfg, opts);
    const auto models = parse_models(cfg);
    RollingConfig base_rc = parse_rolling(cfg);
    for (const auto& m : models) {
        RollingConfig rc = base_rc;
        rc.network_mode = m.mode;
        rc.validate(m.spec);
    }

    if (!cfg.has("data")) throw InputError("missing config key 'data'");
    const json& data = cfg.doc.at("data");
    NamedPanels panels;
    panels[""] = csv::read_panel(resolve(cfg, get_string(data, "log_rv")));
    bool need_returns = false;
    std::set<std::string> needed;
    for (const auto& m : models) {
        need_returns = need_returns || m.mode == NetworkMode::graphical_lasso;
        for (const auto& t : m.spec.exog) needed.insert(t.name);
    }
    if (need_returns) panels["returns"] = csv::read_panel(resolve(cfg, get_string(data, "returns")));
    for (const auto& name : needed) {
        if (!data.contains("exog") || !data.at("exog").contains(name)) {
            throw InputError("no data path for exogenous series '" + name + "'");
        }
        panels["x:" + name] = csv::read_panel(resolve(cfg, data.at("exog").at(name).get<std::string>()));
    }
    const auto aligned = align(panels);
    const TimeSeriesPanel& log_rv = aligned.panels.at("");
    const TimeSeriesPanel returns = need_returns ? aligned.panels.at("returns") : TimeSeriesPanel{};
    NamedPanels exog;
    for (const auto& name : needed) exog[name] = aligned.panels.at("x:" + name);
    if (aligned.dropped_dates > 0) out << "dropped " << aligned.dropped_dates << " dates not present in every input\n";

    fs::create_directories(dir);
    std::vector<ModelRun> runs;
    json summary = json::array();
    for (const auto& m : models) {
        RollingConfig rc = base_rc;
        rc.network_mode = m.mode;
        const auto res = run_backtest(log_rv, exog, returns, m.spec, rc, threads);

        // assemble in a staging directory, then move into place
        const fs::path final_dir = dir / m.label;
        const fs::path stage = dir / (m.label + ".partial");
        fs::remove_all(stage);
        fs::create_directories(stage);
        write_forecasts_csv(stage / "forecasts.csv", res);
        write_coefficients_csv(stage / "coefficients.csv", res);
        write_residual_var_csv(stage / "residual_var.csv", res);
        write_network_trajectory(stage / "networks", res);

        json meta = json::object();
        meta["label"] = m.label;
        meta["variant"] = std::string(to_string(m.spec.variant));
        meta["network"] = std::string(to_string(m.mode));
        meta["spec"] = json::parse(spec_to_json(m.spec));
        meta["n_params"] = res.n_params;
        meta["rho"] = res.rho ? json(*res.rho) : json(nullptr);
        meta["refits"] = res.refits.size();
        meta["forecast_dates"] = res.forecasts.n_dates();
        meta["first_forecast"] = res.forecasts.dates().front();
        meta["last_forecast"] = res.forecasts.dates().back();
        json deficient = json::array();
        json unconverged = json::array();
        for (const auto& r : res.refits) {
            if (r.rank_deficient) deficient.push_back(r.refit_date);
            if (!r.glasso_converged) unconverged.push_back(r.refit_date);
        }
        meta["rank_deficient_refits"] = deficient;
        meta["glasso_unconverged_refits"] = unconverged;
        write_json(stage / "meta.json", meta);
        fs::remove_all(final_dir);
        fs::rename(stage, final_dir);

        runs.push_back(ModelRun{m.label, meta["variant"], meta["network"], exog_names(m.spec), res.actuals,
                                res.forecasts, res.n_params});
        summary.push_back(m.label);
        out << m.label << ": " << res.forecasts.n_dates() << " forecasts, " << res.refits.size() << " refits";
        if (!deficient.empty()) out << ", " << deficient.size() << " rank-deficient";
        if (!unconverged.empty()) out << ", " << unconverged.size() << " glasso unconverged";
        out << '\n';
    }
    const auto table = rank_models(runs);
    write_ranking_csv(dir / "ranking.csv", table);

    json resolved = json::object();
    resolved["out"] = display_path(cfg, dir);
    resolved["threads"] = threads;
    resolved["rolling"] = {{"initial_window", base_rc.initial_window},
                           {"refit_window", base_rc.refit_window},
                           {"block", base_rc.block},
                           {"cv_folds", base_rc.cv_folds},
                           {"glasso_rho", base_rc.glasso_rho ? json(*base_rc.glasso_rho) : json(nullptr)}};
    resolved["models"] = summary;
    echo_config(dir, cfg, opts, resolved);

    for (const auto& row : table) out << "  " << row.label << " qlike=" << csv::format_double(row.qlike) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const Options& opts, std::ostream& out) {
    const Config cfg = load_config(opts.config);
    const fs::path dir = output_dir(cfg, opts);

    std::vector<ModelRun> runs;
    auto add_run = [&](const fs::path& forecasts, const json& meta, const std::string& fallback_label) {
        auto [actual, forecast] = read_forecasts_csv(forecasts);
        ModelRun r;
        r.label = meta.contains("label") ? meta.at("label").get<std::string>() : fallback_label;
        r.variant = meta.value("variant", "");
        r.network = meta.value("network", "");
        if (meta.contains("spec")) {
            for (const auto& t : spec_from_json(meta.at("spec").dump()).exog) r.exog.push_back(t.name);
        } else if (meta.contains("exog")) {
            r.exog = meta.at("exog").get<std::vector<std::string>>();
        }
        r.n_params = meta.value("n_params", std::size_t{0});
        r.actuals = std::move(actual);
        r.forecasts = std::move(forecast);
        runs.push_back(std::move(r));
    };

    if (cfg.has("results")) {
        const fs::path results = resolve(cfg, get_string(cfg.doc, "results"));
        if (!fs::is_directory(results)) throw InputError("results directory '" + results.string() + "' not found");
        std::vector<fs::path> subdirs;
        for (const auto& e : fs::directory_iterator(results)) {
            if (e.is_directory() && fs::exists(e.path() / "forecasts.csv")) subdirs.push_back(e.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& d : subdirs) {
            const json meta = fs::exists(d / "meta.json") ? read_json(d / "meta.json") : json::object();
            add_run(d / "forecasts.csv", meta, d.filename().string());
        }
    } else if (cfg.has("runs")) {
        for (const auto& r : cfg.doc.at("runs")) add_run(resolve(cfg, get_string(r, "forecasts")), r, "");
    } else {
        throw InputError("evaluate needs \"results\" (a backtest output directory) or \"runs\"");
    }
    if (runs.empty()) throw InputError("no forecasts found to evaluate");

    const auto table = rank_models(runs);
    fs::create_directories(dir);
    write_ranking_csv(dir / "ranking.csv", table);
    std::ofstream nodes(dir / "losses_by_node.csv");
    nodes << "model,node,qlike,mse\n";
    for (const auto& row : table) {
        for (const auto& [node, loss] : row.per_node) {
            nodes << row.label << ',' << node << ',' << csv::format_double(loss.qlike) << ','
                  << csv::format_double(loss.mse) << '\n';
        }
    }
    if (!nodes) throw InputError("cannot write " + (dir / "losses_by_node.csv").string());
    echo_config(dir, cfg, opts, {{"out", display_path(cfg, dir)}, {"models", runs.size()}});
    for (const auto& row : table) {
        out << row.label << " qlike=" << csv::format_double(row.qlike) << " rel_qlike="
            << csv::format_double(row.rel_qlike) << " rel_mse=" << csv::format_double(row.rel_mse) << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------- network-stats

int cmd_network_stats(const Options& opts, std::ostream& out) {
    const Config cfg = load_config(opts.config);
    fs::path net_dir;
    if (!opts.networks.empty()) {
        net_dir = opts.networks;
    } else if (cfg.has("networks")) {
        net_dir = resolve(cfg, get_string(cfg.doc, "networks"));
    } else {
        throw InputError("network-stats needs --networks <dir> or \"networks\" in the config");
    }
    if (!fs::is_directory(net_dir)) throw InputError("network directory '" + net_dir.string() + "' not found");

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(net_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    if (files.empty()) throw InputError("no network files in '" + net_dir.string() + "'");
    std::sort(files.begin(), files.end());

    std::ostringstream csv_text;
    csv_text << "refit_date,edge_count,jaccard_vs_previous\n";
    std::optional<LabelledNetwork> prev;
    for (const auto& f : files) {
        LabelledNetwork net = read_network_json(f);
        csv_text << f.stem().string() << ',' << edge_count(net.network) << ',';
        if (prev) {
            if (prev->nodes != net.nodes) throw InputError(f.string() + ": node labels differ from the previous network");
            csv_text << csv::format_double(jaccard(prev->network, net.network));
        }
        csv_text << '\n';
        prev = std::move(net);
    }

    if (opts.out.empty() && !cfg.has("out")) {
        out << csv_text.str();
        return kExitOk;
    }
    const fs::path dir = output_dir(cfg, opts);
    fs::create_directories(dir);
    std::ofstream f(dir / "network_stats.csv");
    f << csv_text.str();
    if (!f) throw InputError("cannot write " + (dir / "network_stats.csv").string());
    out << files.size() << " networks summarised into " << (dir / "network_stats.csv").string() << '\n';
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"volnet: network HAR volatility forecasting"};
    app.require_subcommand(1);
    Options opts;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "JSON config file");
        sub->add_option("--out", opts.out, "output directory (overrides the config)");
        sub->add_option("--seed", opts.seed, "random seed (overrides the config)");
        sub->add_option("--threads", opts.threads, "worker threads, 0 = all cores");
    };
    auto* ingest = app.add_subcommand("ingest", "derive and align input panels");
    auto* sim = app.add_subcommand("simulate", "simulate a GNAR-HARX process");
    auto* backtest = app.add_subcommand("backtest", "rolling-window forecasts for configured models");
    auto* evaluate = app.add_subcommand("evaluate", "QLIKE / MSE ranking of forecast files");
    auto* netstats = app.add_subcommand("network-stats", "edge counts and Jaccard similarity of a network trajectory");
    for (auto* sub : {ingest, sim, backtest, evaluate, netstats}) add_common(sub);
    netstats->add_option("--networks", opts.networks, "directory of <date>.json network files");
    for (auto* sub : {ingest, sim, backtest, evaluate}) sub->get_option("--config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(opts, out);
        if (sim->parsed()) return cmd_simulate(opts, out);
        if (backtest->parsed()) return cmd_backtest(opts, out);
        if (evaluate->parsed()) return cmd_evaluate(opts, out);
        if (netstats->parsed()) return cmd_network_stats(opts, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const EstimationError& e) {
        err << "estimation error: " << e.what() << '\n';
        return kExitEstimation;
    } catch (const json::exception& e) {
        err << "error: config: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitEstimation;
    }
    return kExitInput;
}

}  // namespace volnet::cli
