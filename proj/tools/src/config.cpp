#include "config.hpp"

#include "volnet/error.hpp"

#include <fstream>
#include <sstream>
#include <thread>

namespace volnet::cli {

Config load_config(const std::string& path) {
    Config cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    try {
        cfg.doc = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("config '" + path + "' is not valid JSON: " + e.what());
    }
    if (!cfg.doc.is_object()) throw InputError("config '" + path + "' must be a JSON object");
    cfg.file = fs::absolute(path).lexically_normal();
    cfg.base = cfg.file.parent_path();
    return cfg;
}

fs::path resolve(const Config& cfg, const std::string& p) {
    const fs::path path(p);
    if (path.is_absolute() || cfg.base.empty()) return path.lexically_normal();
    return (cfg.base / path).lexically_normal();
}

fs::path output_dir(const Config& cfg, const Options& opts) {
    if (!opts.out.empty()) return fs::path(opts.out);
    if (cfg.has("out")) return resolve(cfg, get_string(cfg.doc, "out"));
    throw InputError("no output directory: pass --out or set \"out\" in the config");
}

std::size_t thread_count(const Config& cfg, const Options& opts) {
    std::size_t n = opts.threads ? *opts.threads : get_size(cfg.doc, "threads", 1);
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

std::string get_string(const json& j, const std::string& key) {
    if (!j.contains(key)) throw InputError("missing config key '" + key + "'");
    if (!j.at(key).is_string()) throw InputError("config key '" + key + "' must be a string");
    return j.at(key).get<std::string>();
}

std::size_t get_size(const json& j, const std::string& key, std::size_t fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    if (!j.at(key).is_number_unsigned()) throw InputError("config key '" + key + "' must be a nonnegative integer");
    return j.at(key).get<std::size_t>();
}

double get_double(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    if (!j.at(key).is_number()) throw InputError("config key '" + key + "' must be a number");
    return j.at(key).get<double>();
}

Network parse_network(const json& j, std::size_t n, const std::vector<std::string>& node_ids) {
    if (j.is_string()) {
        const auto kind = j.get<std::string>();
        if (kind == "fully_connected" || kind == "FC" || kind == "fc") return fully_connected(n);
        if (kind == "empty" || kind == "none") return Network(n, {});
        throw InputError("unknown network '" + kind + "'");
    }
    if (!j.is_object() || !j.contains("edges") || !j.at("edges").is_array()) {
        throw InputError("network must be \"fully_connected\", \"empty\" or {\"edges\": [...]}");
    }
    auto endpoint = [&](const json& e) -> std::size_t {
        if (e.is_number_unsigned()) return e.get<std::size_t>();
        if (e.is_string()) {
            const auto it = std::find(node_ids.begin(), node_ids.end(), e.get<std::string>());
            if (it == node_ids.end()) throw InputError("network edge names unknown node '" + e.get<std::string>() + "'");
            return static_cast<std::size_t>(it - node_ids.begin());
        }
        throw InputError("network edge endpoints must be node indices or labels");
    };
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw InputError("network edges must be pairs");
        edges.emplace_back(endpoint(e[0]), endpoint(e[1]));
    }
    return Network(n, std::move(edges));
}

std::string display_path(const Config& cfg, const fs::path& p) {
    if (cfg.base.empty() || !p.is_absolute()) return p.lexically_normal().generic_string();
    const fs::path rel = p.lexically_relative(cfg.base);
    return rel.empty() ? p.generic_string() : rel.generic_string();
}

void echo_config(const fs::path& dir, const Config& cfg, const Options& opts, json resolved) {
    json doc = cfg.doc;
    if (!opts.out.empty()) doc["out"] = opts.out;
    if (opts.seed) doc["seed"] = *opts.seed;
    if (opts.threads) doc["threads"] = *opts.threads;
    json top = json::object();
    top["config_file"] = cfg.file.filename().generic_string();
    top["config"] = std::move(doc);
    top["resolved"] = std::move(resolved);
    fs::create_directories(dir);
    std::ofstream f(dir / "resolved_config.json");
    f << top.dump(2) << '\n';
    if (!f) throw InputError("cannot write " + (dir / "resolved_config.json").string());
}

}  // namespace volnet::cli
