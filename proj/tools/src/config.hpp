#pragma once

#include "volnet/model.hpp"
#include "volnet/network.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace volnet::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Flag values shared by every command; unset flags fall back to the config file.
struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string networks;  // network-stats only
};

struct Config {
    json doc = json::object();
    fs::path file;  // empty when no config was given
    fs::path base;  // directory relative paths are resolved against

    bool has(const std::string& key) const { return doc.contains(key) && !doc.at(key).is_null(); }
};

/// Parses the JSON config. Throws InputError when unreadable or not an object.
Config load_config(const std::string& path);

/// `p` relative to the config directory (absolute paths pass through).
fs::path resolve(const Config& cfg, const std::string& p);

/// --out, else the config's "out" (relative to the config); InputError when neither is set.
fs::path output_dir(const Config& cfg, const Options& opts);

std::size_t thread_count(const Config& cfg, const Options& opts);

std::string get_string(const json& j, const std::string& key);
std::size_t get_size(const json& j, const std::string& key, std::size_t fallback);
double get_double(const json& j, const std::string& key, double fallback);

/// "fully_connected" / "empty" or {"edges": [[a, b], ...]} with indices or node labels.
Network parse_network(const json& j, std::size_t n, const std::vector<std::string>& node_ids);

/// `p` relative to the config directory when possible, for location-independent echoes.
std::string display_path(const Config& cfg, const fs::path& p);

/// Writes the config with flag overrides applied to <dir>/resolved_config.json.
void echo_config(const fs::path& dir, const Config& cfg, const Options& opts, json resolved);

}  // namespace volnet::cli
