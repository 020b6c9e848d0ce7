#include "volnet/network.hpp"

#include "volnet/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

namespace volnet {

Network::Network(std::size_t n_nodes, std::vector<Edge> edges) : n_nodes_(n_nodes) {
    for (auto& e : edges) {
        if (e.first == e.second) {
            throw InputError("self-loop on node " + std::to_string(e.first));
        }
        if (e.first >= n_nodes || e.second >= n_nodes) {
            std::ostringstream msg;
            msg << "edge (" << e.first << "," << e.second << ") out of range for " << n_nodes << " nodes";
            throw InputError(msg.str());
        }
        if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);

    adjacency_.assign(n_nodes, {});
    for (const auto& [i, j] : edges_) {
        adjacency_[i].push_back(j);
        adjacency_[j].push_back(i);
    }
    for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

bool Network::has_edge(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
}

Network fully_connected(std::size_t n) {
    if (n == 0) throw InputError("a network needs at least one node");
    std::vector<Edge> edges;
    edges.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    }
    return Network(n, std::move(edges));
}

NeighborStages neighbor_stages(const Network& net, std::size_t r_max) {
    const std::size_t n = net.n_nodes();
    NeighborStages out;
    out.r_max = r_max;
    out.stages.assign(n, std::vector<Stage>(r_max));

    std::vector<char> reached(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(reached.begin(), reached.end(), 0);
        reached[i] = 1;
        // N^(r)(i) = N(N^(r-1)(i)) minus i and all earlier stages; N^(0)(i) = {i}
        std::vector<std::size_t> frontier{i};
        for (std::size_t r = 1; r <= r_max; ++r) {
            std::vector<std::size_t> next;
            for (std::size_t u : frontier) {
                for (std::size_t v : net.neighbours(u)) {
                    if (!reached[v]) {
                        reached[v] = 1;
                        next.push_back(v);
                    }
                }
            }
            std::sort(next.begin(), next.end());
            Stage& stage = out.stages[i][r - 1];
            stage.weight = next.empty() ? 0.0 : 1.0 / static_cast<double>(next.size());
            stage.nodes = next;
            frontier = std::move(next);
        }
    }
    return out;
}

double jaccard(const Network& a, const Network& b) {
    if (a.n_nodes() != b.n_nodes()) {
        throw InputError("jaccard: node counts differ (" + std::to_string(a.n_nodes()) + " vs " +
                         std::to_string(b.n_nodes()) + ")");
    }
    std::vector<Edge> both;
    std::set_intersection(a.edges().begin(), a.edges().end(), b.edges().begin(), b.edges().end(),
                          std::back_inserter(both));
    const std::size_t uni = a.edges().size() + b.edges().size() - both.size();
    if (uni == 0) return 1.0;
    return static_cast<double>(both.size()) / static_cast<double>(uni);
}

std::string to_json(const LabelledNetwork& net) {
    nlohmann::ordered_json j;
    j["nodes"] = net.nodes;
    auto edges = nlohmann::ordered_json::array();
    for (const auto& [a, b] : net.network.edges()) edges.push_back({a, b});
    j["edges"] = std::move(edges);
    return j.dump();
}

LabelledNetwork network_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("network JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("nodes") || !j.contains("edges")) {
        throw InputError("network JSON must have 'nodes' and 'edges'");
    }
    LabelledNetwork out;
    try {
        out.nodes = j.at("nodes").get<std::vector<std::string>>();
        std::vector<Edge> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw InputError("network JSON: each edge must be [i,j]");
            const auto a = e[0].get<std::size_t>();
            const auto b = e[1].get<std::size_t>();
            if (a >= b) throw InputError("network JSON: edges must satisfy i<j");
            edges.emplace_back(a, b);
        }
        out.network = Network(out.nodes.size(), std::move(edges));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("network JSON: ") + e.what());
    }
    return out;
}

void write_network_json(const std::filesystem::path& path, const LabelledNetwork& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json(net) << '\n';
}

LabelledNetwork read_network_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return network_from_json(buf.str());
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace volnet
