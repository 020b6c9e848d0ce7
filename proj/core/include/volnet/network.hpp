#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace volnet {

using Edge = std::pair<std::size_t, std::size_t>;  // always first < second

/// Undirected simple graph on nodes 0..n-1.
class Network {
public:
    Network() = default;

    /// Edges may be given in either orientation; duplicates collapse. Self-loops
    /// and out-of-range endpoints throw InputError.
    Network(std::size_t n_nodes, std::vector<Edge> edges);

    std::size_t n_nodes() const { return n_nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }  // sorted
    const std::vector<std::size_t>& neighbours(std::size_t i) const { return adjacency_[i]; }
    bool has_edge(std::size_t i, std::size_t j) const;

    friend bool operator==(const Network& a, const Network& b) {
        return a.n_nodes_ == b.n_nodes_ && a.edges_ == b.edges_;
    }

private:
    std::size_t n_nodes_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> adjacency_;
};

/// Nodes at one neighbourhood stage, with the uniform weight 1/|stage|.
struct Stage {
    std::vector<std::size_t> nodes;  // sorted
    double weight = 0.0;             // 0 when nodes is empty
};

/// stages[i][r-1] is the stage-r neighbour set of node i.
struct NeighborStages {
    std::size_t r_max = 0;
    std::vector<std::vector<Stage>> stages;

    const Stage& at(std::size_t node, std::size_t r) const { return stages[node][r - 1]; }
};

Network fully_connected(std::size_t n);

/// Stage r of node i holds the nodes at shortest-path distance exactly r.
NeighborStages neighbor_stages(const Network& net, std::size_t r_max);

/// |E_a ∩ E_b| / |E_a ∪ E_b|, with J(empty, empty) = 1.
double jaccard(const Network& a, const Network& b);

inline std::size_t edge_count(const Network& net) { return net.edges().size(); }

/// A network together with the node labels its indices refer to.
struct LabelledNetwork {
    std::vector<std::string> nodes;
    Network network;
};

// {"nodes":[labels...],"edges":[[i,j],...]} with i<j
std::string to_json(const LabelledNetwork& net);
LabelledNetwork network_from_json(const std::string& text);
void write_network_json(const std::filesystem::path& path, const LabelledNetwork& net);
LabelledNetwork read_network_json(const std::filesystem::path& path);

}  // namespace volnet
