#pragma once

#include <algorithm>
#include <deque>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stmap/errors.hpp"

namespace stmap {

// Undirected adjacency over areal units. Immutable after construction;
// safe for concurrent reads.
struct AreaGraph {
    int n_areas = 0;
    std::vector<std::pair<int, int>> edges;  // deduplicated, first < second
    std::vector<int> component_label;        // per area, 0-based
    int n_components = 0;
    std::vector<std::vector<int>> adjacency;  // sorted neighbor lists
    std::vector<std::string> area_ids;
    std::unordered_map<std::string, int> id_index;

    int index_of(const std::string& id) const {
        auto it = id_index.find(id);
        if (it == id_index.end()) throw InputError("unknown area id: " + id);
        return it->second;
    }
};

enum class Region { West, Midwest, South, Northeast };
enum class Urbanicity { Large, Medium, Rural };

inline Region parse_region(const std::string& s) {
    if (s == "West") return Region::West;
    if (s == "Midwest") return Region::Midwest;
    if (s == "South") return Region::South;
    if (s == "Northeast") return Region::Northeast;
    throw InputError("unknown region: " + s);
}

inline std::string region_name(Region r) {
    switch (r) {
        case Region::West: return "West";
        case Region::Midwest: return "Midwest";
        case Region::South: return "South";
        default: return "Northeast";
    }
}

// Population thresholds: Large >= 1,000,000; Medium in [50,000, 999,999];
// Rural < 50,000, evaluated on a configurable reference year.
inline Urbanicity classify_urbanicity(double population) {
    if (population >= 1000000.0) return Urbanicity::Large;
    if (population >= 50000.0) return Urbanicity::Medium;
    return Urbanicity::Rural;
}

inline std::string urbanicity_name(Urbanicity u) {
    switch (u) {
        case Urbanicity::Large: return "Large";
        case Urbanicity::Medium: return "Medium";
        default: return "Rural";
    }
}

struct AreaMeta {
    std::string area_id;
    std::string state_code;
    Region region = Region::West;
    Urbanicity urbanicity = Urbanicity::Rural;
};

namespace detail {

inline void label_components(AreaGraph& g) {
    g.component_label.assign(g.n_areas, -1);
    g.n_components = 0;
    std::deque<int> queue;
    for (int start = 0; start < g.n_areas; ++start) {
        if (g.component_label[start] >= 0) continue;
        int label = g.n_components++;
        g.component_label[start] = label;
        queue.push_back(start);
        while (!queue.empty()) {
            int v = queue.front();
            queue.pop_front();
            for (int w : g.adjacency[v]) {
                if (g.component_label[w] < 0) {
                    g.component_label[w] = label;
                    queue.push_back(w);
                }
            }
        }
    }
}

}  // namespace detail

inline AreaGraph load_graph(const std::vector<std::pair<std::string, std::string>>& edge_list,
                            const std::vector<std::string>& area_ids) {
    AreaGraph g;
    g.n_areas = static_cast<int>(area_ids.size());
    g.area_ids = area_ids;
    for (int i = 0; i < g.n_areas; ++i) {
        if (!g.id_index.emplace(area_ids[i], i).second)
            throw InputError("duplicate area id: " + area_ids[i]);
    }
    std::set<std::pair<int, int>> unique_edges;
    for (const auto& [a, b] : edge_list) {
        auto ia = g.id_index.find(a);
        if (ia == g.id_index.end()) throw InputError("edge references unknown area id: " + a);
        auto ib = g.id_index.find(b);
        if (ib == g.id_index.end()) throw InputError("edge references unknown area id: " + b);
        int u = ia->second, v = ib->second;
        if (u == v) throw InputError("self-loop edge on area id: " + a);
        unique_edges.emplace(std::min(u, v), std::max(u, v));
    }
    g.edges.assign(unique_edges.begin(), unique_edges.end());
    g.adjacency.assign(g.n_areas, {});
    for (const auto& [u, v] : g.edges) {
        g.adjacency[u].push_back(v);
        g.adjacency[v].push_back(u);
    }
    for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
    detail::label_components(g);
    return g;
}

// Induced subgraph on the given (sorted or unsorted) index set.
// Returns the subgraph and the old->position map implied by `keep` order.
inline AreaGraph induced_subgraph(const AreaGraph& g, const std::vector<int>& keep) {
    std::unordered_map<int, int> pos;
    std::vector<std::string> ids;
    ids.reserve(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        pos.emplace(keep[k], static_cast<int>(k));
        ids.push_back(g.area_ids[keep[k]]);
    }
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& [u, v] : g.edges) {
        auto iu = pos.find(u), iv = pos.find(v);
        if (iu != pos.end() && iv != pos.end())
            edges.emplace_back(g.area_ids[u], g.area_ids[v]);
    }
    return load_graph(edges, ids);
}

// seed plus everything within graph distance <= k of any seed member.
inline std::set<int> k_order_closure(const AreaGraph& g, const std::set<int>& seed, int k) {
    for (int s : seed)
        if (s < 0 || s >= g.n_areas) throw InputError("k_order_closure: seed index out of range");
    std::set<int> result = seed;
    std::vector<int> frontier(seed.begin(), seed.end());
    for (int step = 0; step < k && !frontier.empty(); ++step) {
        std::vector<int> next;
        for (int v : frontier) {
            for (int w : g.adjacency[v]) {
                if (result.insert(w).second) next.push_back(w);
            }
        }
        frontier = std::move(next);
    }
    return result;
}

inline std::vector<int> degree(const AreaGraph& g) {
    std::vector<int> deg(g.n_areas, 0);
    for (const auto& [u, v] : g.edges) {
        ++deg[u];
        ++deg[v];
    }
    return deg;
}

}  // namespace stmap
