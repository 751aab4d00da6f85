#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "stmap/area_graph.hpp"
#include "stmap/simulator.hpp"

using namespace stmap;

namespace {

// union-find oracle for connected components
int component_count_oracle(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    int comps = n;
    for (const auto& [u, v] : edges) {
        int ru = find(u), rv = find(v);
        if (ru != rv) {
            parent[ru] = rv;
            --comps;
        }
    }
    return comps;
}

// closure oracle via boolean adjacency-matrix powers
std::set<int> closure_oracle(const AreaGraph& g, const std::set<int>& seed, int k) {
    Eigen::MatrixXi adj = Eigen::MatrixXi::Identity(g.n_areas, g.n_areas);
    for (const auto& [u, v] : g.edges) {
        adj(u, v) = 1;
        adj(v, u) = 1;
    }
    Eigen::MatrixXi reach = Eigen::MatrixXi::Identity(g.n_areas, g.n_areas);
    for (int step = 0; step < k; ++step) reach = (reach * adj).cwiseMin(1);
    std::set<int> out;
    for (int s : seed)
        for (int j = 0; j < g.n_areas; ++j)
            if (reach(s, j) > 0) out.insert(j);
    return out;
}

}  // namespace

TEST(AreaGraph, DeduplicatesAndOrientsEdges) {
    auto g = load_graph({{"a", "b"}, {"b", "a"}, {"b", "c"}}, {"a", "b", "c"});
    ASSERT_EQ(g.edges.size(), 2u);
    EXPECT_EQ(g.edges[0], std::make_pair(0, 1));
    EXPECT_EQ(g.edges[1], std::make_pair(1, 2));
    EXPECT_EQ(g.n_components, 1);
}

TEST(AreaGraph, InputErrors) {
    EXPECT_THROW(load_graph({{"a", "zz"}}, {"a", "b"}), InputError);
    EXPECT_THROW(load_graph({}, {"a", "a"}), InputError);
    EXPECT_THROW(load_graph({{"a", "a"}}, {"a"}), InputError);
    auto g = load_graph({}, {"a"});
    EXPECT_THROW(g.index_of("missing"), InputError);
}

TEST(AreaGraph, ComponentsMatchUnionFindOracle) {
    RngStream rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 5 + static_cast<int>(rng.uniform() * 25);
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back("v" + std::to_string(i));
        std::vector<std::pair<std::string, std::string>> edges;
        std::vector<std::pair<int, int>> iedges;
        for (int e = 0; e < n; ++e) {
            int u = static_cast<int>(rng.uniform() * n);
            int v = static_cast<int>(rng.uniform() * n);
            if (u == v) continue;
            edges.emplace_back(ids[u], ids[v]);
            iedges.emplace_back(u, v);
        }
        auto g = load_graph(edges, ids);
        EXPECT_EQ(g.n_components, component_count_oracle(n, iedges));
    }
}

TEST(AreaGraph, ClosureMatchesMatrixPowerOracle) {
    auto g = make_lattice(5, 6);
    RngStream rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        std::set<int> seed;
        for (int i = 0; i < g.n_areas; ++i)
            if (rng.uniform() < 0.15) seed.insert(i);
        if (seed.empty()) seed.insert(0);
        for (int k = 0; k <= 4; ++k)
            EXPECT_EQ(k_order_closure(g, seed, k), closure_oracle(g, seed, k)) << "k=" << k;
    }
}

TEST(AreaGraph, ClosureMonotoneInK) {
    auto g = make_lattice(6, 6);
    std::set<int> seed = {0, 17};
    auto prev = k_order_closure(g, seed, 0);
    EXPECT_EQ(prev, seed);
    for (int k = 1; k <= 6; ++k) {
        auto cur = k_order_closure(g, seed, k);
        EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        prev = cur;
    }
    // lattice diameter reached: closure saturates at the full graph
    EXPECT_EQ(static_cast<int>(k_order_closure(g, seed, 20).size()), g.n_areas);
}

TEST(AreaGraph, InducedSubgraphKeepsInternalEdgesOnly) {
    auto g = make_lattice(3, 3);
    std::vector<int> keep = {0, 1, 3, 8};
    auto sub = induced_subgraph(g, keep);
    ASSERT_EQ(sub.n_areas, 4);
    // edges among {r0c0, r0c1, r1c0}: (0,1) and (0,3); r2c2 isolated
    EXPECT_EQ(sub.edges.size(), 2u);
    EXPECT_EQ(sub.n_components, 2);
    EXPECT_EQ(sub.area_ids[3], "r2c2");
}

TEST(AreaGraph, UrbanicityThresholds) {
    EXPECT_EQ(classify_urbanicity(1000000.0), Urbanicity::Large);
    EXPECT_EQ(classify_urbanicity(999999.0), Urbanicity::Medium);
    EXPECT_EQ(classify_urbanicity(50000.0), Urbanicity::Medium);
    EXPECT_EQ(classify_urbanicity(49999.0), Urbanicity::Rural);
}

TEST(AreaGraph, RegionRoundTrip) {
    for (Region r : {Region::West, Region::Midwest, Region::South, Region::Northeast})
        EXPECT_EQ(parse_region(region_name(r)), r);
    EXPECT_THROW(parse_region("Atlantis"), InputError);
}
