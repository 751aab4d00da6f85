#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stmap/area_graph.hpp"
#include "stmap/criteria.hpp"
#include "stmap/lgm_summaries.hpp"
#include "stmap/models.hpp"
#include "stmap/parallel.hpp"

namespace stmap {

struct Subdomain {
    std::string name;
    std::vector<int> owned;     // sorted area indices
    std::vector<int> extended;  // owned plus k-order border neighbors, sorted
};

struct PartitionPlan {
    std::vector<Subdomain> subdomains;  // sorted by name
    int k = 0;
    std::map<std::string, std::string> merge_map;
};

// Owned sets come from the (merged) subdomain labels; extended sets add
// k-order neighbors across subdomain borders.
inline PartitionPlan make_plan(const std::vector<std::string>& labels, const AreaGraph& graph,
                               const std::map<std::string, std::string>& merge_map, int k) {
    if (static_cast<int>(labels.size()) != graph.n_areas)
        throw PlanError("make_plan: one subdomain label per area required");
    if (k < 0) throw PlanError("make_plan: k must be non-negative");
    std::set<std::string> label_set(labels.begin(), labels.end());
    for (const auto& [from, to] : merge_map) {
        if (!label_set.count(from)) throw PlanError("merge map source label not present: " + from);
        if (!label_set.count(to)) throw PlanError("merge map target label not present: " + to);
    }
    auto resolve = [&](std::string l) {
        for (int depth = 0; depth < 64; ++depth) {
            auto it = merge_map.find(l);
            if (it == merge_map.end()) return l;
            l = it->second;
        }
        throw PlanError("merge map contains a cycle at label " + l);
    };
    std::map<std::string, std::vector<int>> groups;
    for (int i = 0; i < graph.n_areas; ++i) groups[resolve(labels[i])].push_back(i);
    PartitionPlan plan;
    plan.k = k;
    plan.merge_map = merge_map;
    for (auto& [name, owned] : groups) {
        if (owned.empty()) throw PlanError("empty subdomain after merging: " + name);
        Subdomain s;
        s.name = name;
        s.owned = owned;
        auto closure = k_order_closure(graph, std::set<int>(owned.begin(), owned.end()), k);
        s.extended.assign(closure.begin(), closure.end());
        plan.subdomains.push_back(std::move(s));
    }
    return plan;
}

struct MergedResult {
    int S = 0, T = 0;
    Eigen::ArrayXXd risk_q025, risk_q50, risk_q975;
    std::vector<std::string> subdomain_names;
    std::vector<FitResult> fits;   // per subdomain, extended-area indexing
    std::vector<int> owner;        // per area: subdomain index
    std::vector<int> local_index;  // per area: position in the owner's extended list

    double exceedance_probability(int i, int t, double threshold) const {
        return fits[owner[i]].exceedance_probability(local_index[i], t, threshold);
    }
};

struct PartitionFitOptions {
    SpatialPrior prior = SpatialPrior::ICAR;
    InteractionType interaction = InteractionType::II;
    std::uint64_t seed = 1;
    int workers = 1;
    ModelConfig model;
    FitOptions fit;
};

// Fit each subdomain on its extended induced subgraph; merged per-cell
// summaries always come from the subdomain that owns the area. Subdomain
// streams are seeded base + ordinal, so a single-subdomain plan reproduces
// the equally-seeded global fit exactly.
inline MergedResult fit_partitioned(const CountsPanel& panel, const PartitionPlan& plan,
                                    const AreaGraph& graph, const PartitionFitOptions& opts = {}) {
    if (panel.expected_mode != ExpectedMode::Global)
        throw InputError("fit_partitioned: global expected counts required");
    MergedResult merged;
    merged.S = panel.S;
    merged.T = panel.T;
    merged.risk_q025.resize(panel.S, panel.T);
    merged.risk_q50.resize(panel.S, panel.T);
    merged.risk_q975.resize(panel.S, panel.T);
    merged.owner.assign(panel.S, -1);
    merged.local_index.assign(panel.S, -1);
    merged.fits.resize(plan.subdomains.size());

    for (std::size_t s = 0; s < plan.subdomains.size(); ++s) {
        merged.subdomain_names.push_back(plan.subdomains[s].name);
        for (int i : plan.subdomains[s].extended)
            if (!panel.observed.row(i).all())
                throw PartitionError("fit_partitioned: subdomain " + plan.subdomains[s].name +
                                     " has missing counts; impute first");
    }

    parallel_for(plan.subdomains.size(), opts.workers, [&](std::size_t s) {
        const Subdomain& sub = plan.subdomains[s];
        AreaGraph subgraph = induced_subgraph(graph, sub.extended);
        CountsPanel sp = CountsPanel::zeros(static_cast<int>(sub.extended.size()), panel.T);
        sp.years = panel.years;
        for (std::size_t k = 0; k < sub.extended.size(); ++k) {
            int i = sub.extended[k];
            sp.area_ids[k] = panel.area_ids[i];
            sp.counts.row(static_cast<int>(k)) = panel.counts.row(i);
            sp.population.row(static_cast<int>(k)) = panel.population.row(i);
            sp.expected.row(static_cast<int>(k)) = panel.expected.row(i);
            sp.observed.row(static_cast<int>(k)) = panel.observed.row(i);
            sp.imputed.row(static_cast<int>(k)) = panel.imputed.row(i);
        }
        sp.expected_mode = ExpectedMode::Global;
        FitOptions fo = opts.fit;
        fo.seed = opts.seed + static_cast<std::uint64_t>(s);
        try {
            LatentModel m = build_st_model(sp, opts.prior, opts.interaction, subgraph, opts.model);
            merged.fits[s] = fit_model(m, fo);
        } catch (const std::exception& e) {
            throw PartitionError("subdomain " + sub.name + " failed: " + e.what());
        }
    });

    // ownership resolution: estimates always from the owning subdomain
    for (std::size_t s = 0; s < plan.subdomains.size(); ++s) {
        const Subdomain& sub = plan.subdomains[s];
        std::map<int, int> local;
        for (std::size_t k = 0; k < sub.extended.size(); ++k) local[sub.extended[k]] = static_cast<int>(k);
        for (int i : sub.owned) {
            int li = local[i];
            merged.owner[i] = static_cast<int>(s);
            merged.local_index[i] = li;
            for (int t = 0; t < panel.T; ++t) {
                merged.risk_q025(i, t) = merged.fits[s].risk_q025(li, t);
                merged.risk_q50(i, t) = merged.fits[s].risk_q50(li, t);
                merged.risk_q975(i, t) = merged.fits[s].risk_q975(li, t);
            }
        }
    }
    return merged;
}

struct MergedCriteria {
    DicResult dic;
    WaicResult waic;
    Eigen::MatrixXd pointwise_loglik;  // ownership-filtered, draws x (S*T)
    double deviance_at_mean = 0.0;
};

// Pointwise contributions taken only from owning subdomains.
inline MergedCriteria merged_criteria(const MergedResult& merged) {
    if (merged.fits.empty()) throw CriteriaError("merged_criteria: no subdomain fits");
    const Eigen::Index draws = merged.fits[0].pointwise_loglik.rows();
    for (const auto& f : merged.fits)
        if (f.pointwise_loglik.rows() != draws)
            throw CriteriaError("merged_criteria: draw-count mismatch across subdomains");
    MergedCriteria out;
    out.pointwise_loglik.resize(draws, static_cast<Eigen::Index>(merged.S) * merged.T);
    for (int i = 0; i < merged.S; ++i) {
        const FitResult& f = merged.fits[merged.owner[i]];
        int li = merged.local_index[i];
        for (int t = 0; t < merged.T; ++t) {
            int local_cell = t * f.S + li;
            out.pointwise_loglik.col(static_cast<Eigen::Index>(t) * merged.S + i) =
                f.pointwise_loglik.col(local_cell);
            out.deviance_at_mean += f.cell_deviance_at_mean[local_cell];
        }
    }
    out.dic = dic(out.pointwise_loglik, out.deviance_at_mean);
    out.waic = waic(out.pointwise_loglik);
    return out;
}

}  // namespace stmap
