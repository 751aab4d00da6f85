#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stmap/area_graph.hpp"
#include "stmap/errors.hpp"
#include "stmap/lgm_model.hpp"
#include "stmap/structures.hpp"

namespace stmap {

enum class ExpectedMode { None, PerYear, Global };

// S x T panel of observed counts, populations and expected counts.
struct CountsPanel {
    int S = 0, T = 0;
    Eigen::ArrayXXd counts;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> imputed;
    Eigen::ArrayXXd population;
    Eigen::ArrayXXd expected;
    ExpectedMode expected_mode = ExpectedMode::None;
    bool suppressed = false;  // counts < 10 withheld at the source
    std::vector<std::string> area_ids;
    std::vector<int> years;

    static CountsPanel zeros(int S, int T) {
        CountsPanel p;
        p.S = S;
        p.T = T;
        p.counts = Eigen::ArrayXXd::Zero(S, T);
        p.observed = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(S, T, true);
        p.imputed = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(S, T, false);
        p.population = Eigen::ArrayXXd::Ones(S, T);
        p.expected = Eigen::ArrayXXd::Zero(S, T);
        p.years.resize(T);
        for (int t = 0; t < T; ++t) p.years[t] = t;
        p.area_ids.resize(S);
        for (int i = 0; i < S; ++i) p.area_ids[i] = "a" + std::to_string(i);
        return p;
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> warnings;
        if ((population <= 0.0).any()) throw InputError("panel: population must be positive");
        if (suppressed) {
            for (int t = 0; t < T; ++t)
                for (int i = 0; i < S; ++i)
                    if (observed(i, t) && !imputed(i, t) && counts(i, t) < 10.0)
                        warnings.push_back("observed count below 10 in suppressed panel at (" +
                                           area_ids[i] + "," + std::to_string(years[t]) + ")");
        }
        return warnings;
    }
};

// Rates from observed cells only; expected filled for all cells.
inline CountsPanel expected_counts(const CountsPanel& panel, ExpectedMode mode) {
    CountsPanel out = panel;
    if (mode == ExpectedMode::PerYear) {
        for (int t = 0; t < panel.T; ++t) {
            double y = 0.0, n = 0.0;
            for (int i = 0; i < panel.S; ++i)
                if (panel.observed(i, t)) {
                    y += panel.counts(i, t);
                    n += panel.population(i, t);
                }
            if (n == 0.0 || y == 0.0)
                throw InputError("expected_counts: no usable observed counts in year index " +
                                 std::to_string(t));
            double rate = y / n;
            for (int i = 0; i < panel.S; ++i) out.expected(i, t) = panel.population(i, t) * rate;
        }
    } else if (mode == ExpectedMode::Global) {
        double y = 0.0, n = 0.0;
        for (int t = 0; t < panel.T; ++t)
            for (int i = 0; i < panel.S; ++i)
                if (panel.observed(i, t)) {
                    y += panel.counts(i, t);
                    n += panel.population(i, t);
                }
        if (n == 0.0 || y == 0.0)
            throw InputError("expected_counts: no usable observed counts in panel");
        double rate = y / n;
        out.expected = panel.population * rate;
    } else {
        throw InputError("expected_counts: mode must be per_year or global");
    }
    out.expected_mode = mode;
    return out;
}

struct ModelConfig {
    bool scale_temporal = true;  // scale the RW1 like the spatial priors
    HyperPriorConfig hyper;
};

namespace detail {

inline void check_icar_usable(const AreaGraph& g) {
    std::vector<int> comp_size(g.n_components, 0);
    for (int i = 0; i < g.n_areas; ++i) ++comp_size[g.component_label[i]];
    for (int c = 0; c < g.n_components; ++c)
        if (comp_size[c] == 1)
            throw StructureError(
                "pure ICAR prior is improper for isolated areas; use BYM2 or connect the graph");
}

inline void add_spatial_blocks(LatentModel& m, SpatialPrior prior, const AreaGraph& g,
                               int theta_base) {
    PrecisionStructure q = scale_precision(icar_precision(g));
    if (prior == SpatialPrior::ICAR) {
        check_icar_usable(g);
        LatentBlock b;
        b.name = "spatial";
        b.prior = q;
        b.theta_prec = theta_base;
        m.ib_spatial = static_cast<int>(m.blocks.size());
        m.blocks.push_back(std::move(b));
    } else {
        Bym2Spec spec = bym2_effect_spec(q);
        LatentBlock bs;
        bs.name = "spatial";
        bs.prior = spec.structured;
        bs.theta_prec = theta_base;
        bs.theta_mix = theta_base + 1;
        bs.role = MixRole::Structured;
        m.ib_spatial = static_cast<int>(m.blocks.size());
        m.blocks.push_back(std::move(bs));
        LatentBlock bu;
        bu.name = "spatial_iid";
        bu.prior.matrix.resize(spec.n, spec.n);
        bu.prior.matrix.setIdentity();
        bu.prior.scaled = true;
        bu.theta_prec = theta_base;
        bu.theta_mix = theta_base + 1;
        bu.role = MixRole::Unstructured;
        m.ib_spatial_aux = static_cast<int>(m.blocks.size());
        m.blocks.push_back(std::move(bu));
    }
}

inline LatentBlock intercept_block(const HyperPriorConfig& hyper) {
    LatentBlock b;
    b.name = "intercept";
    b.prior.matrix.resize(1, 1);
    b.prior.matrix.insert(0, 0) = hyper.intercept_precision;
    return b;
}

}  // namespace detail

// One-year Poisson spatial model: log r_i = alpha0 + xi_i.
inline LatentModel build_spatial_model(const CountsPanel& panel, int year, SpatialPrior prior,
                                       const AreaGraph& graph, const ModelConfig& cfg = {}) {
    if (panel.expected_mode != ExpectedMode::PerYear)
        throw InputError("build_spatial_model: expected counts must be filled in per_year mode");
    if (year < 0 || year >= panel.T)
        throw InputError("build_spatial_model: year index out of range");
    if (graph.n_areas != panel.S)
        throw InputError("build_spatial_model: graph and panel disagree on the number of areas");
    LatentModel m;
    m.S = panel.S;
    m.T = 1;
    m.hyper = cfg.hyper;
    m.counts = panel.counts.col(year);
    m.observed = panel.observed.col(year);
    m.expected = panel.expected.col(year);
    m.blocks.push_back(detail::intercept_block(cfg.hyper));
    detail::add_spatial_blocks(m, prior, graph, 0);
    m.finalize();
    return m;
}

// Spatio-temporal Poisson model: log r_it = alpha0 + xi_i + gamma_t + delta_it.
// A T=1 request degrades to the spatial structure with a warning flag.
inline LatentModel build_st_model(const CountsPanel& panel, SpatialPrior prior,
                                  InteractionType interaction, const AreaGraph& graph,
                                  const ModelConfig& cfg = {}) {
    if (panel.expected_mode != ExpectedMode::Global)
        throw InputError("build_st_model: expected counts must be filled in global mode");
    if (graph.n_areas != panel.S)
        throw InputError("build_st_model: graph and panel disagree on the number of areas");
    LatentModel m;
    m.S = panel.S;
    m.T = panel.T;
    m.hyper = cfg.hyper;
    m.counts = panel.counts;
    m.observed = panel.observed;
    m.expected = panel.expected;
    m.blocks.push_back(detail::intercept_block(cfg.hyper));
    detail::add_spatial_blocks(m, prior, graph, 0);
    int next_theta = (prior == SpatialPrior::BYM2) ? 2 : 1;
    if (panel.T < 2) {
        m.degraded_from_st = true;
        m.finalize();
        return m;
    }
    PrecisionStructure rw = rw1_precision(panel.T);
    if (cfg.scale_temporal) rw = scale_precision(rw);
    else rw.scaled = true;  // accepted unscaled by choice; recorded in run metadata
    LatentBlock bt;
    bt.name = "temporal";
    bt.prior = rw;
    bt.theta_prec = next_theta++;
    m.ib_temporal = static_cast<int>(m.blocks.size());
    m.blocks.push_back(std::move(bt));

    const PrecisionStructure& q_spatial = m.blocks[m.ib_spatial].prior;
    LatentBlock bi;
    bi.name = "interaction";
    bi.prior = interaction_precision(interaction, q_spatial, m.blocks[m.ib_temporal].prior);
    bi.theta_prec = next_theta++;
    m.ib_interaction = static_cast<int>(m.blocks.size());
    m.blocks.push_back(std::move(bi));
    m.finalize();
    return m;
}

}  // namespace stmap
