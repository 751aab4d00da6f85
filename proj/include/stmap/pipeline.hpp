#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "stmap/aggregation.hpp"
#include "stmap/csv_io.hpp"
#include "stmap/imputation.hpp"
#include "stmap/simulator.hpp"

namespace stmap {

// Flat key=value run configuration; CLI flags override file entries.
struct RunConfig {
    std::map<std::string, std::string> values;

    static RunConfig load(const std::string& path) {
        auto in = detail::open_input(path);
        RunConfig cfg;
        std::string line;
        int row = 0;
        while (std::getline(in, line)) {
            ++row;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw InputError(path + ": expected key=value at row " + std::to_string(row));
            auto trim = [](std::string s) {
                auto a = s.find_first_not_of(" \t\r");
                auto b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            cfg.values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values[key] = value; }
    bool has(const std::string& key) const { return values.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
    std::string require(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw InputError("missing required config key: " + key);
        return it->second;
    }
    long get_long(const std::string& key, long fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        try {
            return std::stol(it->second);
        } catch (const std::exception&) {
            throw InputError("config key " + key + ": bad integer `" + it->second + "`");
        }
    }
    double get_double(const std::string& key, double fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw InputError("config key " + key + ": bad number `" + it->second + "`");
        }
    }
    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw InputError("config key " + key + ": bad boolean `" + it->second + "`");
    }
};

// Tracks written files so a failed run leaves no partial outputs, and
// records per-stage wall-clock for the manifest.
class RunContext {
  public:
    explicit RunContext(std::string outdir) : outdir_(std::move(outdir)) {
        if (!outdir_.empty()) std::filesystem::create_directories(outdir_);
    }

    std::string path(const std::string& name) {
        std::string p = outdir_.empty() ? name : outdir_ + "/" + name;
        written_.push_back(p);
        return p;
    }

    template <typename Fn>
    void stage(const std::string& name, Fn&& fn) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        stage_seconds_[name] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    void remove_outputs() {
        for (const auto& p : written_) std::remove(p.c_str());
    }

    const std::map<std::string, double>& stage_seconds() const { return stage_seconds_; }
    const std::vector<std::string>& written() const { return written_; }

  private:
    std::string outdir_;
    std::vector<std::string> written_;
    std::map<std::string, double> stage_seconds_;
};

struct PipelineSettings {
    SpatialPrior prior = SpatialPrior::ICAR;
    InteractionType interaction = InteractionType::II;
    int k = 1;
    bool truncate = true;
    std::uint64_t seed = 1;
    int workers = 1;
    ModelConfig model;
    FitOptions fit;

    static PipelineSettings from_config(const RunConfig& cfg) {
        PipelineSettings s;
        s.prior = parse_prior(cfg.get("prior", "icar"));
        s.interaction = parse_interaction(static_cast<int>(cfg.get_long("interaction", 2)));
        s.k = static_cast<int>(cfg.get_long("k", 1));
        s.truncate = cfg.get_bool("truncate", true);
        s.seed = static_cast<std::uint64_t>(cfg.get_long("seed", 1));
        s.workers = static_cast<int>(cfg.get_long("workers", default_workers()));
        s.model.scale_temporal = cfg.get_bool("scale_temporal", true);
        s.model.hyper.gamma_shape = cfg.get_double("gamma_shape", s.model.hyper.gamma_shape);
        s.model.hyper.gamma_rate = cfg.get_double("gamma_rate", s.model.hyper.gamma_rate);
        s.model.hyper.intercept_precision =
            cfg.get_double("intercept_precision", s.model.hyper.intercept_precision);
        s.model.hyper.jitter = cfg.get_double("jitter", s.model.hyper.jitter);
        s.fit.seed = s.seed;
        s.fit.n_loglik_draws = static_cast<int>(cfg.get_long("loglik_draws", s.fit.n_loglik_draws));
        s.fit.newton_tol = cfg.get_double("newton_tol", s.fit.newton_tol);
        s.fit.newton_max_iter =
            static_cast<int>(cfg.get_long("newton_max_iter", s.fit.newton_max_iter));
        s.fit.simplex_max_evals =
            static_cast<int>(cfg.get_long("simplex_max_evals", s.fit.simplex_max_evals));
        s.fit.fd_step = cfg.get_double("fd_step", s.fit.fd_step);
        s.fit.workers = s.workers;
        return s;
    }
};

// Every default that affects numbers is recorded here.
inline nlohmann::json manifest_base(const std::string& command, const PipelineSettings& s) {
    nlohmann::json m;
    m["command"] = command;
    m["seed"] = s.seed;
    m["prior"] = spatial_prior_name(s.prior);
    m["interaction"] = interaction_name(s.interaction);
    m["k"] = s.k;
    m["truncate_at_9"] = s.truncate;
    m["workers"] = s.workers;
    m["rounding_rule"] = "half-away-from-zero";
    m["interval_method"] = "equal-tailed-mixture-quantile";
    m["empirical_quantile_method"] = "type7";
    m["ownership_rule"] = "owning-subdomain";
    m["subdomain_seed_rule"] = "base-seed-plus-name-ordinal";
    m["scale_temporal"] = s.model.scale_temporal;
    m["hyperprior"] = {{"gamma_shape", s.model.hyper.gamma_shape},
                       {"gamma_rate", s.model.hyper.gamma_rate},
                       {"intercept_precision", s.model.hyper.intercept_precision},
                       {"jitter", s.model.hyper.jitter}};
    m["loglik_draws"] = s.fit.n_loglik_draws;
    m["newton_tol"] = s.fit.newton_tol;
    m["newton_max_iter"] = s.fit.newton_max_iter;
    m["simplex_max_evals"] = s.fit.simplex_max_evals;
    m["fd_step"] = s.fit.fd_step;
    m["grid_offsets"] = {0, 1, -1, 2, -2};
    return m;
}

inline void write_manifest(const std::string& path, nlohmann::json m, const RunContext& ctx) {
    m["stage_seconds"] = ctx.stage_seconds();
    m["outputs"] = ctx.written();
    std::ofstream out(path);
    if (!out) throw InputError("cannot open output file: " + path);
    out << m.dump(2) << '\n';
}

struct LoadedInputs {
    CountsPanel panel;
    AreaGraph graph;
    std::vector<AreaMeta> meta;  // may be empty
};

inline LoadedInputs load_inputs(const RunConfig& cfg) {
    LoadedInputs in;
    in.panel = load_panel(cfg.require("counts"), cfg.require("population"));
    auto edges = read_edge_list(cfg.require("edges"));
    in.graph = load_graph(edges, in.panel.area_ids);
    if (cfg.has("meta")) {
        in.meta = read_area_meta(cfg.require("meta"));
        std::map<std::string, const AreaMeta*> by_id;
        for (const auto& m : in.meta) by_id[m.area_id] = &m;
        std::vector<AreaMeta> ordered;
        for (const auto& id : in.panel.area_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw InputError("metadata missing for area " + id);
            ordered.push_back(*it->second);
        }
        in.meta = std::move(ordered);
    }
    return in;
}

namespace detail {

inline std::vector<std::string> partition_labels(const RunConfig& cfg, const LoadedInputs& in) {
    if (cfg.has("partition_labels"))
        return read_partition_labels(cfg.require("partition_labels"), in.panel.area_ids);
    if (!in.meta.empty()) {
        std::vector<std::string> labels;
        for (const auto& m : in.meta) labels.push_back(m.state_code);
        return labels;
    }
    return std::vector<std::string>(in.panel.area_ids.size(), "all");
}

inline std::map<std::string, std::string> merge_map(const RunConfig& cfg) {
    if (cfg.has("merge_map")) return read_merge_map(cfg.require("merge_map"));
    return {};
}

struct FitBundle {
    CountsPanel panel;  // imputed + global expected
    PartitionPlan plan;
    MergedResult merged;
};

inline FitBundle impute_and_fit(const RunConfig& cfg, const PipelineSettings& s,
                                const LoadedInputs& in, RunContext& ctx) {
    FitBundle fb;
    fb.panel = in.panel;
    ctx.stage("impute", [&] {
        if (!fb.panel.observed.all()) {
            fb.panel.suppressed = true;
            ImputationOptions io;
            io.prior = s.prior;
            io.truncate = s.truncate;
            io.seed = s.seed;
            io.workers = s.workers;
            io.model = s.model;
            io.fit = s.fit;
            fb.panel = impute_panel(fb.panel, in.graph, io).first;
        }
    });
    fb.panel = expected_counts(fb.panel, ExpectedMode::Global);
    ctx.stage("plan", [&] {
        fb.plan = make_plan(partition_labels(cfg, in), in.graph, merge_map(cfg), s.k);
    });
    ctx.stage("fit", [&] {
        PartitionFitOptions po;
        po.prior = s.prior;
        po.interaction = s.interaction;
        po.seed = s.seed;
        po.workers = s.workers;
        po.model = s.model;
        po.fit = s.fit;
        fb.merged = fit_partitioned(fb.panel, fb.plan, in.graph, po);
    });
    return fb;
}

inline void write_trend_files(const FitBundle& fb, const LoadedInputs& in, RunContext& ctx) {
    if (in.meta.empty()) return;
    std::vector<std::string> by_region, by_urb;
    for (const auto& m : in.meta) {
        by_region.push_back(region_name(m.region));
        by_urb.push_back(urbanicity_name(m.urbanicity));
    }
    write_trends(ctx.path("trends_by_region.csv"),
                 weighted_trend(fb.merged, fb.panel, by_region));
    write_trends(ctx.path("trends_by_urbanicity.csv"),
                 weighted_trend(fb.merged, fb.panel, by_urb));
}

}  // namespace detail

inline void run_impute(const RunConfig& cfg, const PipelineSettings& s, RunContext& ctx) {
    LoadedInputs in = load_inputs(cfg);
    CountsPanel imputed;
    ImputationReport report;
    ctx.stage("impute", [&] {
        CountsPanel panel = in.panel;
        panel.suppressed = true;
        ImputationOptions io;
        io.prior = s.prior;
        io.truncate = s.truncate;
        io.seed = s.seed;
        io.workers = s.workers;
        io.model = s.model;
        io.fit = s.fit;
        std::tie(imputed, report) = impute_panel(panel, in.graph, io);
    });
    write_counts(ctx.path("counts_imputed.csv"), imputed);
    write_imputation_report(ctx.path("imputation_report.csv"), report);
    nlohmann::json m = manifest_base("impute", s);
    m["n_years_fitted"] = report.n_years_fitted;
    m["exceed9_fraction"] = report.exceed9_fraction;
    write_manifest(ctx.path("manifest.json"), m, ctx);
}

inline void run_fit(const RunConfig& cfg, const PipelineSettings& s, RunContext& ctx) {
    LoadedInputs in = load_inputs(cfg);
    auto fb = detail::impute_and_fit(cfg, s, in, ctx);
    write_risks(ctx.path("risks.csv"), fb.merged, fb.panel);
    write_risk_classes(ctx.path("risk_classes.csv"), fb.merged, fb.panel);
    write_partition_report(ctx.path("partition_report.csv"), fb.plan, fb.merged);
    auto crit = merged_criteria(fb.merged);
    CriteriaRow row;
    row.prior = spatial_prior_name(s.prior);
    row.interaction = interaction_name(s.interaction);
    row.dbar = crit.dic.dbar;
    row.pd = crit.dic.pd;
    row.dic = crit.dic.dic;
    row.waic = crit.waic.waic;
    write_criteria_table(ctx.path("criteria.csv"), delta_table({row}));
    detail::write_trend_files(fb, in, ctx);
    write_smr_space(ctx.path("smr_space.csv"), fb.panel);
    write_smr_time(ctx.path("smr_time.csv"), fb.panel);
    write_smr_boxplot(ctx.path("smr_boxplot.csv"), fb.panel);
    write_manifest(ctx.path("manifest.json"), manifest_base("fit", s), ctx);
}

inline void run_compare(const RunConfig& cfg, const PipelineSettings& s, RunContext& ctx) {
    LoadedInputs in = load_inputs(cfg);
    std::vector<CriteriaRow> rows;
    for (SpatialPrior prior : {SpatialPrior::ICAR, SpatialPrior::BYM2}) {
        for (InteractionType it :
             {InteractionType::I, InteractionType::II, InteractionType::III, InteractionType::IV}) {
            PipelineSettings sv = s;
            sv.prior = prior;
            sv.interaction = it;
            RunContext scratch("");
            auto fb = detail::impute_and_fit(cfg, sv, in, scratch);
            auto crit = merged_criteria(fb.merged);
            CriteriaRow row;
            row.prior = spatial_prior_name(prior);
            row.interaction = interaction_name(it);
            row.dbar = crit.dic.dbar;
            row.pd = crit.dic.pd;
            row.dic = crit.dic.dic;
            row.waic = crit.waic.waic;
            rows.push_back(row);
        }
    }
    write_criteria_table(ctx.path("criteria.csv"), delta_table(rows));
    write_manifest(ctx.path("manifest.json"), manifest_base("compare", s), ctx);
}

inline void run_trends(const RunConfig& cfg, const PipelineSettings& s, RunContext& ctx) {
    LoadedInputs in = load_inputs(cfg);
    if (in.meta.empty()) throw InputError("trends requires area metadata (config key `meta`)");
    auto fb = detail::impute_and_fit(cfg, s, in, ctx);
    detail::write_trend_files(fb, in, ctx);
    write_manifest(ctx.path("manifest.json"), manifest_base("trends", s), ctx);
}

inline void run_classify(const RunConfig& cfg, const PipelineSettings& s, RunContext& ctx) {
    LoadedInputs in = load_inputs(cfg);
    auto fb = detail::impute_and_fit(cfg, s, in, ctx);
    write_risk_classes(ctx.path("risk_classes.csv"), fb.merged, fb.panel);
    write_risks(ctx.path("risks.csv"), fb.merged, fb.panel);
    write_manifest(ctx.path("manifest.json"), manifest_base("classify", s), ctx);
}

inline void run_simulate(const RunConfig& cfg, const PipelineSettings& s, RunContext& ctx) {
    int rows = static_cast<int>(cfg.get_long("lattice_rows", 10));
    int cols = static_cast<int>(cfg.get_long("lattice_cols", 10));
    int T = static_cast<int>(cfg.get_long("years", 5));
    double base_expected = cfg.get_double("base_expected", 50.0);
    HyperParams hyper;
    hyper.sigma2_spatial = cfg.get_double("var_spatial", hyper.sigma2_spatial);
    hyper.sigma2_temporal = cfg.get_double("var_temporal", hyper.sigma2_temporal);
    hyper.sigma2_interaction = cfg.get_double("var_interaction", hyper.sigma2_interaction);
    AreaGraph graph = make_lattice(rows, cols);
    SimulatedPanel sim;
    ctx.stage("simulate", [&] {
        Eigen::VectorXd base = Eigen::VectorXd::Constant(graph.n_areas, base_expected);
        sim = simulate_panel(graph, T, hyper, s.interaction, base, s.seed);
    });
    CountsPanel out_panel = sim.panel;
    double threshold = cfg.get_double("suppress_threshold", -1.0);
    nlohmann::json m = manifest_base("simulate", s);
    if (threshold > 0.0) {
        auto sup = suppress(sim.panel, threshold);
        out_panel = sup.panel;
        m["suppress_threshold"] = threshold;
        m["masked_fraction"] = sup.masked_fraction;
    }
    write_counts(ctx.path("counts.csv"), out_panel);
    write_population(ctx.path("population.csv"), out_panel);
    write_edge_list(ctx.path("edges.txt"), graph);
    m["lattice_rows"] = rows;
    m["lattice_cols"] = cols;
    m["years"] = T;
    m["base_expected"] = base_expected;
    write_manifest(ctx.path("manifest.json"), m, ctx);
}

// Dispatch used by the CLI; maps error taxonomy onto exit codes.
inline int run_pipeline(const std::string& command, const RunConfig& cfg) {
    RunContext ctx(cfg.get("outdir", "."));
    try {
        PipelineSettings s = PipelineSettings::from_config(cfg);
        if (command == "impute") run_impute(cfg, s, ctx);
        else if (command == "fit") run_fit(cfg, s, ctx);
        else if (command == "compare") run_compare(cfg, s, ctx);
        else if (command == "trends") run_trends(cfg, s, ctx);
        else if (command == "classify") run_classify(cfg, s, ctx);
        else if (command == "simulate") run_simulate(cfg, s, ctx);
        else throw InputError("unknown command: " + command);
    } catch (const InputError& e) {
        ctx.remove_outputs();
        std::fprintf(stderr, "[%s] input error: %s\n", command.c_str(), e.what());
        return 2;
    } catch (const FitError& e) {
        ctx.remove_outputs();
        std::fprintf(stderr, "[%s] fit error: %s\n", command.c_str(), e.what());
        return 3;
    } catch (const StructureError& e) {
        ctx.remove_outputs();
        std::fprintf(stderr, "[%s] fit error: %s\n", command.c_str(), e.what());
        return 3;
    } catch (const PartitionError& e) {
        ctx.remove_outputs();
        std::fprintf(stderr, "[%s] fit error: %s\n", command.c_str(), e.what());
        return 3;
    } catch (const std::exception& e) {
        ctx.remove_outputs();
        std::fprintf(stderr, "[%s] internal error: %s\n", command.c_str(), e.what());
        return 4;
    }
    return 0;
}

}  // namespace stmap
