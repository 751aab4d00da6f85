#include <CLI11.hpp>
#include <cstdint>
#include <string>

#include "stmap/pipeline.hpp"

// Command-line front end: each subcommand maps onto a pipeline run with
// flag values overriding the optional key=value config file.
int main(int argc, char** argv) {
    CLI::App app{"Scalable spatio-temporal disease mapping"};
    app.require_subcommand(1);

    std::string config_path, counts, population, edges, meta, outdir;
    std::string prior, partition_labels, merge_map;
    int interaction = -1, k = -1, workers = -1;
    std::uint64_t seed = 0;
    bool seed_set = false, truncate_on = false, truncate_off = false;

    std::vector<CLI::App*> subs;
    for (const char* name : {"impute", "fit", "compare", "trends", "simulate", "classify"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key=value run configuration file");
        sub->add_option("--counts", counts, "long-format counts CSV");
        sub->add_option("--population", population, "long-format population CSV");
        sub->add_option("--edges", edges, "adjacency edge-list file");
        sub->add_option("--meta", meta, "area metadata CSV");
        sub->add_option("--outdir", outdir, "output directory");
        sub->add_option("--prior", prior, "icar or bym2");
        sub->add_option("--interaction", interaction, "interaction type 1..4");
        sub->add_option("--k", k, "border extension order for partitioned fits");
        sub->add_option("--seed", seed, "random seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--workers", workers, "worker thread cap");
        sub->add_option("--partition-labels", partition_labels, "area_id,label CSV");
        sub->add_option("--merge-map", merge_map, "from_label,to_label CSV");
        sub->add_flag("--truncate", truncate_on, "truncate imputed counts at 9 (default)");
        sub->add_flag("--no-truncate", truncate_off, "keep raw imputed counts");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    stmap::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = stmap::RunConfig::load(config_path);
        if (!counts.empty()) cfg.set("counts", counts);
        if (!population.empty()) cfg.set("population", population);
        if (!edges.empty()) cfg.set("edges", edges);
        if (!meta.empty()) cfg.set("meta", meta);
        if (!outdir.empty()) cfg.set("outdir", outdir);
        if (!prior.empty()) cfg.set("prior", prior);
        if (interaction >= 0) cfg.set("interaction", std::to_string(interaction));
        if (k >= 0) cfg.set("k", std::to_string(k));
        if (seed_set) cfg.set("seed", std::to_string(seed));
        if (workers >= 0) cfg.set("workers", std::to_string(workers));
        if (!partition_labels.empty()) cfg.set("partition_labels", partition_labels);
        if (!merge_map.empty()) cfg.set("merge_map", merge_map);
        if (truncate_on && truncate_off) throw stmap::InputError("--truncate conflicts with --no-truncate");
        if (truncate_on) cfg.set("truncate", "true");
        if (truncate_off) cfg.set("truncate", "false");
    } catch (const stmap::InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    }

    return stmap::run_pipeline(app.get_subcommands().front()->get_name(), cfg);
}
