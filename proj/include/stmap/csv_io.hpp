#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stmap/aggregation.hpp"
#include "stmap/area_graph.hpp"
#include "stmap/criteria.hpp"
#include "stmap/descriptives.hpp"
#include "stmap/imputation.hpp"
#include "stmap/models.hpp"
#include "stmap/partition.hpp"

namespace stmap {

// Shortest round-trippable decimal representation keeps outputs
// byte-identical across runs.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open input file: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open output file: " + path);
    return out;
}

inline void expect_header(const std::vector<std::string>& fields, const std::string& expected,
                          const std::string& path) {
    std::string joined;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) joined += ',';
        joined += fields[i];
    }
    if (joined != expected)
        throw InputError(path + ": expected header `" + expected + "`, got `" + joined + "`");
}

inline double parse_double(const std::string& s, const std::string& path, int row) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(path + ": bad numeric field `" + s + "` at row " + std::to_string(row));
    }
}

inline int parse_int(const std::string& s, const std::string& path, int row) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(path + ": bad integer field `" + s + "` at row " + std::to_string(row));
    }
}

}  // namespace detail

// Edge list: one `id1<TAB>id2` per line, `#` comments and blank lines allowed.
inline std::vector<std::pair<std::string, std::string>> read_edge_list(const std::string& path) {
    auto in = detail::open_input(path);
    std::vector<std::pair<std::string, std::string>> edges;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw InputError(path + ": expected `id1<TAB>id2` at row " + std::to_string(row));
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        edges.emplace_back(trim(line.substr(0, tab)), trim(line.substr(tab + 1)));
    }
    return edges;
}

inline void write_edge_list(const std::string& path, const AreaGraph& g) {
    auto out = detail::open_output(path);
    for (const auto& [u, v] : g.edges) out << g.area_ids[u] << '\t' << g.area_ids[v] << '\n';
}

// Area metadata: `area_id,state,region,urbanicity_pop`.
inline std::vector<AreaMeta> read_area_meta(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");
    detail::expect_header(detail::split_csv_line(line), "area_id,state,region,urbanicity_pop",
                          path);
    std::vector<AreaMeta> metas;
    std::set<std::string> seen;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 4)
            throw InputError(path + ": expected 4 fields at row " + std::to_string(row));
        if (!seen.insert(f[0]).second)
            throw InputError(path + ": duplicate area id `" + f[0] + "` at row " +
                             std::to_string(row));
        AreaMeta m;
        m.area_id = f[0];
        m.state_code = f[1];
        m.region = parse_region(f[2]);
        m.urbanicity = classify_urbanicity(detail::parse_double(f[3], path, row));
        metas.push_back(std::move(m));
    }
    return metas;
}

// Long-format panel: counts `area_id,year,count` (empty or NA = suppressed),
// population `area_id,year,population` and required complete over S x T.
inline CountsPanel load_panel(const std::string& counts_csv, const std::string& population_csv) {
    struct Cell {
        double value;
        int row;
    };
    auto read_long = [](const std::string& path, const std::string& header, bool allow_missing) {
        auto in = detail::open_input(path);
        std::string line;
        if (!std::getline(in, line)) throw InputError(path + ": empty file");
        detail::expect_header(detail::split_csv_line(line), header, path);
        std::map<std::pair<std::string, int>, Cell> cells;
        int row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            auto f = detail::split_csv_line(line);
            if (f.size() != 3)
                throw InputError(path + ": expected 3 fields at row " + std::to_string(row));
            int year = detail::parse_int(f[1], path, row);
            double v;
            if (f[2].empty() || f[2] == "NA") {
                if (!allow_missing)
                    throw InputError(path + ": missing value at row " + std::to_string(row));
                v = std::numeric_limits<double>::quiet_NaN();
            } else {
                v = detail::parse_double(f[2], path, row);
            }
            auto [it, inserted] = cells.emplace(std::make_pair(f[0], year), Cell{v, row});
            if (!inserted)
                throw InputError(path + ": duplicate (area,year) row for (" + f[0] + "," + f[1] +
                                 ") at row " + std::to_string(row));
        }
        return cells;
    };
    auto pop = read_long(population_csv, "area_id,year,population", false);
    auto cnt = read_long(counts_csv, "area_id,year,count", true);

    std::set<std::string> id_set;
    std::set<int> year_set;
    for (const auto& [key, cell] : pop) {
        id_set.insert(key.first);
        year_set.insert(key.second);
    }
    std::vector<std::string> ids(id_set.begin(), id_set.end());
    std::vector<int> years(year_set.begin(), year_set.end());
    if (pop.size() != ids.size() * years.size())
        throw InputError(population_csv + ": population must cover every (area,year) cell");

    CountsPanel panel = CountsPanel::zeros(static_cast<int>(ids.size()),
                                           static_cast<int>(years.size()));
    panel.area_ids = ids;
    panel.years = years;
    std::map<std::string, int> id_pos;
    std::map<int, int> year_pos;
    for (std::size_t i = 0; i < ids.size(); ++i) id_pos[ids[i]] = static_cast<int>(i);
    for (std::size_t t = 0; t < years.size(); ++t) year_pos[years[t]] = static_cast<int>(t);

    for (const auto& [key, cell] : pop)
        panel.population(id_pos[key.first], year_pos[key.second]) = cell.value;
    bool any_missing = false;
    for (const auto& [key, cell] : cnt) {
        auto ip = id_pos.find(key.first);
        auto tp = year_pos.find(key.second);
        if (ip == id_pos.end() || tp == year_pos.end())
            throw InputError(counts_csv + ": (area,year) not present in population file at row " +
                             std::to_string(cell.row));
        if (std::isnan(cell.value)) {
            panel.observed(ip->second, tp->second) = false;
            any_missing = true;
        } else {
            panel.counts(ip->second, tp->second) = cell.value;
        }
    }
    for (int t = 0; t < panel.T; ++t)
        for (int i = 0; i < panel.S; ++i)
            if (panel.observed(i, t) && cnt.find({panel.area_ids[i], panel.years[t]}) == cnt.end())
                throw InputError(counts_csv + ": no row for (" + panel.area_ids[i] + "," +
                                 std::to_string(panel.years[t]) + ")");
    panel.suppressed = any_missing;
    panel.validate();
    return panel;
}

// Writers for the round-trippable long formats.
inline void write_counts(const std::string& path, const CountsPanel& panel) {
    auto out = detail::open_output(path);
    out << "area_id,year,count\n";
    for (int i = 0; i < panel.S; ++i)
        for (int t = 0; t < panel.T; ++t) {
            out << panel.area_ids[i] << ',' << panel.years[t] << ',';
            if (panel.observed(i, t)) out << fmt_double(panel.counts(i, t));
            else out << "NA";
            out << '\n';
        }
}

inline void write_population(const std::string& path, const CountsPanel& panel) {
    auto out = detail::open_output(path);
    out << "area_id,year,population\n";
    for (int i = 0; i < panel.S; ++i)
        for (int t = 0; t < panel.T; ++t)
            out << panel.area_ids[i] << ',' << panel.years[t] << ','
                << fmt_double(panel.population(i, t)) << '\n';
}

inline void write_risks(const std::string& path, const MergedResult& merged,
                        const CountsPanel& panel) {
    auto out = detail::open_output(path);
    out << "area_id,year,q025,median,q975\n";
    for (int i = 0; i < panel.S; ++i)
        for (int t = 0; t < panel.T; ++t)
            out << panel.area_ids[i] << ',' << panel.years[t] << ','
                << fmt_double(merged.risk_q025(i, t)) << ',' << fmt_double(merged.risk_q50(i, t))
                << ',' << fmt_double(merged.risk_q975(i, t)) << '\n';
}

inline void write_imputation_report(const std::string& path, const ImputationReport& report) {
    auto out = detail::open_output(path);
    out << "area_id,year,expected,median_risk,raw_pred,final_count,truncated\n";
    for (const auto& c : report.cells)
        out << c.area_id << ',' << c.year << ',' << fmt_double(c.expected) << ','
            << fmt_double(c.median_risk) << ',' << c.raw_prediction << ',' << c.final_count << ','
            << (c.truncated ? 1 : 0) << '\n';
}

inline void write_criteria_table(const std::string& path, const std::vector<CriteriaRow>& rows) {
    auto out = detail::open_output(path);
    out << "prior,interaction,Dbar,pD,dDIC,dWAIC\n";
    for (const auto& r : rows)
        out << r.prior << ',' << r.interaction << ',' << fmt_double(r.dbar) << ','
            << fmt_double(r.pd) << ',' << fmt_double(r.dic) << ',' << fmt_double(r.waic) << '\n';
}

inline void write_trends(const std::string& path, const std::vector<TrendRow>& rows) {
    auto out = detail::open_output(path);
    out << "group,year,weighted_risk\n";
    for (const auto& r : rows) {
        out << r.group << ',' << r.year << ',';
        if (r.defined) out << fmt_double(r.weighted_risk);
        else out << "NA";
        out << '\n';
    }
}

inline void write_risk_classes(const std::string& path, const MergedResult& merged,
                               const CountsPanel& panel) {
    auto classes = risk_classification(merged);
    auto out = detail::open_output(path);
    out << "area_id,year,class\n";
    for (int i = 0; i < panel.S; ++i)
        for (int t = 0; t < panel.T; ++t)
            out << panel.area_ids[i] << ',' << panel.years[t] << ','
                << risk_class_name(classes[i][t]) << '\n';
}

inline void write_smr_space(const std::string& path, const CountsPanel& panel) {
    auto entries = smr_space(panel);
    auto out = detail::open_output(path);
    out << "area_id,smr,displayable\n";
    for (int i = 0; i < panel.S; ++i) {
        out << panel.area_ids[i] << ',';
        if (entries[i].defined) out << fmt_double(entries[i].smr);
        else out << "NA";
        out << ',' << (entries[i].displayable ? 1 : 0) << '\n';
    }
}

inline void write_smr_time(const std::string& path, const CountsPanel& panel) {
    auto entries = smr_time(panel);
    auto out = detail::open_output(path);
    out << "year,smr,lo,hi\n";
    for (int t = 0; t < panel.T; ++t) {
        out << panel.years[t] << ',';
        if (entries[t].defined)
            out << fmt_double(entries[t].smr) << ',' << fmt_double(entries[t].lo) << ','
                << fmt_double(entries[t].hi);
        else out << "NA,NA,NA";
        out << '\n';
    }
}

inline void write_smr_boxplot(const std::string& path, const CountsPanel& panel) {
    auto rows = boxplot_export(panel);
    auto out = detail::open_output(path);
    out << "year,min,q1,median,q3,max,outliers\n";
    for (const auto& r : rows) {
        out << r.year << ',' << fmt_double(r.min) << ',' << fmt_double(r.q1) << ','
            << fmt_double(r.median) << ',' << fmt_double(r.q3) << ',' << fmt_double(r.max) << ',';
        for (std::size_t k = 0; k < r.outliers.size(); ++k) {
            if (k) out << ';';
            out << fmt_double(r.outliers[k]);
        }
        out << '\n';
    }
}

// Partition labels: `area_id,label`. Returned in panel area order.
inline std::vector<std::string> read_partition_labels(const std::string& path,
                                                      const std::vector<std::string>& area_ids) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");
    detail::expect_header(detail::split_csv_line(line), "area_id,label", path);
    std::map<std::string, std::string> by_id;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 2)
            throw InputError(path + ": expected 2 fields at row " + std::to_string(row));
        if (!by_id.emplace(f[0], f[1]).second)
            throw InputError(path + ": duplicate area id `" + f[0] + "` at row " +
                             std::to_string(row));
    }
    std::vector<std::string> labels;
    for (const auto& id : area_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw InputError(path + ": no partition label for area " + id);
        labels.push_back(it->second);
    }
    return labels;
}

// Merge map: `from_label,to_label`.
inline std::map<std::string, std::string> read_merge_map(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");
    detail::expect_header(detail::split_csv_line(line), "from_label,to_label", path);
    std::map<std::string, std::string> merge;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 2)
            throw InputError(path + ": expected 2 fields at row " + std::to_string(row));
        if (!merge.emplace(f[0], f[1]).second)
            throw InputError(path + ": duplicate source label `" + f[0] + "` at row " +
                             std::to_string(row));
    }
    return merge;
}

inline void write_partition_report(const std::string& path, const PartitionPlan& plan,
                                   const MergedResult& merged) {
    auto out = detail::open_output(path);
    out << "subdomain,n_owned,n_extended,sd_spatial,sd_temporal,sd_interaction\n";
    for (std::size_t s = 0; s < plan.subdomains.size(); ++s) {
        const auto& sub = plan.subdomains[s];
        std::string sd_spatial = "NA", sd_temporal = "NA", sd_interaction = "NA";
        for (const auto& h : merged.fits[s].hyper_summary) {
            if (h.name == "sd_spatial") sd_spatial = fmt_double(h.q50);
            if (h.name == "sd_temporal") sd_temporal = fmt_double(h.q50);
            if (h.name == "sd_interaction") sd_interaction = fmt_double(h.q50);
        }
        out << sub.name << ',' << sub.owned.size() << ',' << sub.extended.size() << ','
            << sd_spatial << ',' << sd_temporal << ',' << sd_interaction << '\n';
    }
}

}  // namespace stmap
