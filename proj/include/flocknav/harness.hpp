#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flocknav/coordination.hpp"

namespace flocknav {

// Aggregates over one episode log.
struct EpisodeSummary {
    std::string scenario_name;
    std::string mode;
    std::uint64_t seed = 0;
    std::int64_t ticks = 0;
    int agents = 0;
    double mean_solve_ms = 0.0;
    double max_solve_ms = 0.0;
    double budget_ms = 0.0;              // 0 when no budget was configured
    double fraction_under_budget = 1.0;  // ticks whose slowest agent fit the budget
    double min_separation_sq = -1.0;     // over all ticks and pairs; -1 with a single agent
    double min_clearance_m = -1.0;       // over all ticks; -1 without obstacles
    double mean_follower_centroid_deviation_m = 0.0;
    double max_follower_centroid_deviation_m = 0.0;
    std::map<std::string, int> status_counts;
    std::string digest;  // hex content hash, wall-clock timing excluded
};

EpisodeSummary summarize(const EpisodeLog& log, std::optional<double> budget_ms);

// FNV-1a 64 over the record contents; solve_ms is excluded so repeated runs of
// a deterministic mode digest identically.
std::uint64_t log_digest(const EpisodeLog& log);

// JSON-lines: one header line, then one line per record. Loading a saved log
// reproduces it value-exactly (digests match).
void save_log(const EpisodeLog& log, const std::string& path);
EpisodeLog load_log(const std::string& path);

void save_summary(const EpisodeSummary& s, const std::string& path);
std::string dump_summary(const EpisodeSummary& s);

// Per-tick follower centroid-deviation means of two runs over their common
// tick range, plus the ratio of episode means (a / b).
struct Comparison {
    std::vector<double> deviation_a, deviation_b;
    double mean_a = 0.0, mean_b = 0.0;
    double ratio = 0.0;
};

Comparison compare_logs(const EpisodeLog& a, const EpisodeLog& b);
std::string dump_comparison(const Comparison& c);

// Rewrites every follower to use the given controller (baseline swaps).
Scenario with_follower_controller(Scenario s, const std::string& controller);

}  // namespace flocknav
