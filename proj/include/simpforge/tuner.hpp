#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "simpforge/engine.hpp"

namespace simpforge {

// Rule ids grouped by potential interaction: rules sharing a root operation,
// or whose LHS patterns overlap (one pattern's non-leaf subtree embeds
// somewhere in the other's), merge transitively. Groups are sorted by their
// smallest member, members ascending; group ids index this list.
std::vector<std::vector<std::size_t>> interaction_groups(
    const std::vector<RewriteRule>& rules);

// One point of the search space: how many rules of the induced order are
// active, and each interaction group's preference order. Groups absent from
// the map keep their members in ascending-id order.
struct TunerConfig {
  std::size_t selected_count = 0;
  std::map<std::size_t, std::vector<std::size_t>> group_permutations;
};

// Global rule order induced by the group permutations: each group's members
// occupy the base positions the group holds in 0..n-1, reordered by its
// permutation. The active set is the first selected_count entries.
std::vector<std::size_t> induced_order(const std::vector<RewriteRule>& rules,
                                       const TunerConfig& cfg);
std::vector<std::size_t> active_rules(const std::vector<RewriteRule>& rules,
                                      const TunerConfig& cfg);

// Cost of one benchmark under one compiled rule set; smaller is better. Must
// tolerate concurrent calls when fopt runs benchmarks on several workers.
using Metric = std::function<double(const FormulaDag& dag, const Matcher& m)>;

// The default cost: operation count of the simplified DAG.
Metric simplified_size_metric(EvalOptions eval_opts = {}, SimplifyLimits limits = {});

// Wraps a noisy metric: takes `repetitions` draws and returns their median.
Metric median_of(Metric inner, int repetitions = 5);

struct BenchScore {
  double baseline = 0;
  double tuned = 0;
  double reward = 0;
  bool failed = false;  // metric threw; scored at the full penalty
};

struct EvalReport {
  std::vector<BenchScore> benchmarks;
  double score = 0;     // arithmetic mean of rewards
  int repetitions = 1;  // metric draws behind each value (median policy)
};

struct FoptConfig {
  double penalty_factor = 4.0;  // multiplies negative relative changes
  int repetitions = 1;          // recorded in the report; median_of supplies >1
  std::size_t workers = 0;      // benchmarks evaluated in parallel; 0 = hardware
};

// Per benchmark b: r_b = (baseline_b - tuned_b) / baseline_b, reward r_b when
// nonnegative and penalty_factor * r_b otherwise; score is the mean. Baselines
// come from the empty rule set unless supplied. A zero or negative baseline
// contributes reward 0.
EvalReport fopt(const TunerConfig& cfg, const std::vector<RewriteRule>& rules,
                const std::vector<FormulaDag>& train, const Metric& metric,
                const FoptConfig& fc = {},
                const std::vector<double>* baselines = nullptr);

struct TuneOptions {
  FoptConfig fopt;
  std::size_t stagnation = 8;   // rejected moves in a row before a restart
  std::ostream* log = nullptr;  // JSON-lines: one object per evaluation
};

struct TuneResult {
  TunerConfig config;
  EvalReport report;
  std::size_t evaluations = 0;
};

// Budgeted search: the empty configuration first, then random starting
// configurations refined by greedy moves (move a rule to the front or back of
// its group's order, swap adjacent rules in a group, grow or shrink the active
// prefix), restarting on stagnation. Deterministic for a given seed, and never
// returns a configuration scoring below the empty one.
TuneResult tune(const std::vector<RewriteRule>& rules,
                const std::vector<FormulaDag>& train, const Metric& metric,
                std::size_t budget, std::uint64_t seed, const TuneOptions& opts = {});

// One rule id per line, most preferred first; the list feeds Matcher::compile.
void write_order_manifest(const std::filesystem::path& path,
                          const std::vector<std::size_t>& order);
std::vector<std::size_t> read_order_manifest(const std::filesystem::path& path);

}  // namespace simpforge
