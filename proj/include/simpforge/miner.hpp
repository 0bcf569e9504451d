#pragma once

#include <simpforge/pattern.hpp>
#include <simpforge/rng.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace simpforge {

struct MinerConfig {
  std::size_t N = 2;      // pattern size in operation nodes
  std::size_t M = 50000;  // accepted samples per batch
  double epsilon = 0.02;  // significance threshold for the stopping rule
  std::size_t T = 3;      // in-degree bound that sizes the boundary list
  std::uint64_t seed = 0;
};

struct PatternStats {
  std::string signature;
  std::uint64_t count = 0;
  double significance = 0.0;
  std::set<std::string> configs;  // annotated signatures seen at sample sites
};

// One boundary-growth attempt from the given start node. Returns absent on a
// restart: a shadow slot was drawn, growth got stuck, or the realized growth
// order was not the canonical one for the collected set (the rejection that
// makes every same-size pattern occurrence equally likely). `members`, when
// given, receives the host ids of the collected operation nodes.
std::optional<Pattern> sample_pattern_at(const FormulaDag& dag, NodeId start,
                                         std::size_t N, std::size_t T, Rng& rng,
                                         std::map<std::string, NodeId>* leaf_hosts = nullptr,
                                         std::vector<NodeId>* members = nullptr);

// Same, with the start node drawn uniformly from the whole DAG.
std::optional<Pattern> sample_pattern(const FormulaDag& dag, std::size_t N, std::size_t T,
                                      Rng& rng,
                                      std::map<std::string, NodeId>* leaf_hosts = nullptr);

// Draws batches of cfg.M accepted samples from the pooled corpus until the
// number of signatures with significance above cfg.epsilon stops moving by
// more than 1% between consecutive batches. Each sample carries the analysis
// facts of its host leaves as a StaticConfig annotation.
std::vector<PatternStats> mine(const std::vector<FormulaDag>& corpus, const MinerConfig& cfg);

// Text form: one `<signature> <count> <#configs>` line per pattern, with the
// `##`-joined annotated signatures on the matching line of the companion
// stream.
void write_pattern_stats(std::ostream& lines, std::ostream& config_lines,
                         const std::vector<PatternStats>& stats);
std::vector<PatternStats> read_pattern_stats(std::istream& lines, std::istream& config_lines);

}  // namespace simpforge
