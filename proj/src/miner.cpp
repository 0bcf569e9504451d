#include <simpforge/miner.hpp>

#include <simpforge/errors.hpp>

#include <algorithm>
#include <future>
#include <istream>
#include <ostream>
#include <sstream>

namespace simpforge {

namespace {

constexpr std::size_t kShards = 8;
constexpr std::size_t kMaxBatches = 1000;
constexpr NodeId kNull = kNoNode;

// The smallest-id-first growth order for a collected set; a sampled growth
// sequence is accepted only when it equals this one, so each set keeps exactly
// one accepted ordering and the per-set probability stays order-independent.
std::vector<NodeId> canonical_growth(const FormulaDag& dag, const std::vector<NodeId>& members) {
  std::set<NodeId> want(members.begin(), members.end());
  std::vector<NodeId> seq{members[0]};
  std::set<NodeId> have{members[0]};
  while (seq.size() < members.size()) {
    NodeId next = kNull;
    for (NodeId m : seq)
      for (NodeId c : dag.nodes[m].operands)
        if (want.count(c) && !have.count(c) && (next == kNull || c < next)) next = c;
    seq.push_back(next);
    have.insert(next);
  }
  return seq;
}

}  // namespace

std::optional<Pattern> sample_pattern_at(const FormulaDag& dag, NodeId start,
                                         std::size_t N, std::size_t T, Rng& rng,
                                         std::map<std::string, NodeId>* leaf_hosts,
                                         std::vector<NodeId>* members) {
  if (start >= dag.nodes.size() || is_leaf(dag.nodes[start].op)) return std::nullopt;

  std::vector<NodeId> nodes{start};
  std::set<NodeId> collected{start};
  // The slot through which each non-start node entered; it is the one edge per
  // node that never re-enters the boundary list.
  std::map<NodeId, std::pair<NodeId, std::size_t>> entry;

  while (nodes.size() < N) {
    std::vector<NodeId> slots;  // kNull marks a shadow slot
    std::set<NodeId> on_boundary;
    for (NodeId m : nodes) {
      const Node& n = dag.nodes[m];
      for (std::size_t j = 0; j < n.operands.size(); ++j) {
        NodeId t = n.operands[j];
        auto it = entry.find(t);
        if (it != entry.end() && it->second == std::make_pair(m, j)) continue;
        if (is_leaf(dag.nodes[t].op) || collected.count(t) || !on_boundary.insert(t).second) {
          slots.push_back(kNull);
        } else {
          slots.push_back(t);
        }
      }
    }
    std::size_t want = nodes.size() * (T - 1) + 1;
    if (slots.size() > want)
      throw ValidationError("node in-degree exceeds the configured bound");
    slots.resize(want, kNull);

    NodeId picked = slots[rng.below(slots.size())];
    if (picked == kNull) return std::nullopt;
    // Recover the slot it came through for the entry-edge bookkeeping.
    for (NodeId m : nodes) {
      const Node& n = dag.nodes[m];
      bool found = false;
      for (std::size_t j = 0; j < n.operands.size() && !found; ++j)
        if (n.operands[j] == picked) {
          entry[picked] = {m, j};
          found = true;
        }
      if (found) break;
    }
    nodes.push_back(picked);
    collected.insert(picked);
  }

  if (nodes != canonical_growth(dag, nodes)) return std::nullopt;
  if (members) *members = nodes;
  return extract_pattern(dag, nodes, start, leaf_hosts);
}

std::optional<Pattern> sample_pattern(const FormulaDag& dag, std::size_t N, std::size_t T,
                                      Rng& rng, std::map<std::string, NodeId>* leaf_hosts) {
  if (dag.nodes.empty()) return std::nullopt;
  NodeId start = static_cast<NodeId>(rng.below(dag.nodes.size()));
  return sample_pattern_at(dag, start, N, T, rng, leaf_hosts);
}

namespace {

struct ShardResult {
  std::map<std::string, std::uint64_t> counts;
  std::map<std::string, std::set<std::string>> configs;
};

ShardResult run_shard(const std::vector<FormulaDag>& corpus,
                      const std::vector<std::vector<AbstractValue>>& facts,
                      const std::vector<std::size_t>& node_cum, const MinerConfig& cfg,
                      std::size_t batch, std::size_t shard, std::size_t quota) {
  ShardResult out;
  Rng rng = Rng(cfg.seed).fork(batch * kShards + shard);
  std::size_t total_nodes = node_cum.back();
  std::size_t accepted = 0;
  while (accepted < quota) {
    std::size_t u = rng.below(total_nodes);
    std::size_t d = static_cast<std::size_t>(
        std::upper_bound(node_cum.begin(), node_cum.end(), u) - node_cum.begin() - 1);
    NodeId start = static_cast<NodeId>(u - node_cum[d]);

    std::map<std::string, NodeId> leaf_hosts;
    auto p = sample_pattern_at(corpus[d], start, cfg.N, cfg.T, rng, &leaf_hosts);
    if (!p) continue;
    ++accepted;

    StaticConfig config;
    for (const auto& [name, host] : leaf_hosts) config[name] = facts[d][host];
    out.counts[p->sig] += 1;
    out.configs[p->sig].insert(annotated_signature(*p, config));
  }
  return out;
}

}  // namespace

std::vector<PatternStats> mine(const std::vector<FormulaDag>& corpus, const MinerConfig& cfg) {
  if (corpus.empty()) throw ConfigError("mining needs a nonempty corpus");
  if (cfg.N < 2) throw ConfigError("pattern size must be at least 2");
  if (cfg.M < 1) throw ConfigError("batch size must be at least 1");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
    throw ConfigError("significance threshold must be in (0,1)");
  if (cfg.T < 2) throw ConfigError("in-degree bound must be at least 2");
  for (const FormulaDag& dag : corpus)
    for (const Node& n : dag.nodes)
      if (n.operands.size() > cfg.T)
        throw ConfigError("corpus node in-degree exceeds the configured bound");

  std::vector<std::vector<AbstractValue>> facts;
  std::vector<std::size_t> node_cum{0};
  for (const FormulaDag& dag : corpus) {
    facts.push_back(analyze(dag));
    node_cum.push_back(node_cum.back() + dag.nodes.size());
  }

  std::map<std::string, std::uint64_t> counts;
  std::map<std::string, std::set<std::string>> configs;
  std::uint64_t total = 0;
  std::size_t prev_above = 0;

  for (std::size_t batch = 0; batch < kMaxBatches; ++batch) {
    std::vector<std::future<ShardResult>> jobs;
    for (std::size_t s = 0; s < kShards; ++s) {
      std::size_t quota = cfg.M / kShards + (s < cfg.M % kShards ? 1 : 0);
      jobs.push_back(std::async(std::launch::async, run_shard, std::cref(corpus),
                                std::cref(facts), std::cref(node_cum), std::cref(cfg), batch,
                                s, quota));
    }
    for (auto& job : jobs) {
      ShardResult r = job.get();
      for (const auto& [sig, c] : r.counts) counts[sig] += c;
      for (const auto& [sig, cs] : r.configs) configs[sig].insert(cs.begin(), cs.end());
    }
    total += cfg.M;

    std::size_t above = 0;
    for (const auto& [sig, c] : counts)
      if (static_cast<double>(c) / static_cast<double>(total) > cfg.epsilon) ++above;
    std::size_t change = above > prev_above ? above - prev_above : prev_above - above;
    bool converged = batch >= 1 && change * 100 <= prev_above;
    prev_above = above;
    if (converged) break;
  }

  std::vector<PatternStats> stats;
  for (const auto& [sig, c] : counts) {
    PatternStats ps;
    ps.signature = sig;
    ps.count = c;
    ps.significance = static_cast<double>(c) / static_cast<double>(total);
    ps.configs = configs[sig];
    stats.push_back(std::move(ps));
  }
  std::sort(stats.begin(), stats.end(), [](const PatternStats& a, const PatternStats& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.signature < b.signature;
  });
  return stats;
}

void write_pattern_stats(std::ostream& lines, std::ostream& config_lines,
                         const std::vector<PatternStats>& stats) {
  for (const PatternStats& ps : stats) {
    lines << ps.signature << ' ' << ps.count << ' ' << ps.configs.size() << '\n';
    bool first = true;
    for (const std::string& c : ps.configs) {
      if (!first) config_lines << "##";
      config_lines << c;
      first = false;
    }
    config_lines << '\n';
  }
}

std::vector<PatternStats> read_pattern_stats(std::istream& lines, std::istream& config_lines) {
  std::vector<PatternStats> stats;
  std::uint64_t total = 0;
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    PatternStats ps;
    std::size_t n_configs = 0;
    if (!(fields >> ps.signature >> ps.count >> n_configs))
      throw FormatError("pattern stats: bad line '" + line + "'");

    std::string config_line;
    if (!std::getline(config_lines, config_line))
      throw FormatError("pattern stats: missing config line for '" + ps.signature + "'");
    for (std::size_t at = 0; at < config_line.size();) {
      std::size_t cut = config_line.find("##", at);
      if (cut == std::string::npos) cut = config_line.size();
      if (cut > at) ps.configs.insert(config_line.substr(at, cut - at));
      at = cut + 2;
    }
    if (ps.configs.size() != n_configs)
      throw FormatError("pattern stats: config count mismatch for '" + ps.signature + "'");
    total += ps.count;
    stats.push_back(std::move(ps));
  }
  for (PatternStats& ps : stats)
    ps.significance = total == 0 ? 0.0 : static_cast<double>(ps.count) / static_cast<double>(total);
  return stats;
}

}  // namespace simpforge
