#include "simpforge/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "simpforge/errors.hpp"
#include "simpforge/rng.hpp"

namespace simpforge {

namespace {

bool is_variable(const Node& n) {
  return n.op == OpKind::Source || n.op == OpKind::Ctrl;
}

// Can the subtree of `pat` at `p` stand for the subtree of `host` at `h`?
// Pattern variables name whole host subterms; a variable of the host is
// opaque, so only a pattern variable can cover it. `pairs` carries the
// remaining obligations, `binding` the variable assignments so far.
bool embed_seq(const FormulaDag& pat, const FormulaDag& host,
               std::vector<std::pair<NodeId, NodeId>> pairs,
               std::map<std::string, NodeId> binding) {
  while (!pairs.empty()) {
    auto [p, h] = pairs.back();
    pairs.pop_back();
    const Node& pn = pat.node(p);
    const Node& hn = host.node(h);
    if (is_variable(pn)) {
      if (pn.sort != hn.sort) return false;
      auto [it, fresh] = binding.emplace(pn.name, h);
      if (!fresh && it->second != h) return false;
      continue;
    }
    if (pn.op == OpKind::Const) {
      if (hn.op != OpKind::Const || hn.sort != pn.sort || hn.value != pn.value) return false;
      continue;
    }
    if (hn.op != pn.op || hn.sort != pn.sort || hn.operands.size() != pn.operands.size())
      return false;
    if (is_commutative(pn.op) && pn.operands.size() == 2 &&
        pn.operands[0] != pn.operands[1]) {
      auto swapped = pairs;
      swapped.emplace_back(pn.operands[0], hn.operands[1]);
      swapped.emplace_back(pn.operands[1], hn.operands[0]);
      if (embed_seq(pat, host, std::move(swapped), binding)) return true;
    }
    for (std::size_t i = 0; i < pn.operands.size(); ++i)
      pairs.emplace_back(pn.operands[i], hn.operands[i]);
  }
  return true;
}

// True when some non-leaf subtree of `pat` matches somewhere inside `host`.
bool patterns_overlap(const FormulaDag& pat, const FormulaDag& host) {
  for (NodeId p = 0; p < pat.nodes.size(); ++p) {
    if (is_leaf(pat.node(p).op)) continue;
    for (NodeId h = 0; h < host.nodes.size(); ++h) {
      if (is_leaf(host.node(h).op)) continue;
      if (embed_seq(pat, host, {{p, h}}, {})) return true;
    }
  }
  return false;
}

OpKind root_op(const RewriteRule& rule) {
  return rule.lhs.dag.node(rule.lhs.dag.roots.at(0)).op;
}

std::vector<std::size_t> perm_of(const TunerConfig& cfg,
                                 const std::vector<std::vector<std::size_t>>& groups,
                                 std::size_t g) {
  auto it = cfg.group_permutations.find(g);
  return it != cfg.group_permutations.end() ? it->second : groups[g];
}

nlohmann::json config_json(const TunerConfig& cfg, const std::vector<std::size_t>& active) {
  nlohmann::json perms = nlohmann::json::object();
  for (const auto& [g, perm] : cfg.group_permutations) perms[std::to_string(g)] = perm;
  return nlohmann::json{{"selected_count", cfg.selected_count},
                        {"group_permutations", std::move(perms)},
                        {"active", active}};
}

}  // namespace

std::vector<std::vector<std::size_t>> interaction_groups(
    const std::vector<RewriteRule>& rules) {
  std::size_t n = rules.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      bool linked = root_op(rules[i]) == root_op(rules[j]) ||
                    patterns_overlap(rules[i].lhs.dag, rules[j].lhs.dag) ||
                    patterns_overlap(rules[j].lhs.dag, rules[i].lhs.dag);
      if (linked) parent[find(i)] = find(j);
    }
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < n; ++i) by_root[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [root, members] : by_root) {
    std::sort(members.begin(), members.end());
    groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

std::vector<std::size_t> induced_order(const std::vector<RewriteRule>& rules,
                                       const TunerConfig& cfg) {
  std::size_t n = rules.size();
  if (cfg.selected_count > n)
    throw ValidationError("selected rule count exceeds the rule set");
  auto groups = interaction_groups(rules);
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), 0);
  for (const auto& [g, perm] : cfg.group_permutations) {
    if (g >= groups.size()) throw ValidationError("permutation names an unknown group");
    const auto& members = groups[g];
    if (perm.size() != members.size() ||
        !std::is_permutation(perm.begin(), perm.end(), members.begin()))
      throw ValidationError("group permutation must rearrange exactly the group's rules");
    for (std::size_t k = 0; k < members.size(); ++k) out[members[k]] = perm[k];
  }
  return out;
}

std::vector<std::size_t> active_rules(const std::vector<RewriteRule>& rules,
                                      const TunerConfig& cfg) {
  auto order = induced_order(rules, cfg);
  order.resize(cfg.selected_count);
  return order;
}

Metric simplified_size_metric(EvalOptions eval_opts, SimplifyLimits limits) {
  return [eval_opts, limits](const FormulaDag& dag, const Matcher& m) {
    return static_cast<double>(size_metric(simplify(dag, m, limits, nullptr, eval_opts)));
  };
}

Metric median_of(Metric inner, int repetitions) {
  if (repetitions < 1) throw ValidationError("median wrapper needs at least one draw");
  return [inner = std::move(inner), repetitions](const FormulaDag& dag, const Matcher& m) {
    std::vector<double> draws;
    draws.reserve(static_cast<std::size_t>(repetitions));
    for (int i = 0; i < repetitions; ++i) draws.push_back(inner(dag, m));
    std::sort(draws.begin(), draws.end());
    return draws[static_cast<std::size_t>(repetitions - 1) / 2];
  };
}

EvalReport fopt(const TunerConfig& cfg, const std::vector<RewriteRule>& rules,
                const std::vector<FormulaDag>& train, const Metric& metric,
                const FoptConfig& fc, const std::vector<double>* baselines) {
  if (baselines && baselines->size() != train.size())
    throw ValidationError("baseline list does not cover the benchmark set");
  // An empty active set means no rules at all; the compiler reads an empty
  // order as "everything", so it must not see one here.
  std::vector<std::size_t> active = active_rules(rules, cfg);
  Matcher tuned = active.empty() ? Matcher::compile({}) : Matcher::compile(rules, std::move(active));
  Matcher base = Matcher::compile({});

  EvalReport rep;
  rep.repetitions = fc.repetitions;
  rep.benchmarks.resize(train.size());
  auto eval_one = [&](std::size_t b) {
    BenchScore& s = rep.benchmarks[b];
    if (baselines) {
      s.baseline = (*baselines)[b];
      if (std::isnan(s.baseline)) s.failed = true;
    } else {
      try {
        s.baseline = metric(train[b], base);
      } catch (...) {
        s.failed = true;
      }
    }
    if (!s.failed) {
      try {
        s.tuned = metric(train[b], tuned);
      } catch (...) {
        s.failed = true;
      }
    }
    if (s.failed) {
      s.reward = -fc.penalty_factor;
      return;
    }
    double r = s.baseline > 0 ? (s.baseline - s.tuned) / s.baseline : 0.0;
    s.reward = r >= 0 ? r : fc.penalty_factor * r;
  };

  std::size_t workers = fc.workers ? fc.workers : std::thread::hardware_concurrency();
  workers = std::max<std::size_t>(1, std::min(workers, train.size()));
  if (workers <= 1) {
    for (std::size_t b = 0; b < train.size(); ++b) eval_one(b);
  } else {
    std::vector<std::future<void>> parts;
    for (std::size_t w = 0; w < workers; ++w)
      parts.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t b = w; b < train.size(); b += workers) eval_one(b);
      }));
    for (auto& p : parts) p.get();
  }

  double sum = 0;
  for (const BenchScore& s : rep.benchmarks) sum += s.reward;
  rep.score = train.empty() ? 0.0 : sum / static_cast<double>(train.size());
  return rep;
}

namespace {

TunerConfig random_config(Rng& rng, std::size_t n,
                          const std::vector<std::vector<std::size_t>>& groups) {
  TunerConfig cfg;
  cfg.selected_count = rng.below(n + 1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].size() < 2) continue;
    auto perm = groups[g];
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.below(i + 1)]);
    cfg.group_permutations[g] = std::move(perm);
  }
  return cfg;
}

TunerConfig neighbor(const TunerConfig& cur, Rng& rng, std::size_t n,
                     const std::vector<std::vector<std::size_t>>& groups) {
  bool any_multi = std::any_of(groups.begin(), groups.end(),
                               [](const auto& g) { return g.size() >= 2; });
  TunerConfig out = cur;
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::uint64_t move = rng.below(any_multi ? 5 : 2);
    switch (move) {
      case 0:
        if (out.selected_count < n) {
          ++out.selected_count;
          return out;
        }
        break;
      case 1:
        if (out.selected_count > 0) {
          --out.selected_count;
          return out;
        }
        break;
      default: {
        std::size_t g = rng.below(groups.size());
        if (groups[g].size() < 2) break;
        auto perm = perm_of(out, groups, g);
        if (move == 2) {
          std::size_t i = rng.below(perm.size() - 1);
          std::swap(perm[i], perm[i + 1]);
        } else {
          std::size_t i = rng.below(perm.size());
          std::size_t r = perm[i];
          perm.erase(perm.begin() + static_cast<std::ptrdiff_t>(i));
          if (move == 3) perm.insert(perm.begin(), r);  // pull into the prefix
          else perm.push_back(r);                       // push out of it
        }
        if (perm != perm_of(cur, groups, g)) {
          out.group_permutations[g] = std::move(perm);
          return out;
        }
        break;
      }
    }
  }
  // Every attempted move was a no-op; flip the prefix length as a last resort.
  if (out.selected_count > 0) --out.selected_count;
  else if (n > 0) ++out.selected_count;
  return out;
}

}  // namespace

TuneResult tune(const std::vector<RewriteRule>& rules,
                const std::vector<FormulaDag>& train, const Metric& metric,
                std::size_t budget, std::uint64_t seed, const TuneOptions& opts) {
  if (budget == 0) throw ValidationError("tuning budget must allow at least one evaluation");
  auto groups = interaction_groups(rules);
  Rng rng(seed);

  TuneResult best;
  std::size_t used = 0;
  std::vector<double> baselines;

  auto log_line = [&](const TunerConfig& cfg, const EvalReport& rep) {
    if (!opts.log) return;
    nlohmann::json j{{"config", config_json(cfg, active_rules(rules, cfg))},
                     {"score", rep.score}};
    nlohmann::json rewards = nlohmann::json::array();
    nlohmann::json failed = nlohmann::json::array();
    for (const BenchScore& s : rep.benchmarks) {
      rewards.push_back(s.reward);
      failed.push_back(s.failed);
    }
    j["rewards"] = std::move(rewards);
    j["failed"] = std::move(failed);
    *opts.log << j.dump() << std::endl;
  };

  // The empty configuration anchors the search: its report supplies the
  // per-benchmark baselines, and the result never scores below it.
  TunerConfig empty;
  best.config = empty;
  best.report = fopt(empty, rules, train, metric, opts.fopt);
  ++used;
  log_line(empty, best.report);
  baselines.reserve(train.size());
  for (const BenchScore& s : best.report.benchmarks)
    baselines.push_back(s.failed ? std::numeric_limits<double>::quiet_NaN() : s.baseline);

  auto evaluate = [&](const TunerConfig& cfg) {
    EvalReport rep = fopt(cfg, rules, train, metric, opts.fopt, &baselines);
    ++used;
    log_line(cfg, rep);
    if (rep.score > best.report.score) {
      best.config = cfg;
      best.report = rep;
    }
    return rep;
  };

  while (used < budget && !rules.empty()) {
    TunerConfig cur = random_config(rng, rules.size(), groups);
    EvalReport cur_rep = evaluate(cur);
    std::size_t stale = 0;
    while (used < budget && stale < opts.stagnation) {
      TunerConfig cand = neighbor(cur, rng, rules.size(), groups);
      EvalReport cand_rep = evaluate(cand);
      if (cand_rep.score > cur_rep.score) {
        cur = std::move(cand);
        cur_rep = std::move(cand_rep);
        stale = 0;
      } else {
        ++stale;
      }
    }
  }

  best.evaluations = used;
  return best;
}

void write_order_manifest(const std::filesystem::path& path,
                          const std::vector<std::size_t>& order) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write rule order manifest: " + path.string());
  for (std::size_t id : order) out << id << '\n';
  if (!out.flush()) throw FormatError("cannot write rule order manifest: " + path.string());
}

std::vector<std::size_t> read_order_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read rule order manifest: " + path.string());
  std::vector<std::size_t> order;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(line, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != line.size())
      throw FormatError("rule order manifest line " + std::to_string(line_no) +
                        " is not a rule id");
    order.push_back(static_cast<std::size_t>(v));
  }
  return order;
}

}  // namespace simpforge
