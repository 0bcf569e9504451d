#include "simpforge/synth.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <string_view>
#include <thread>

namespace simpforge {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

bool is_variable(const Node& n) { return n.op == OpKind::Source || n.op == OpKind::Ctrl; }

std::map<std::string, Sort> leaf_sorts(const FormulaDag& dag) {
  std::map<std::string, Sort> out;
  for (const Node& n : dag.nodes)
    if (is_variable(n)) out.emplace(n.name, n.sort);
  return out;
}

void render_term(const std::vector<Node>& nodes, NodeId id, std::string& out) {
  const Node& n = nodes[id];
  if (is_variable(n)) {
    out += "(S:";
    out += n.name;
    out += ':';
    out += sort_token(n.sort);
    out += ')';
    return;
  }
  if (n.op == OpKind::Const) {
    out += "(CONST:";
    out += std::to_string(n.value);
    out += ':';
    out += sort_token(n.sort);
    out += ')';
    return;
  }
  out += '(';
  out += op_token(n.op);
  out += '|';
  for (NodeId o : n.operands) {
    render_term(nodes, o, out);
    out += '|';
  }
  out += ')';
}

std::string render_root(const FormulaDag& dag) {
  std::string out;
  render_term(dag.nodes, dag.roots.at(0), out);
  return out;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > UINT64_MAX / b) return UINT64_MAX;
  return a * b;
}

std::uint64_t sort_domain(Sort s, int width, int array_len) {
  std::uint64_t scalar = s == Sort::Bool || (is_array(s) && elem_sort(s) == Sort::Bool)
                             ? 2
                             : (1ull << width);
  if (!is_array(s)) return scalar;
  std::uint64_t total = 1;
  for (int i = 0; i < array_len; ++i) total = sat_mul(total, scalar);
  return total;
}

// ---- bounded verification ----

struct EnvVar {
  std::string name;
  Sort sort;
  std::uint64_t count;
};

std::vector<EnvVar> env_vars(const std::map<std::string, Sort>& sorts, int width, int array_len) {
  std::vector<EnvVar> vars;
  for (const auto& [name, sort] : sorts)
    vars.push_back({name, sort, sort_domain(sort, width, array_len)});
  return vars;
}

Value decode_value(const EnvVar& v, std::uint64_t idx, int width, int array_len) {
  auto scalar = [&](Sort s, std::uint64_t i) {
    return s == Sort::Bool ? static_cast<std::int64_t>(i)
                           : int_min_for(width) + static_cast<std::int64_t>(i);
  };
  if (!is_array(v.sort)) return scalar(v.sort, idx);
  Sort es = elem_sort(v.sort);
  std::uint64_t base = es == Sort::Bool ? 2 : (1ull << width);
  std::vector<std::int64_t> elems(array_len);
  for (int i = 0; i < array_len; ++i) {
    elems[i] = scalar(es, idx % base);
    idx /= base;
  }
  return elems;
}

bool roots_agree(const RewriteRule& rule, const Environment& env, const EvalOptions& opts) {
  Value a = eval_node(rule.lhs.dag, rule.lhs.dag.roots.at(0), env, opts);
  Value b = eval_node(rule.rhs, rule.rhs.roots.at(0), env, opts);
  return a == b;
}

std::map<std::string, std::int64_t> scalar_view(const Environment& env) {
  std::map<std::string, std::int64_t> vals;
  for (const auto& [name, value] : env)
    if (const std::int64_t* v = std::get_if<std::int64_t>(&value)) vals.emplace(name, *v);
  return vals;
}

}  // namespace

bool verify_rule_sampled(const RewriteRule& rule, int width, std::size_t envs, Rng& rng,
                         const SynthConfig& cfg, std::uint64_t* checked_out) {
  if (checked_out) *checked_out = 0;
  std::map<std::string, Sort> sorts = leaf_sorts(rule.lhs.dag);
  EvalOptions opts;
  opts.int_bits = width;
  opts.array_len = cfg.array_len;
  std::int64_t lo = int_min_for(width), hi = int_max_for(width);

  // Collapse equality atoms before drawing so tight guards stay reachable:
  // variables joined by = share one draw, = against a constant pins it.
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& v) -> std::string {
    auto it = parent.find(v);
    if (it == parent.end() || it->second == v) return v;
    return it->second = find(it->second);
  };
  std::map<std::string, std::int64_t> pinned;
  bool guard_empty = false;
  auto pin = [&](const std::string& rep, std::int64_t value) {
    auto [it, fresh] = pinned.emplace(rep, value);
    if (!fresh && it->second != value) guard_empty = true;
  };
  for (const Atom& a : rule.pred.atoms) {
    if (a.rel != Rel::Eq) continue;
    if (a.rhs_is_const) {
      pin(find(a.lhs), a.rhs_const);
      continue;
    }
    std::string ra = find(a.lhs), rb = find(a.rhs_var);
    if (ra == rb) continue;
    parent[rb] = ra;
    auto moved = pinned.find(rb);
    if (moved != pinned.end()) {
      std::int64_t value = moved->second;
      pinned.erase(moved);
      pin(ra, value);
    }
  }
  for (auto& [v, value] : pinned) {
    Sort s = sorts.count(v) ? sorts.at(v) : Sort::Int;
    std::int64_t vlo = s == Sort::Bool ? 0 : lo, vhi = s == Sort::Bool ? 1 : hi;
    if (value < vlo || value > vhi) guard_empty = true;
  }
  if (guard_empty) return true;  // no width-bounded environment satisfies the guard

  std::uint64_t checked = 0;
  std::size_t attempts = 40 * envs;
  while (attempts-- > 0 && checked < envs) {
    std::map<std::string, std::int64_t> draw;
    Environment env;
    for (const auto& [name, sort] : sorts) {
      if (is_array(sort)) {
        Sort es = elem_sort(sort);
        std::vector<std::int64_t> elems(cfg.array_len);
        for (auto& e : elems) e = es == Sort::Bool ? rng.range(0, 1) : rng.range(lo, hi);
        env[name] = std::move(elems);
        continue;
      }
      std::string rep = find(name);
      auto it = draw.find(rep);
      if (it == draw.end()) {
        auto pin = pinned.find(rep);
        std::int64_t v = pin != pinned.end()
                             ? pin->second
                             : (sort == Sort::Bool ? rng.range(0, 1) : rng.range(lo, hi));
        it = draw.emplace(rep, v).first;
      }
      env[name] = it->second;
    }
    if (!eval_predicate(rule.pred, scalar_view(env))) continue;
    ++checked;
    if (checked_out) *checked_out = checked;
    if (!roots_agree(rule, env, opts)) return false;
  }
  return checked == envs;
}

bool verify_rule(const RewriteRule& rule, int width, const SynthConfig& cfg,
                 VerifyStats* stats) {
  std::map<std::string, Sort> sorts = leaf_sorts(rule.lhs.dag);
  std::vector<EnvVar> vars = env_vars(sorts, width, cfg.array_len);
  std::uint64_t total = 1;
  for (const EnvVar& v : vars) total = sat_mul(total, v.count);

  if (total > cfg.exhaustive_cap) {
    Rng rng(mix_seed(cfg.seed, fnv1a(to_string(rule.pred)) ^ static_cast<std::uint64_t>(width)));
    std::uint64_t checked = 0;
    bool ok = verify_rule_sampled(rule, width, cfg.random_checks, rng, cfg, &checked);
    if (stats) {
      stats->exhaustive = false;
      stats->checked = checked;
    }
    return ok;
  }

  EvalOptions opts;
  opts.int_bits = width;
  opts.array_len = cfg.array_len;
  std::uint64_t checked = 0;
  std::vector<std::uint64_t> digits(vars.size(), 0);
  for (;;) {
    Environment env;
    for (std::size_t i = 0; i < vars.size(); ++i)
      env[vars[i].name] = decode_value(vars[i], digits[i], width, cfg.array_len);
    if (eval_predicate(rule.pred, scalar_view(env))) {
      ++checked;
      if (!roots_agree(rule, env, opts)) {
        if (stats) stats->checked = checked;
        return false;
      }
    }
    std::size_t pos = 0;
    while (pos < digits.size() && ++digits[pos] == vars[pos].count) digits[pos++] = 0;
    if (pos == digits.size()) break;
  }
  if (stats) {
    stats->exhaustive = true;
    stats->checked = checked;
  }
  return true;
}

// ---- candidate guards ----

std::vector<Predicate> enumerate_predicates(const Pattern& lhs,
                                            const std::vector<StaticConfig>& configs,
                                            const SynthConfig& cfg, bool* truncated) {
  if (truncated) *truncated = false;
  std::vector<std::pair<std::string, Sort>> vars;
  for (const auto& [name, sort] : leaf_sorts(lhs.dag))
    if (is_scalar(sort)) vars.emplace_back(name, sort);

  std::set<std::int64_t> pool(cfg.const_pool.begin(), cfg.const_pool.end());
  for (const Node& n : lhs.dag.nodes)
    if (n.op == OpKind::Const && is_scalar(n.sort)) pool.insert(n.value);

  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = i + 1; j < vars.size(); ++j) {
      if (vars[i].second != vars[j].second) continue;
      atoms.push_back(make_atom(vars[i].first, Rel::Eq, vars[j].first));
      atoms.push_back(make_atom(vars[i].first, Rel::Ne, vars[j].first));
      if (vars[i].second == Sort::Int) {
        atoms.push_back(make_atom(vars[i].first, Rel::Lt, vars[j].first));
        atoms.push_back(make_atom(vars[j].first, Rel::Lt, vars[i].first));
        atoms.push_back(make_atom(vars[i].first, Rel::Le, vars[j].first));
        atoms.push_back(make_atom(vars[j].first, Rel::Le, vars[i].first));
      }
    }
    for (std::int64_t c : pool) {
      if (vars[i].second == Sort::Bool) {
        if (c != 0 && c != 1) continue;
        atoms.push_back(make_atom(vars[i].first, Rel::Eq, c));
        atoms.push_back(make_atom(vars[i].first, Rel::Ne, c));
      } else {
        atoms.push_back(make_atom(vars[i].first, Rel::Eq, c));
        atoms.push_back(make_atom(vars[i].first, Rel::Ne, c));
        atoms.push_back(make_atom(vars[i].first, Rel::Lt, c));
        atoms.push_back(make_atom(vars[i].first, Rel::Le, c));
      }
    }
  }

  std::set<Predicate> keep;
  keep.insert(Predicate::truth());
  bool full = false;
  auto admit = [&](Predicate p) {
    if (keep.size() >= cfg.max_predicates) {
      full = true;
      return;
    }
    keep.insert(std::move(p));
  };
  for (const StaticConfig& config : configs) {
    std::vector<std::size_t> implied;
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (implies(config, make_predicate({atoms[i]})) == Tri::True) implied.push_back(i);
    for (std::size_t a = 0; a < implied.size() && !full; ++a) {
      admit(make_predicate({atoms[implied[a]]}));
      for (std::size_t b = a + 1; b < implied.size() && !full; ++b)
        admit(make_predicate({atoms[implied[a]], atoms[implied[b]]}));
    }
  }
  if (truncated) *truncated = full;
  return {keep.begin(), keep.end()};
}

// ---- implication graph ----

namespace {

struct CompiledAtom {
  std::size_t l = 0;
  Rel rel = Rel::Eq;
  bool rhs_is_const = false;
  std::size_t r = 0;
  std::int64_t c = 0;
};

bool eval_compiled(const CompiledAtom& a, const std::vector<std::int64_t>& vals) {
  std::int64_t l = vals[a.l];
  std::int64_t r = a.rhs_is_const ? a.c : vals[a.r];
  switch (a.rel) {
    case Rel::Eq: return l == r;
    case Rel::Ne: return l != r;
    case Rel::Lt: return l < r;
    case Rel::Le: return l <= r;
  }
  return false;
}

std::vector<CompiledAtom> compile_atoms(const Predicate& p,
                                        const std::map<std::string, std::size_t>& index) {
  std::vector<CompiledAtom> out;
  for (const Atom& a : p.atoms) {
    CompiledAtom ca;
    ca.l = index.at(a.lhs);
    ca.rel = a.rel;
    ca.rhs_is_const = a.rhs_is_const;
    if (a.rhs_is_const)
      ca.c = a.rhs_const;
    else
      ca.r = index.at(a.rhs_var);
    out.push_back(ca);
  }
  return out;
}

// a => b over every valuation of their variables in the width-bounded domain
bool implies_bounded(const Predicate& a, const Predicate& b, int width,
                     const std::map<std::string, Sort>& var_sorts) {
  std::map<std::string, std::size_t> index;
  std::vector<std::int64_t> lows;
  std::vector<std::uint64_t> counts;
  auto add_vars = [&](const Predicate& p) {
    for (const std::string& v : predicate_variables(p)) {
      if (index.count(v)) continue;
      auto it = var_sorts.find(v);
      if (it == var_sorts.end()) throw ValidationError("guard variable has no sort: " + v);
      index.emplace(v, index.size());
      lows.push_back(it->second == Sort::Bool ? 0 : int_min_for(width));
      counts.push_back(it->second == Sort::Bool ? 2 : (1ull << width));
    }
  };
  add_vars(a);
  add_vars(b);
  std::vector<CompiledAtom> ca = compile_atoms(a, index), cb = compile_atoms(b, index);

  std::vector<std::uint64_t> digits(index.size(), 0);
  std::vector<std::int64_t> vals(index.size(), 0);
  for (;;) {
    for (std::size_t i = 0; i < vals.size(); ++i)
      vals[i] = lows[i] + static_cast<std::int64_t>(digits[i]);
    bool premise = true;
    for (const CompiledAtom& atom : ca)
      if (!eval_compiled(atom, vals)) {
        premise = false;
        break;
      }
    if (premise)
      for (const CompiledAtom& atom : cb)
        if (!eval_compiled(atom, vals)) return false;
    std::size_t pos = 0;
    while (pos < digits.size() && ++digits[pos] == counts[pos]) digits[pos++] = 0;
    if (pos == digits.size()) break;
  }
  return true;
}

}  // namespace

ImplicationGraph build_implication_graph(const std::vector<Predicate>& preds,
                                         const SynthConfig& cfg,
                                         const std::map<std::string, Sort>& var_sorts) {
  std::set<Predicate> uniq;
  for (const Predicate& p : preds) uniq.insert(canonical(p));
  std::vector<Predicate> ps(uniq.begin(), uniq.end());
  std::size_t n = ps.size();
  for (const Predicate& p : ps)
    for (const std::string& v : predicate_variables(p))
      if (!var_sorts.count(v)) throw ValidationError("guard variable has no sort: " + v);

  std::vector<std::vector<bool>> imp(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (ps[j].is_true())
        imp[i][j] = true;
      else
        imp[i][j] = implies_bounded(ps[i], ps[j], cfg.oracle_width, var_sorts);
    }

  // collapse equivalence classes onto their shortest spelling (ties already
  // broken by the sorted input order)
  std::vector<std::size_t> cls(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = i;
    for (std::size_t j = 0; j < i; ++j)
      if (imp[i][j] && imp[j][i]) {
        cls[i] = cls[j];
        break;
      }
  }
  std::map<std::size_t, std::size_t> chosen;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = chosen.emplace(cls[i], i);
    if (!fresh && ps[i].atoms.size() < ps[it->second].atoms.size()) it->second = i;
  }
  ImplicationGraph g;
  std::vector<std::size_t> dense(n, n);
  std::vector<std::size_t> reps;
  for (const auto& [head, member] : chosen) reps.push_back(member);
  std::sort(reps.begin(), reps.end(),
            [&](std::size_t a, std::size_t b) { return ps[a] < ps[b]; });
  for (std::size_t r : reps) {
    dense[r] = g.preds.size();
    g.preds.push_back(ps[r]);
  }
  g.weaker.assign(g.preds.size(), {});
  for (std::size_t a : reps)
    for (std::size_t b : reps)
      if (a != b && imp[a][b]) g.weaker[dense[a]].insert(dense[b]);
  return g;
}

// ---- replacement search ----

namespace {

struct BaseTerm {
  Sort sort;
  bool is_const = false;
  std::string name;
  std::int64_t value = 0;
};

struct ChainStep {
  OpKind op = OpKind::Not;
  Sort sort = Sort::Bool;
  std::vector<std::size_t> operands;  // indices into base terms + earlier steps
};

// Operand sort templates per operation; Eq/ArrAcc/array ops branch on the
// scalar or element sort involved.
std::vector<std::pair<Sort, std::vector<Sort>>> op_shapes(OpKind op, std::size_t arity) {
  switch (op) {
    case OpKind::Not: return {{Sort::Bool, {Sort::Bool}}};
    case OpKind::And:
    case OpKind::Or:
    case OpKind::Xor: return {{Sort::Bool, {Sort::Bool, Sort::Bool}}};
    case OpKind::Neg: return {{Sort::Int, {Sort::Int}}};
    case OpKind::Plus:
    case OpKind::Times:
    case OpKind::Div:
    case OpKind::Mod: return {{Sort::Int, {Sort::Int, Sort::Int}}};
    case OpKind::Eq:
      return {{Sort::Bool, {Sort::Bool, Sort::Bool}}, {Sort::Bool, {Sort::Int, Sort::Int}}};
    case OpKind::Lt: return {{Sort::Bool, {Sort::Int, Sort::Int}}};
    case OpKind::ArrAcc: {
      std::vector<std::pair<Sort, std::vector<Sort>>> shapes;
      for (Sort s : {Sort::Bool, Sort::Int}) {
        std::vector<Sort> operands{Sort::Int};
        operands.insert(operands.end(), arity - 1, s);
        shapes.push_back({s, std::move(operands)});
      }
      return shapes;
    }
    case OpKind::ArrRead:
      return {{Sort::Bool, {Sort::Int, Sort::BoolArr}}, {Sort::Int, {Sort::Int, Sort::IntArr}}};
    case OpKind::ArrWrite:
      return {{Sort::BoolArr, {Sort::BoolArr, Sort::Int, Sort::Bool}},
              {Sort::IntArr, {Sort::IntArr, Sort::Int, Sort::Int}}};
    case OpKind::ArrCreate: {
      std::vector<std::pair<Sort, std::vector<Sort>>> shapes;
      for (Sort s : {Sort::Bool, Sort::Int})
        shapes.push_back({array_sort(s), std::vector<Sort>(arity, s)});
      return shapes;
    }
    default: return {};
  }
}

struct Candidate {
  FormulaDag dag;
  std::string key;
};

class ChainGenerator {
 public:
  ChainGenerator(const FormulaDag& lhs, Sort root_sort, const SynthConfig& cfg)
      : root_sort_(root_sort), budget_(cfg.candidate_budget) {
    for (const Node& n : lhs.nodes)
      if (is_variable(n)) {
        bool seen = false;
        for (const BaseTerm& t : base_)
          if (!t.is_const && t.name == n.name) seen = true;
        if (!seen) base_.push_back({n.sort, false, n.name, 0});
      }
    std::set<std::int64_t> pool(cfg.const_pool.begin(), cfg.const_pool.end());
    for (const Node& n : lhs.nodes)
      if (n.op == OpKind::Const && is_scalar(n.sort)) pool.insert(n.value);
    for (std::int64_t c : pool) {
      if (c == 0 || c == 1) base_.push_back({Sort::Bool, true, {}, c});
      base_.push_back({Sort::Int, true, {}, c});
    }
    for (const Node& n : lhs.nodes)
      if (!is_leaf(n.op) && n.op != OpKind::Assert) allowed_.insert({n.op, n.operands.size()});
  }

  // all chains of exactly k operations, deduplicated and sorted by key
  std::vector<Candidate> generate(std::size_t k, bool* truncated) {
    k_ = k;
    steps_.clear();
    out_.clear();
    seen_.clear();
    truncated_ = false;
    if (k == 0) {
      for (std::size_t t = 0; t < base_.size(); ++t)
        if (base_[t].sort == root_sort_) emit_leaf(t);
    } else {
      extend();
    }
    if (truncated) *truncated = *truncated || truncated_;
    std::sort(out_.begin(), out_.end(),
              [](const Candidate& a, const Candidate& b) { return a.key < b.key; });
    return std::move(out_);
  }

  std::uint64_t emitted = 0;

 private:
  void emit_leaf(std::size_t t) {
    DagBuilder b;
    NodeId id = add_base(b, t);
    finish(b.freeze({id}));
  }

  void extend() {
    if (truncated_) return;
    std::size_t depth = steps_.size();
    std::size_t term_count = base_.size() + depth;
    for (const auto& [op, arity] : allowed_) {
      for (const auto& [result, operand_sorts] : op_shapes(op, arity)) {
        if (depth + 1 == k_ && result != root_sort_) continue;
        ChainStep step;
        step.op = op;
        step.sort = result;
        step.operands.assign(arity, 0);
        pick_operands(step, operand_sorts, 0, term_count);
        if (truncated_) return;
      }
    }
  }

  void pick_operands(ChainStep& step, const std::vector<Sort>& operand_sorts, std::size_t pos,
                     std::size_t term_count) {
    if (truncated_) return;
    if (pos == step.operands.size()) {
      steps_.push_back(step);
      if (steps_.size() == k_)
        try_emit();
      else
        extend();
      steps_.pop_back();
      return;
    }
    // commutative pairs only in nondecreasing operand order
    std::size_t start = 0;
    if (pos == 1 && is_commutative(step.op) && operand_sorts[0] == operand_sorts[1])
      start = step.operands[0];
    for (std::size_t t = start; t < term_count; ++t) {
      if (term_sort(t) != operand_sorts[pos]) continue;
      step.operands[pos] = t;
      pick_operands(step, operand_sorts, pos + 1, term_count);
      if (truncated_) return;
    }
  }

  Sort term_sort(std::size_t t) const {
    return t < base_.size() ? base_[t].sort : steps_[t - base_.size()].sort;
  }

  void try_emit() {
    // every intermediate step must feed a later one
    std::vector<bool> used(k_, false);
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t o : steps_[i].operands)
        if (o >= base_.size()) used[o - base_.size()] = true;
    for (std::size_t i = 0; i + 1 < k_; ++i)
      if (!used[i]) return;

    DagBuilder b;
    std::vector<NodeId> base_ids(base_.size(), kNoNode);
    std::vector<NodeId> step_ids;
    for (const ChainStep& step : steps_) {
      std::vector<NodeId> operands;
      for (std::size_t o : step.operands) {
        if (o < base_.size()) {
          if (base_ids[o] == kNoNode) base_ids[o] = add_base(b, o);
          operands.push_back(base_ids[o]);
        } else {
          operands.push_back(step_ids[o - base_.size()]);
        }
      }
      std::size_t before = b.size();
      NodeId id = b.add(step.op, step.sort, std::move(operands));
      if (b.size() == before) return;  // collapsed into an earlier step: duplicate
      step_ids.push_back(id);
    }
    finish(b.freeze({step_ids.back()}));
  }

  NodeId add_base(DagBuilder& b, std::size_t t) {
    const BaseTerm& bt = base_[t];
    return bt.is_const ? b.add_const(bt.sort, bt.value) : b.add_source(bt.sort, bt.name);
  }

  void finish(FormulaDag dag) {
    if (emitted >= budget_) {
      truncated_ = true;
      return;
    }
    std::string key = render_root(dag);
    if (!seen_.insert(key).second) return;
    ++emitted;
    out_.push_back({std::move(dag), std::move(key)});
  }

  Sort root_sort_;
  std::uint64_t budget_;
  std::vector<BaseTerm> base_;
  std::set<std::pair<OpKind, std::size_t>> allowed_;
  std::size_t k_ = 0;
  std::vector<ChainStep> steps_;
  std::vector<Candidate> out_;
  std::set<std::string> seen_;
  bool truncated_ = false;
};

}  // namespace

SynthOutcome synth_rhs(const Pattern& lhs, const Predicate& pred, const SynthConfig& cfg) {
  SynthOutcome out;
  const FormulaDag& L = lhs.dag;
  std::size_t lhs_ops = op_count(L);
  if (lhs_ops == 0) return out;
  std::size_t k_cap = std::min(cfg.k_max, lhs_ops - 1);
  Sort root_sort = L.node(L.roots.at(0)).sort;

  Rng recheck_rng(mix_seed(cfg.seed, fnv1a(lhs.sig) ^ fnv1a(to_string(pred))));
  ChainGenerator gen(L, root_sort, cfg);
  for (std::size_t k = 0; k <= k_cap; ++k) {
    std::vector<Candidate> candidates = gen.generate(k, &out.truncated);
    for (Candidate& cand : candidates) {
      ++out.candidates;
      RewriteRule rule;
      rule.lhs = lhs;
      rule.pred = pred;
      rule.rhs = std::move(cand.dag);
      VerifyStats stats;
      if (!verify_rule(rule, cfg.oracle_width, cfg, &stats)) continue;
      if (!verify_rule_sampled(rule, cfg.oracle_width + cfg.recheck_extra_bits,
                               cfg.recheck_envs, recheck_rng, cfg))
        continue;
      out.rhs = std::move(rule.rhs);
      out.exhaustive = stats.exhaustive;
      out.checked = stats.checked;
      return out;
    }
  }
  return out;
}

std::vector<RewriteRule> refine_rules(const Pattern& lhs, const std::vector<Predicate>& preds,
                                      const SynthConfig& cfg, SynthStats* stats) {
  SynthStats scratch;
  if (!stats) stats = &scratch;
  std::map<std::string, Sort> sorts = leaf_sorts(lhs.dag);
  ImplicationGraph g = build_implication_graph(preds, cfg, sorts);
  std::size_t n = g.preds.size();
  std::vector<bool> removed(n, false);
  std::size_t remaining = n;
  std::size_t workers = cfg.workers ? cfg.workers
                                    : std::max(1u, std::thread::hardware_concurrency());

  struct Emitted {
    std::size_t pred_index;
    RewriteRule rule;
  };
  std::vector<Emitted> emitted;

  while (remaining > 0) {
    std::vector<int> indeg(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      if (!removed[i])
        for (std::size_t j : g.weaker[i])
          if (!removed[j]) ++indeg[j];
    std::vector<std::size_t> wave;
    for (std::size_t i = 0; i < n; ++i)
      if (!removed[i] && indeg[i] == 0) wave.push_back(i);

    std::vector<SynthOutcome> results(wave.size());
    for (std::size_t start = 0; start < wave.size(); start += workers) {
      std::size_t stop = std::min(wave.size(), start + workers);
      std::vector<std::future<SynthOutcome>> futures;
      for (std::size_t x = start; x < stop; ++x)
        futures.push_back(std::async(std::launch::async, [&, x] {
          return synth_rhs(lhs, g.preds[wave[x]], cfg);
        }));
      for (std::size_t x = start; x < stop; ++x) results[x] = futures[x - start].get();
    }

    for (std::size_t x = 0; x < wave.size(); ++x) {
      std::size_t i = wave[x];
      SynthOutcome& outcome = results[x];
      ++stats->synth_calls;
      stats->candidates += outcome.candidates;
      removed[i] = true;
      --remaining;
      if (outcome.rhs) {
        RewriteRule rule;
        rule.lhs = lhs;
        rule.pred = g.preds[i];
        rule.rhs = std::move(*outcome.rhs);
        rule.verified_bound = cfg.oracle_width;
        rule.exhaustive = outcome.exhaustive;
        rule.checked = outcome.checked;
        emitted.push_back({i, std::move(rule)});
      } else if (outcome.truncated) {
        stats->truncated = true;  // inconclusive: prune nothing
      } else {
        for (std::size_t j : g.weaker[i])
          if (!removed[j]) {
            removed[j] = true;
            --remaining;
            ++stats->pruned;
          }
      }
    }
  }

  // Per distinct replacement, drop every guard strictly stronger than another
  // emitted guard for that same replacement.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < emitted.size(); ++r)
    groups[render_root(emitted[r].rule.rhs)].push_back(r);
  std::vector<bool> keep(emitted.size(), true);
  for (const auto& [key, group] : groups)
    for (std::size_t r : group)
      for (std::size_t s : group) {
        if (r == s) continue;
        if (g.weaker[emitted[r].pred_index].count(emitted[s].pred_index)) keep[r] = false;
      }

  std::vector<RewriteRule> rules;
  for (std::size_t r = 0; r < emitted.size(); ++r)
    if (keep[r]) rules.push_back(std::move(emitted[r].rule));
  std::sort(rules.begin(), rules.end(),
            [](const RewriteRule& a, const RewriteRule& b) { return a.pred < b.pred; });
  return rules;
}

std::vector<RewriteRule> synthesize_rules(const Pattern& lhs,
                                          const std::vector<StaticConfig>& configs,
                                          const SynthConfig& cfg, SynthStats* stats) {
  bool truncated = false;
  std::vector<Predicate> preds = enumerate_predicates(lhs, configs, cfg, &truncated);
  if (stats && truncated) stats->truncated = true;
  return refine_rules(lhs, preds, cfg, stats);
}

}  // namespace simpforge
