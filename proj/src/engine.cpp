#include "simpforge/engine.hpp"

#include <algorithm>
#include <set>

namespace simpforge {

std::size_t size_metric(const FormulaDag& dag) {
  std::size_t n = 0;
  for (const Node& node : dag.nodes)
    if (!is_leaf(node.op)) ++n;
  return n;
}

namespace {

// Working arena for one pass: a builder for consing, a FormulaDag mirror the
// matcher can walk, per-node facts, and the replacement map left by splices.
struct Arena {
  DagBuilder builder;
  FormulaDag view;
  std::vector<AbstractValue> facts;
  std::map<NodeId, NodeId> repl;
  AnalysisOptions aopts;

  NodeId resolve(NodeId id) const {
    auto it = repl.find(id);
    while (it != repl.end()) {
      id = it->second;
      it = repl.find(id);
    }
    return id;
  }

  NodeId cons(OpKind op, Sort sort, std::vector<NodeId> operands, std::int64_t value,
              std::string name) {
    std::size_t before = builder.size();
    NodeId id = builder.add(op, sort, std::move(operands), value, std::move(name));
    if (builder.size() != before) {
      const Node& n = builder.node(id);
      view.nodes.push_back(n);
      if (n.op == OpKind::Const) {
        facts.push_back(AbstractValue::constant(n.value));
      } else if (is_leaf(n.op)) {
        facts.push_back(n.sort == Sort::Bool ? AbstractValue::range(0, 1)
                                             : AbstractValue::top());
      } else {
        std::vector<AbstractValue> in;
        in.reserve(n.operands.size());
        for (NodeId o : n.operands) in.push_back(facts[o]);
        facts.push_back(transfer(n.op, in, n.sort, aopts));
      }
    }
    return id;
  }

  NodeId splice(const FormulaDag& rhs, const std::map<std::string, NodeId>& binding) {
    std::vector<NodeId> map(rhs.size(), kNoNode);
    for (NodeId id = 0; id < rhs.size(); ++id) {
      const Node& n = rhs.node(id);
      if (n.op == OpKind::Source || n.op == OpKind::Ctrl) {
        map[id] = resolve(binding.at(n.name));
      } else {
        std::vector<NodeId> ops;
        ops.reserve(n.operands.size());
        for (NodeId o : n.operands) ops.push_back(map[o]);
        map[id] = cons(n.op, n.sort, std::move(ops), n.value, {});
      }
    }
    return map[rhs.roots.at(0)];
  }
};

}  // namespace

FormulaDag simplify(const FormulaDag& dag, const Matcher& m, const SimplifyLimits& limits,
                    SimplifyTrace* trace_out, const EvalOptions& eval_opts,
                    const AnalysisOptions& analysis_opts) {
  SimplifyTrace local;
  SimplifyTrace& trace = trace_out ? *trace_out : local;
  trace = {};
  std::size_t cap = limits.max_rewrites
                        ? limits.max_rewrites
                        : 10 * std::max<std::size_t>(size_metric(dag), 1);

  std::vector<NodeId> rmap(dag.roots.begin(), dag.roots.end());
  std::vector<NodeId> fmap;
  FormulaDag cur = constant_fold(dag, eval_opts, &fmap);
  for (NodeId& r : rmap) r = fmap[r];
  for (int pass = 1; pass <= limits.max_passes; ++pass) {
    Arena arena;
    arena.aopts = analysis_opts;
    arena.view = cur;
    arena.facts = analyze(cur, {}, analysis_opts);
    for (const Node& n : cur.nodes)
      arena.builder.add(n.op, n.sort, n.operands, n.value, n.name);

    trace.passes = pass;
    bool changed = false;
    bool capped = false;
    std::set<NodeId> tested;
    std::size_t n0 = cur.size();
    for (NodeId id = 0; id < n0 && !capped; ++id) {
      const Node& n = cur.node(id);
      NodeId nid = id;
      if (!is_leaf(n.op)) {
        std::vector<NodeId> ops;
        ops.reserve(n.operands.size());
        for (NodeId o : n.operands) ops.push_back(arena.resolve(o));
        if (ops != n.operands) {
          nid = arena.cons(n.op, n.sort, std::move(ops), n.value, {});
          if (nid != id) arena.repl.emplace(id, nid);
        }
      }
      nid = arena.resolve(nid);
      if (!tested.insert(nid).second) continue;

      auto ms = m.match_at(arena.view, nid, arena.facts);
      if (ms.empty()) continue;
      NodeId out = arena.splice(m.rules()[ms.front().rule].rhs, ms.front().binding);
      if (out != nid) arena.repl.emplace(nid, out);
      trace.steps.push_back({ms.front().rule, nid, pass});
      changed = true;
      if (trace.steps.size() >= cap) capped = true;
    }

    if (!changed) break;
    FormulaDag next = std::move(arena.view);
    next.roots.clear();
    for (NodeId r : cur.roots) next.roots.push_back(arena.resolve(r));
    cur = constant_fold(next, eval_opts, &fmap);
    for (NodeId& r : rmap) r = fmap[arena.resolve(r)];
    if (capped || pass == limits.max_passes) {
      trace.limit_hit = true;
      break;
    }
  }
  trace.root_map = std::move(rmap);
  return cur;
}

}  // namespace simpforge
