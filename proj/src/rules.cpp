#include "simpforge/rules.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace simpforge {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

bool is_variable(const Node& n) { return n.op == OpKind::Source || n.op == OpKind::Ctrl; }

// Reachable slice of dag from root, ids renumbered but kept in topo order.
FormulaDag restrict_to_root(const FormulaDag& dag, NodeId root) {
  std::vector<bool> keep(dag.nodes.size(), false);
  std::vector<NodeId> stack{root};
  keep[root] = true;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    for (NodeId o : dag.node(id).operands)
      if (!keep[o]) {
        keep[o] = true;
        stack.push_back(o);
      }
  }
  FormulaDag out;
  std::vector<NodeId> remap(dag.nodes.size(), kNoNode);
  for (NodeId id = 0; id < dag.nodes.size(); ++id) {
    if (!keep[id]) continue;
    Node copy = dag.node(id);
    for (NodeId& o : copy.operands) o = remap[o];
    remap[id] = static_cast<NodeId>(out.nodes.size());
    out.nodes.push_back(std::move(copy));
  }
  out.roots = {remap[root]};
  return out;
}

// RHS restated with every lhs leaf declared up front, appendix style: the
// leaf block keeps its ids stable across d/f/p.aux even for unused leaves.
FormulaDag rhs_aux_dag(const FormulaDag& rhs, const FormulaDag& lhs) {
  FormulaDag out;
  std::map<std::string, NodeId> leaf_ids;
  for (const Node& n : lhs.nodes)
    if (is_variable(n) && !leaf_ids.count(n.name)) {
      leaf_ids[n.name] = static_cast<NodeId>(out.nodes.size());
      out.nodes.push_back({OpKind::Source, n.sort, {}, 0, n.name});
    }
  std::vector<NodeId> remap(rhs.nodes.size(), kNoNode);
  for (NodeId id = 0; id < rhs.nodes.size(); ++id) {
    const Node& n = rhs.node(id);
    if (is_variable(n)) {
      auto it = leaf_ids.find(n.name);
      if (it == leaf_ids.end())
        throw ValidationError("rhs variable not bound by lhs: " + n.name);
      remap[id] = it->second;
      continue;
    }
    Node copy = n;
    for (NodeId& o : copy.operands) o = remap[o];
    remap[id] = static_cast<NodeId>(out.nodes.size());
    out.nodes.push_back(std::move(copy));
  }
  out.roots = {remap[rhs.roots.at(0)]};
  return out;
}

}  // namespace

std::size_t op_count(const FormulaDag& dag) {
  std::size_t ops = 0;
  for (const Node& n : dag.nodes) ops += !is_leaf(n.op);
  return ops;
}

void validate_rule(const RewriteRule& rule) {
  validate(rule.lhs.dag);
  validate(rule.rhs);
  if (rule.lhs.dag.roots.size() != 1) throw ValidationError("rule lhs must have one root");
  if (rule.rhs.roots.size() != 1) throw ValidationError("rule rhs must have one root");
  const Node& lroot = rule.lhs.dag.node(rule.lhs.dag.roots[0]);
  const Node& rroot = rule.rhs.node(rule.rhs.roots[0]);
  if (lroot.sort != rroot.sort)
    throw ValidationError("rhs root sort differs from lhs root sort");

  std::map<std::string, Sort> leaves;
  for (const Node& n : rule.lhs.dag.nodes)
    if (is_variable(n)) leaves.emplace(n.name, n.sort);
  for (const Node& n : rule.rhs.nodes)
    if (is_variable(n)) {
      auto it = leaves.find(n.name);
      if (it == leaves.end())
        throw ValidationError("rhs variable not bound by lhs: " + n.name);
      if (it->second != n.sort)
        throw ValidationError("rhs variable sort mismatch: " + n.name);
    }
  for (const Atom& a : rule.pred.atoms) {
    if (!leaves.count(a.lhs) || (!a.rhs_is_const && !leaves.count(a.rhs_var)))
      throw ValidationError("guard variable not bound by lhs");
  }
  if (op_count(rule.rhs) >= op_count(rule.lhs.dag))
    throw ValidationError("rhs must have strictly fewer operations than lhs");
}

FormulaDag predicate_to_dag(const Predicate& pred, const FormulaDag& lhs) {
  FormulaDag out;
  std::map<std::string, NodeId> vars;
  for (const Node& n : lhs.nodes)
    if (is_variable(n) && !vars.count(n.name)) {
      vars[n.name] = static_cast<NodeId>(out.nodes.size());
      out.nodes.push_back({OpKind::Source, n.sort, {}, 0, n.name});
    }
  auto var_id = [&](const std::string& name) {
    auto it = vars.find(name);
    if (it == vars.end()) throw ValidationError("guard variable not bound by lhs: " + name);
    return it->second;
  };
  std::map<std::pair<Sort, std::int64_t>, NodeId> consts;
  auto const_id = [&](Sort s, std::int64_t v) {
    auto [it, fresh] = consts.try_emplace({s, v}, static_cast<NodeId>(out.nodes.size()));
    if (fresh) out.nodes.push_back({OpKind::Const, s, {}, v, {}});
    return it->second;
  };
  auto append = [&](OpKind op, std::vector<NodeId> operands) {
    out.nodes.push_back({op, Sort::Bool, std::move(operands), 0, {}});
    return static_cast<NodeId>(out.nodes.size() - 1);
  };

  std::vector<NodeId> conjuncts;
  for (const Atom& a : pred.atoms) {
    NodeId l = var_id(a.lhs);
    NodeId r = a.rhs_is_const ? const_id(out.node(l).sort, a.rhs_const) : var_id(a.rhs_var);
    switch (a.rel) {
      case Rel::Eq: conjuncts.push_back(append(OpKind::Eq, {l, r})); break;
      case Rel::Ne: conjuncts.push_back(append(OpKind::Not, {append(OpKind::Eq, {l, r})})); break;
      case Rel::Lt: conjuncts.push_back(append(OpKind::Lt, {l, r})); break;
      case Rel::Le: conjuncts.push_back(append(OpKind::Not, {append(OpKind::Lt, {r, l})})); break;
    }
  }
  NodeId root;
  if (conjuncts.empty()) {
    root = static_cast<NodeId>(out.nodes.size());
    out.nodes.push_back({OpKind::Const, Sort::Bool, {}, 1, {}});
  } else {
    root = conjuncts[0];
    for (std::size_t i = 1; i < conjuncts.size(); ++i)
      root = append(OpKind::And, {root, conjuncts[i]});
  }
  out.roots = {root};
  validate(out);
  return out;
}

namespace {

// var name or integer literal; anything deeper is not a guard operand
struct Side {
  bool is_const = false;
  std::string var;
  std::int64_t value = 0;
};

Side decode_side(const FormulaDag& dag, NodeId id) {
  const Node& n = dag.node(id);
  if (is_variable(n)) return {false, n.name, 0};
  if (n.op == OpKind::Const) return {true, {}, n.value};
  throw FormatError("guard atom operand must be a variable or constant");
}

Atom decode_comparison(const FormulaDag& dag, const Node& n, bool negated) {
  Side a = decode_side(dag, n.operands.at(0));
  Side b = decode_side(dag, n.operands.at(1));
  if (n.op == OpKind::Eq) {
    Rel rel = negated ? Rel::Ne : Rel::Eq;
    if (!a.is_const && !b.is_const) return make_atom(a.var, rel, b.var);
    if (!a.is_const) return make_atom(a.var, rel, b.value);
    if (!b.is_const) return make_atom(b.var, rel, a.value);
    throw FormatError("guard atom compares two constants");
  }
  if (n.op == OpKind::Lt) {
    if (negated) {  // NOT(LT(y, x)) stands for x <= y
      if (b.is_const) throw FormatError("guard atom puts a constant left of <=");
      return a.is_const ? make_atom(b.var, Rel::Le, a.value) : make_atom(b.var, Rel::Le, a.var);
    }
    if (a.is_const) throw FormatError("guard atom puts a constant left of <");
    return b.is_const ? make_atom(a.var, Rel::Lt, b.value) : make_atom(a.var, Rel::Lt, b.var);
  }
  throw FormatError(std::string("unsupported guard operator: ") + op_token(n.op));
}

}  // namespace

Predicate predicate_from_dag(const FormulaDag& dag) {
  if (dag.roots.size() != 1) throw FormatError("guard DAG must have exactly one root");
  const Node& root = dag.node(dag.roots[0]);
  if (root.op == OpKind::Const) {
    if (root.sort == Sort::Bool && root.value == 1) return Predicate::truth();
    throw FormatError("guard constant must be CONST BIT 1");
  }
  std::vector<Atom> atoms;
  std::function<void(NodeId)> conjunct = [&](NodeId id) {
    const Node& n = dag.node(id);
    if (n.op == OpKind::And) {
      for (NodeId o : n.operands) conjunct(o);
      return;
    }
    if (n.op == OpKind::Not) {
      atoms.push_back(decode_comparison(dag, dag.node(n.operands.at(0)), true));
      return;
    }
    atoms.push_back(decode_comparison(dag, n, false));
  };
  conjunct(dag.roots[0]);
  return make_predicate(std::move(atoms));
}

RuleText rule_to_text(const RewriteRule& rule) {
  validate_rule(rule);
  RuleText text;
  text.d = serialize_dag(rule.lhs.dag);
  text.f = serialize_dag(rhs_aux_dag(rule.rhs, rule.lhs.dag));
  text.p = serialize_dag(predicate_to_dag(rule.pred, rule.lhs.dag));
  nlohmann::json meta{{"verified_bound", rule.verified_bound},
                      {"exhaustive", rule.exhaustive},
                      {"checked", rule.checked}};
  text.meta = meta.dump(2) + "\n";
  return text;
}

RewriteRule rule_from_text(const RuleText& text) {
  RewriteRule rule;
  FormulaDag lhs = parse_dag(text.d);
  rule.lhs.sig = canonicalize(lhs).sig;
  rule.lhs.dag = std::move(lhs);

  FormulaDag rhs_full = parse_dag(text.f);
  if (rhs_full.roots.size() != 1) throw FormatError("rhs DAG must have exactly one root");
  rule.rhs = restrict_to_root(rhs_full, rhs_full.roots[0]);
  rule.pred = predicate_from_dag(parse_dag(text.p));

  rule.exhaustive = false;  // no verification claim until meta says otherwise
  if (!text.meta.empty()) {
    try {
      nlohmann::json meta = nlohmann::json::parse(text.meta);
      rule.verified_bound = meta.value("verified_bound", 0);
      rule.exhaustive = meta.value("exhaustive", false);
      rule.checked = meta.value("checked", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("rule meta: ") + e.what());
    }
  }
  validate_rule(rule);
  return rule;
}

void write_rule(const fs::path& dir, const RewriteRule& rule) {
  RuleText text = rule_to_text(rule);
  fs::create_directories(dir);
  write_text(dir / "d.aux", text.d);
  write_text(dir / "f.aux", text.f);
  write_text(dir / "p.aux", text.p);
  write_text(dir / "meta.json", text.meta);
}

RewriteRule read_rule(const fs::path& dir) {
  RuleText text;
  text.d = read_text(dir / "d.aux");
  text.f = read_text(dir / "f.aux");
  text.p = read_text(dir / "p.aux");
  fs::path meta_path = dir / "meta.json";
  if (fs::exists(meta_path)) text.meta = read_text(meta_path);
  return rule_from_text(text);
}

void write_rules(const fs::path& root, const std::vector<RewriteRule>& rules) {
  fs::create_directories(root);
  for (std::size_t i = 0; i < rules.size(); ++i) write_rule(root / std::to_string(i), rules[i]);
}

std::vector<RewriteRule> read_rules(const fs::path& root) {
  if (!fs::is_directory(root)) throw FormatError("rule directory missing: " + root.string());
  std::vector<std::pair<unsigned long, fs::path>> dirs;
  for (const fs::directory_entry& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    std::string name = entry.path().filename().string();
    if (name.empty() || name.find_first_not_of("0123456789") != std::string::npos) continue;
    dirs.emplace_back(std::stoul(name), entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<RewriteRule> rules;
  rules.reserve(dirs.size());
  for (const auto& [num, path] : dirs) rules.push_back(read_rule(path));
  return rules;
}

}  // namespace simpforge
