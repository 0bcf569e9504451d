#include "support/reference_matcher.hpp"

#include <utility>

namespace sft {

using namespace simpforge;

namespace {

void embed_seq(const FormulaDag& lhs, const FormulaDag& dag,
               std::vector<std::pair<NodeId, NodeId>> pairs, std::size_t at,
               std::map<std::string, NodeId> binding,
               std::vector<std::map<std::string, NodeId>>& out) {
  if (at == pairs.size()) {
    out.push_back(std::move(binding));
    return;
  }
  auto [lid, sid] = pairs[at];
  const Node& ln = lhs.node(lid);
  const Node& sn = dag.node(sid);

  if (ln.op == OpKind::Source || ln.op == OpKind::Ctrl) {
    auto it = binding.find(ln.name);
    if (it != binding.end()) {
      if (it->second != sid) return;
    } else {
      if (sn.sort != ln.sort) return;
      binding.emplace(ln.name, sid);
    }
    embed_seq(lhs, dag, std::move(pairs), at + 1, std::move(binding), out);
    return;
  }
  if (ln.op == OpKind::Const) {
    if (sn.op != OpKind::Const || sn.sort != ln.sort || sn.value != ln.value) return;
    embed_seq(lhs, dag, std::move(pairs), at + 1, std::move(binding), out);
    return;
  }

  if (sn.op != ln.op || sn.sort != ln.sort || sn.operands.size() != ln.operands.size())
    return;
  std::vector<std::vector<std::pair<NodeId, NodeId>>> orders;
  orders.emplace_back();
  for (std::size_t i = 0; i < ln.operands.size(); ++i)
    orders.back().emplace_back(ln.operands[i], sn.operands[i]);
  if (is_commutative(ln.op) && ln.operands.size() == 2)
    orders.push_back({{ln.operands[0], sn.operands[1]}, {ln.operands[1], sn.operands[0]}});
  for (const auto& ord : orders) {
    auto next = pairs;
    next.insert(next.begin() + static_cast<std::ptrdiff_t>(at) + 1, ord.begin(), ord.end());
    embed_seq(lhs, dag, std::move(next), at + 1, binding, out);
  }
}

}  // namespace

std::vector<std::map<std::string, NodeId>> all_bindings(const RewriteRule& rule,
                                                        const FormulaDag& dag,
                                                        NodeId node) {
  std::vector<std::map<std::string, NodeId>> out;
  embed_seq(rule.lhs.dag, dag, {{rule.lhs.dag.roots.at(0), node}}, 0, {}, out);
  return out;
}

bool binding_discharges(const Predicate& pred,
                        const std::map<std::string, NodeId>& binding,
                        const std::vector<AbstractValue>& facts) {
  for (const Atom& a : pred.atoms) {
    NodeId l = binding.at(a.lhs);
    std::map<std::string, AbstractValue> view;
    view.emplace(a.lhs, l < facts.size() ? facts[l] : AbstractValue::top());
    if (!a.rhs_is_const) {
      NodeId r = binding.at(a.rhs_var);
      if (l == r) {
        if (a.rel == Rel::Eq || a.rel == Rel::Le) continue;
        return false;
      }
      view.emplace(a.rhs_var, r < facts.size() ? facts[r] : AbstractValue::top());
    }
    if (implies(view, make_predicate({a})) != Tri::True) return false;
  }
  return true;
}

std::vector<std::size_t> reference_matches(const std::vector<RewriteRule>& rules,
                                           const std::vector<std::size_t>& order,
                                           const FormulaDag& dag, NodeId node,
                                           const std::vector<AbstractValue>& facts) {
  std::vector<std::size_t> active = order;
  if (active.empty()) {
    active.resize(rules.size());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
  }
  std::vector<std::size_t> out;
  for (std::size_t id : active) {
    for (const auto& binding : all_bindings(rules[id], dag, node)) {
      if (binding_discharges(rules[id].pred, binding, facts)) {
        out.push_back(id);
        break;
      }
    }
  }
  return out;
}

}  // namespace sft
