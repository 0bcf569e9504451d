#include "support/generators.hpp"

#include <string>

namespace sft {

using namespace simpforge;

FormulaDag random_dag(Rng& rng, std::size_t op_count, const GenOptions& opts) {
  FormulaDag dag;
  std::vector<NodeId> bools, ints, arrays;

  auto push = [&](Node n) {
    NodeId id = static_cast<NodeId>(dag.nodes.size());
    dag.nodes.push_back(std::move(n));
    Sort s = dag.nodes.back().sort;
    if (s == Sort::Bool)
      bools.push_back(id);
    else if (s == Sort::Int)
      ints.push_back(id);
    else
      arrays.push_back(id);
    return id;
  };

  for (std::size_t i = 0; i < opts.bool_sources; ++i) {
    Node n;
    n.op = OpKind::Source;
    n.sort = Sort::Bool;
    n.name = "b" + std::to_string(i);
    push(std::move(n));
  }
  for (std::size_t i = 0; i < opts.int_sources; ++i) {
    Node n;
    n.op = OpKind::Source;
    n.sort = Sort::Int;
    n.name = "i" + std::to_string(i);
    push(std::move(n));
  }
  for (std::int64_t v : opts.const_pool) {
    Node n;
    n.op = OpKind::Const;
    n.sort = Sort::Int;
    n.value = v;
    push(std::move(n));
  }
  if (opts.use_arrays && !ints.empty()) {
    Node n;
    n.op = OpKind::ArrCreate;
    n.sort = Sort::IntArr;
    n.operands = {ints[rng.below(ints.size())], ints[rng.below(ints.size())]};
    push(std::move(n));
  }

  auto pick = [&](const std::vector<NodeId>& pool) {
    return pool[rng.below(pool.size())];
  };

  enum class Gen {
    Not, And, Or, Xor, EqB, EqI, Lt, Plus, Times, Div, Mod, Neg, MuxI, MuxB,
    Read, Write
  };

  for (std::size_t k = 0; k < op_count; ++k) {
    std::vector<Gen> menu;
    if (!bools.empty()) {
      menu.insert(menu.end(), {Gen::Not, Gen::And, Gen::Or, Gen::Xor, Gen::EqB});
      if (!ints.empty()) menu.push_back(Gen::MuxB);
    }
    if (!ints.empty()) {
      menu.insert(menu.end(), {Gen::EqI, Gen::Lt, Gen::Plus, Gen::Times, Gen::Neg, Gen::MuxI});
      if (opts.use_div_mod) menu.insert(menu.end(), {Gen::Div, Gen::Mod});
    }
    if (!arrays.empty() && !ints.empty()) menu.insert(menu.end(), {Gen::Read, Gen::Write});
    if (menu.empty()) break;

    Node n;
    switch (menu[rng.below(menu.size())]) {
      case Gen::Not: n.op = OpKind::Not; n.sort = Sort::Bool; n.operands = {pick(bools)}; break;
      case Gen::And: n.op = OpKind::And; n.sort = Sort::Bool; n.operands = {pick(bools), pick(bools)}; break;
      case Gen::Or: n.op = OpKind::Or; n.sort = Sort::Bool; n.operands = {pick(bools), pick(bools)}; break;
      case Gen::Xor: n.op = OpKind::Xor; n.sort = Sort::Bool; n.operands = {pick(bools), pick(bools)}; break;
      case Gen::EqB: n.op = OpKind::Eq; n.sort = Sort::Bool; n.operands = {pick(bools), pick(bools)}; break;
      case Gen::EqI: n.op = OpKind::Eq; n.sort = Sort::Bool; n.operands = {pick(ints), pick(ints)}; break;
      case Gen::Lt: n.op = OpKind::Lt; n.sort = Sort::Bool; n.operands = {pick(ints), pick(ints)}; break;
      case Gen::Plus: n.op = OpKind::Plus; n.sort = Sort::Int; n.operands = {pick(ints), pick(ints)}; break;
      case Gen::Times: n.op = OpKind::Times; n.sort = Sort::Int; n.operands = {pick(ints), pick(ints)}; break;
      case Gen::Div: n.op = OpKind::Div; n.sort = Sort::Int; n.operands = {pick(ints), pick(ints)}; break;
      case Gen::Mod: n.op = OpKind::Mod; n.sort = Sort::Int; n.operands = {pick(ints), pick(ints)}; break;
      case Gen::Neg: n.op = OpKind::Neg; n.sort = Sort::Int; n.operands = {pick(ints)}; break;
      case Gen::MuxI:
        n.op = OpKind::ArrAcc; n.sort = Sort::Int;
        n.operands = {pick(ints), pick(ints), pick(ints)};
        break;
      case Gen::MuxB:
        n.op = OpKind::ArrAcc; n.sort = Sort::Bool;
        n.operands = {pick(ints), pick(bools), pick(bools)};
        break;
      case Gen::Read:
        n.op = OpKind::ArrRead; n.sort = Sort::Int;
        n.operands = {pick(ints), pick(arrays)};
        break;
      case Gen::Write:
        n.op = OpKind::ArrWrite; n.sort = Sort::IntArr;
        n.operands = {pick(ints), pick(arrays), pick(ints)};
        break;
    }
    push(std::move(n));
  }

  std::vector<char> used(dag.nodes.size(), 0);
  for (const Node& n : dag.nodes)
    for (NodeId o : n.operands) used[o] = 1;
  for (NodeId id = 0; id < dag.nodes.size(); ++id)
    if (!used[id]) dag.roots.push_back(id);

  validate(dag);
  return dag;
}

Environment random_env(const FormulaDag& dag, Rng& rng, int width, int array_len) {
  auto draw_int = [&]() -> std::int64_t {
    if (width <= 0 || width >= 64) return static_cast<std::int64_t>(rng.next_u64());
    return rng.range(int_min_for(width), int_max_for(width));
  };

  Environment env;
  for (const Node& n : dag.nodes) {
    if (n.op != OpKind::Source && n.op != OpKind::Ctrl) continue;
    if (env.count(n.name)) continue;
    switch (n.sort) {
      case Sort::Bool: env[n.name] = static_cast<std::int64_t>(rng.below(2)); break;
      case Sort::Int: env[n.name] = draw_int(); break;
      case Sort::BoolArr: {
        std::vector<std::int64_t> a(static_cast<std::size_t>(array_len));
        for (auto& e : a) e = static_cast<std::int64_t>(rng.below(2));
        env[n.name] = std::move(a);
        break;
      }
      case Sort::IntArr: {
        std::vector<std::int64_t> a(static_cast<std::size_t>(array_len));
        for (auto& e : a) e = draw_int();
        env[n.name] = std::move(a);
        break;
      }
    }
  }
  return env;
}

}  // namespace sft
