#include "simpforge/dag.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace simpforge {

bool is_leaf(OpKind op) {
  return op == OpKind::Const || op == OpKind::Source || op == OpKind::Ctrl;
}

bool is_commutative(OpKind op) {
  switch (op) {
    case OpKind::And:
    case OpKind::Or:
    case OpKind::Xor:
    case OpKind::Plus:
    case OpKind::Times:
    case OpKind::Eq:
      return true;
    default:
      return false;
  }
}

bool is_scalar(Sort s) { return s == Sort::Bool || s == Sort::Int; }
bool is_array(Sort s) { return s == Sort::BoolArr || s == Sort::IntArr; }

Sort elem_sort(Sort s) { return s == Sort::BoolArr ? Sort::Bool : Sort::Int; }
Sort array_sort(Sort elem) { return elem == Sort::Bool ? Sort::BoolArr : Sort::IntArr; }

const char* op_token(OpKind op) {
  switch (op) {
    case OpKind::Const: return "CONST";
    case OpKind::Source: return "S";
    case OpKind::Ctrl: return "CTRL";
    case OpKind::Not: return "NOT";
    case OpKind::And: return "AND";
    case OpKind::Or: return "OR";
    case OpKind::Xor: return "XOR";
    case OpKind::Plus: return "PLUS";
    case OpKind::Times: return "TIMES";
    case OpKind::Div: return "DIV";
    case OpKind::Mod: return "MOD";
    case OpKind::Neg: return "NEG";
    case OpKind::Eq: return "EQ";
    case OpKind::Lt: return "LT";
    case OpKind::ArrAcc: return "ARRACC";
    case OpKind::ArrRead: return "ARR_R";
    case OpKind::ArrWrite: return "ARR_W";
    case OpKind::ArrCreate: return "ARR_CREATE";
    case OpKind::Assert: return "ASSERT";
  }
  return "?";
}

const char* sort_token(Sort s) {
  switch (s) {
    case Sort::Bool: return "BOOL";
    case Sort::Int: return "INT";
    case Sort::BoolArr: return "BOOL_ARR";
    case Sort::IntArr: return "INT_ARR";
  }
  return "?";
}

std::optional<OpKind> op_from_token(std::string_view tok) {
  static const std::map<std::string_view, OpKind> table = {
      {"CONST", OpKind::Const},   {"S", OpKind::Source},
      {"CTRL", OpKind::Ctrl},     {"NOT", OpKind::Not},
      {"AND", OpKind::And},       {"OR", OpKind::Or},
      {"XOR", OpKind::Xor},       {"PLUS", OpKind::Plus},
      {"TIMES", OpKind::Times},   {"DIV", OpKind::Div},
      {"MOD", OpKind::Mod},       {"NEG", OpKind::Neg},
      {"EQ", OpKind::Eq},         {"LT", OpKind::Lt},
      {"ARRACC", OpKind::ArrAcc}, {"ARR_R", OpKind::ArrRead},
      {"ARR_W", OpKind::ArrWrite},{"ARR_CREATE", OpKind::ArrCreate},
      {"ASSERT", OpKind::Assert},
  };
  auto it = table.find(tok);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::optional<Sort> sort_from_token(std::string_view tok) {
  // BIT / BIT_ARR are the boolean spellings used by constant lines in the aux
  // corpora; accept them everywhere.
  if (tok == "BOOL" || tok == "BIT") return Sort::Bool;
  if (tok == "INT") return Sort::Int;
  if (tok == "BOOL_ARR" || tok == "BIT_ARR") return Sort::BoolArr;
  if (tok == "INT_ARR") return Sort::IntArr;
  return std::nullopt;
}

namespace {

std::string node_label(NodeId id) { return "node " + std::to_string(id); }

void check_node(const FormulaDag& dag, NodeId id, std::size_t max_arity) {
  const Node& n = dag.nodes[id];
  for (NodeId opnd : n.operands) {
    if (opnd >= id)
      throw ValidationError(node_label(id) + ": operand " + std::to_string(opnd) +
                            " does not precede it");
  }
  if (max_arity > 0 && n.operands.size() > max_arity)
    throw ValidationError(node_label(id) + ": arity " +
                          std::to_string(n.operands.size()) + " exceeds cap " +
                          std::to_string(max_arity));

  auto sort_of = [&](std::size_t i) { return dag.nodes[n.operands[i]].sort; };
  auto want = [&](bool ok) {
    if (!ok) throw ValidationError(node_label(id) + ": operand sorts violate " +
                                   std::string(op_token(n.op)));
  };
  auto want_arity = [&](std::size_t k) {
    if (n.operands.size() != k)
      throw ValidationError(node_label(id) + ": " + op_token(n.op) + " expects " +
                            std::to_string(k) + " operands, got " +
                            std::to_string(n.operands.size()));
  };

  switch (n.op) {
    case OpKind::Const:
      want_arity(0);
      want(is_scalar(n.sort));
      if (n.sort == Sort::Bool && n.value != 0 && n.value != 1)
        throw ValidationError(node_label(id) + ": boolean constant must be 0 or 1");
      break;
    case OpKind::Source:
    case OpKind::Ctrl:
      want_arity(0);
      if (n.name.empty())
        throw ValidationError(node_label(id) + ": source without a name");
      break;
    case OpKind::Not:
    case OpKind::Assert:
      want_arity(1);
      want(n.sort == Sort::Bool && sort_of(0) == Sort::Bool);
      break;
    case OpKind::And:
    case OpKind::Or:
    case OpKind::Xor:
      want_arity(2);
      want(n.sort == Sort::Bool && sort_of(0) == Sort::Bool && sort_of(1) == Sort::Bool);
      break;
    case OpKind::Plus:
    case OpKind::Times:
    case OpKind::Div:
    case OpKind::Mod:
      want_arity(2);
      want(n.sort == Sort::Int && sort_of(0) == Sort::Int && sort_of(1) == Sort::Int);
      break;
    case OpKind::Neg:
      want_arity(1);
      want(n.sort == Sort::Int && sort_of(0) == Sort::Int);
      break;
    case OpKind::Eq:
      want_arity(2);
      want(n.sort == Sort::Bool && sort_of(0) == sort_of(1) && is_scalar(sort_of(0)));
      break;
    case OpKind::Lt:
      want_arity(2);
      want(n.sort == Sort::Bool && sort_of(0) == Sort::Int && sort_of(1) == Sort::Int);
      break;
    case OpKind::ArrAcc: {
      if (n.operands.size() < 2)
        throw ValidationError(node_label(id) + ": ARRACC needs a selector and at least one choice");
      want(is_scalar(n.sort) && sort_of(0) == Sort::Int);
      for (std::size_t i = 1; i < n.operands.size(); ++i) want(sort_of(i) == n.sort);
      break;
    }
    case OpKind::ArrRead:
      want_arity(2);
      want(is_scalar(n.sort) && sort_of(0) == Sort::Int && is_array(sort_of(1)) &&
           elem_sort(sort_of(1)) == n.sort);
      break;
    case OpKind::ArrWrite:
      want_arity(3);
      want(is_array(n.sort) && sort_of(0) == Sort::Int && sort_of(1) == n.sort &&
           sort_of(2) == elem_sort(n.sort));
      break;
    case OpKind::ArrCreate: {
      if (n.operands.empty())
        throw ValidationError(node_label(id) + ": ARR_CREATE needs at least one element");
      want(is_array(n.sort));
      for (std::size_t i = 0; i < n.operands.size(); ++i)
        want(sort_of(i) == elem_sort(n.sort));
      break;
    }
  }
}

}  // namespace

void validate(const FormulaDag& dag, std::size_t max_arity) {
  for (NodeId id = 0; id < dag.nodes.size(); ++id) check_node(dag, id, max_arity);
  for (NodeId r : dag.roots) {
    if (r >= dag.nodes.size())
      throw ValidationError("root " + std::to_string(r) + " out of range");
  }
}

FormulaDag parse_dag(const std::string& text, std::size_t max_arity) {
  FormulaDag dag;
  std::map<std::uint64_t, NodeId> by_file_id;
  std::vector<NodeId> roots;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(std::move(t));
    if (tok.empty()) continue;

    auto parse_u64 = [&](const std::string& s) -> std::uint64_t {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("expected a node id, got '" + s + "'", lineno);
      return v;
    };

    if (tok.size() == 1) {
      auto it = by_file_id.find(parse_u64(tok[0]));
      if (it == by_file_id.end())
        throw ParseError("root refers to undefined node " + tok[0], lineno);
      roots.push_back(it->second);
      continue;
    }

    if (tok.size() < 4 || tok[1] != "=")
      throw ParseError("expected '<id> = <OP> <SORT> ...'", lineno);

    std::uint64_t file_id = parse_u64(tok[0]);
    if (by_file_id.count(file_id))
      throw ParseError("node " + tok[0] + " defined twice", lineno);

    auto op = op_from_token(tok[2]);
    if (!op) throw ParseError("unknown op token '" + tok[2] + "'", lineno);
    auto sort = sort_from_token(tok[3]);
    if (!sort) throw ParseError("unknown sort token '" + tok[3] + "'", lineno);

    Node n;
    n.op = *op;
    n.sort = *sort;
    if (*op == OpKind::Const) {
      if (tok.size() != 5) throw ParseError("CONST expects a single literal", lineno);
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(tok[4].data(), tok[4].data() + tok[4].size(), v);
      if (ec != std::errc() || p != tok[4].data() + tok[4].size())
        throw ParseError("bad constant literal '" + tok[4] + "'", lineno);
      n.value = v;
    } else if (*op == OpKind::Source || *op == OpKind::Ctrl) {
      if (tok.size() != 5) throw ParseError("source expects a single name", lineno);
      n.name = tok[4];
    } else {
      for (std::size_t i = 4; i < tok.size(); ++i) {
        auto it = by_file_id.find(parse_u64(tok[i]));
        if (it == by_file_id.end())
          throw ParseError("operand " + tok[i] + " undefined", lineno);
        n.operands.push_back(it->second);
      }
      // ARR_R doubles as a mux spelling in some corpora: when the operand list
      // is selector + scalar choices rather than index + array, read it as
      // ARRACC.
      if (*op == OpKind::ArrRead &&
          !(n.operands.size() == 2 && is_array(dag.nodes[n.operands[1]].sort)))
        n.op = OpKind::ArrAcc;
    }

    NodeId id = static_cast<NodeId>(dag.nodes.size());
    dag.nodes.push_back(std::move(n));
    by_file_id.emplace(file_id, id);

    try {
      check_node(dag, id, max_arity);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }

  for (NodeId id = 0; id < dag.nodes.size(); ++id)
    if (dag.nodes[id].op == OpKind::Assert) roots.push_back(id);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  dag.roots = std::move(roots);
  return dag;
}

std::string serialize_dag(const FormulaDag& dag) {
  std::string out;
  for (NodeId id = 0; id < dag.nodes.size(); ++id) {
    const Node& n = dag.nodes[id];
    out += std::to_string(id);
    out += " = ";
    out += op_token(n.op);
    out += ' ';
    // Boolean constants are written with the BIT spelling, matching the aux
    // predicate files ("CONST BIT 1" for TRUE).
    if (n.op == OpKind::Const && n.sort == Sort::Bool)
      out += "BIT";
    else
      out += sort_token(n.sort);
    if (n.op == OpKind::Const) {
      out += ' ';
      out += std::to_string(n.value);
    } else if (n.op == OpKind::Source || n.op == OpKind::Ctrl) {
      out += ' ';
      out += n.name;
    } else {
      for (NodeId opnd : n.operands) {
        out += ' ';
        out += std::to_string(opnd);
      }
    }
    out += '\n';
  }
  for (NodeId r : dag.roots) {
    out += std::to_string(r);
    out += '\n';
  }
  return out;
}

NodeId DagBuilder::add(OpKind op, Sort sort, std::vector<NodeId> operands,
                       std::int64_t value, std::string name) {
  Node n;
  n.op = op;
  n.sort = sort;
  n.operands = std::move(operands);
  n.value = op == OpKind::Const ? value : 0;
  n.name = std::move(name);
  if (is_commutative(op)) std::sort(n.operands.begin(), n.operands.end());

  auto it = index_.find(n);
  if (it != index_.end()) return it->second;
  NodeId id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(n);
  index_.emplace(std::move(n), id);
  return id;
}

FormulaDag DagBuilder::freeze(std::vector<NodeId> roots) const {
  FormulaDag dag;
  dag.nodes = nodes_;
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  dag.roots = std::move(roots);
  return dag;
}

FormulaDag hash_cons(const FormulaDag& dag, std::vector<NodeId>* remap_out) {
  std::vector<char> reachable(dag.nodes.size(), 0);
  std::vector<NodeId> stack(dag.roots.begin(), dag.roots.end());
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (reachable[id]) continue;
    reachable[id] = 1;
    for (NodeId opnd : dag.nodes[id].operands) stack.push_back(opnd);
  }

  DagBuilder b;
  std::vector<NodeId> remap(dag.nodes.size(), kNoNode);
  for (NodeId id = 0; id < dag.nodes.size(); ++id) {
    if (!reachable[id]) continue;
    const Node& n = dag.nodes[id];
    std::vector<NodeId> ops;
    ops.reserve(n.operands.size());
    for (NodeId opnd : n.operands) ops.push_back(remap[opnd]);
    remap[id] = b.add(n.op, n.sort, std::move(ops), n.value, n.name);
  }

  std::vector<NodeId> roots;
  roots.reserve(dag.roots.size());
  for (NodeId r : dag.roots) roots.push_back(remap[r]);
  if (remap_out) *remap_out = std::move(remap);
  return b.freeze(std::move(roots));
}

}  // namespace simpforge
