#include <algorithm>

#include "simpforge/dag.hpp"

namespace simpforge {

std::int64_t wrap_int(std::int64_t v, int bits) {
  if (bits <= 0 || bits >= 64) return v;
  std::uint64_t m = (std::uint64_t{1} << bits) - 1;
  std::uint64_t u = static_cast<std::uint64_t>(v) & m;
  if (u & (std::uint64_t{1} << (bits - 1))) u |= ~m;
  return static_cast<std::int64_t>(u);
}

std::int64_t int_min_for(int bits) {
  if (bits <= 0 || bits >= 64) return INT64_MIN;
  return -(std::int64_t{1} << (bits - 1));
}

std::int64_t int_max_for(int bits) {
  if (bits <= 0 || bits >= 64) return INT64_MAX;
  return (std::int64_t{1} << (bits - 1)) - 1;
}

namespace {

std::int64_t add_wrap(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) +
                                   static_cast<std::uint64_t>(b));
}

std::int64_t mul_wrap(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) *
                                   static_cast<std::uint64_t>(b));
}

std::int64_t neg_wrap(std::int64_t a) {
  return static_cast<std::int64_t>(~static_cast<std::uint64_t>(a) + 1);
}

}  // namespace

// Shared by evaluate and constant_fold so folding can never drift from the
// interpreter. Handles every op whose inputs are scalars.
std::int64_t scalar_op_value(OpKind op, const std::vector<std::int64_t>& a,
                             const EvalOptions& opts) {
  int w = opts.int_bits;
  switch (op) {
    case OpKind::Not: return a[0] ? 0 : 1;
    case OpKind::And: return (a[0] && a[1]) ? 1 : 0;
    case OpKind::Or: return (a[0] || a[1]) ? 1 : 0;
    case OpKind::Xor: return (a[0] != a[1]) ? 1 : 0;
    case OpKind::Plus: return wrap_int(add_wrap(a[0], a[1]), w);
    case OpKind::Times: return wrap_int(mul_wrap(a[0], a[1]), w);
    case OpKind::Neg: return wrap_int(neg_wrap(a[0]), w);
    case OpKind::Div:
      if (a[1] == 0) return 0;  // total semantics: x/0 = 0
      if (a[0] == INT64_MIN && a[1] == -1) return wrap_int(INT64_MIN, w);
      return wrap_int(a[0] / a[1], w);
    case OpKind::Mod:
      if (a[1] == 0) return 0;  // total semantics: x%0 = 0
      if (a[0] == INT64_MIN && a[1] == -1) return 0;
      return wrap_int(a[0] % a[1], w);
    case OpKind::Eq: return a[0] == a[1] ? 1 : 0;
    case OpKind::Lt: return a[0] < a[1] ? 1 : 0;
    case OpKind::ArrAcc: {
      // operand 0 is the selector; out-of-range clamps to the last choice
      std::int64_t s = a[0];
      std::int64_t count = static_cast<std::int64_t>(a.size()) - 1;
      if (s < 0 || s >= count) s = count - 1;
      return a[1 + s];
    }
    case OpKind::Assert: return a[0];
    default:
      throw EvalError(std::string("scalar_op_value: unsupported op ") + op_token(op));
  }
}

namespace {

std::int64_t expect_scalar(const Value& v, NodeId id) {
  if (!std::holds_alternative<std::int64_t>(v))
    throw EvalError("node " + std::to_string(id) + ": expected a scalar operand");
  return std::get<std::int64_t>(v);
}

const std::vector<std::int64_t>& expect_array(const Value& v, NodeId id) {
  if (!std::holds_alternative<std::vector<std::int64_t>>(v))
    throw EvalError("node " + std::to_string(id) + ": expected an array operand");
  return std::get<std::vector<std::int64_t>>(v);
}

}  // namespace

EvalResult evaluate(const FormulaDag& dag, const Environment& env,
                    const EvalOptions& opts) {
  EvalResult res;
  res.values.resize(dag.nodes.size(), Value{std::int64_t{0}});

  for (NodeId id = 0; id < dag.nodes.size(); ++id) {
    const Node& n = dag.nodes[id];
    switch (n.op) {
      case OpKind::Const:
        res.values[id] = n.sort == Sort::Bool ? n.value : wrap_int(n.value, opts.int_bits);
        break;
      case OpKind::Source:
      case OpKind::Ctrl: {
        auto it = env.find(n.name);
        if (it == env.end())
          throw EvalError("no value for source " + n.name);
        if (is_scalar(n.sort)) {
          std::int64_t v = expect_scalar(it->second, id);
          if (n.sort == Sort::Bool && v != 0 && v != 1)
            throw EvalError("boolean source " + n.name + " must be 0 or 1");
          res.values[id] = n.sort == Sort::Bool ? v : wrap_int(v, opts.int_bits);
        } else {
          std::vector<std::int64_t> a = expect_array(it->second, id);
          a.resize(static_cast<std::size_t>(opts.array_len), 0);
          for (auto& e : a) {
            if (n.sort == Sort::BoolArr && e != 0 && e != 1)
              throw EvalError("boolean array source " + n.name + " must hold 0/1");
            if (n.sort != Sort::BoolArr) e = wrap_int(e, opts.int_bits);
          }
          res.values[id] = std::move(a);
        }
        break;
      }
      case OpKind::ArrRead: {
        std::int64_t idx = expect_scalar(res.values[n.operands[0]], id);
        const auto& arr = expect_array(res.values[n.operands[1]], id);
        if (idx < 0 || idx >= static_cast<std::int64_t>(arr.size())) {
          if (opts.strict_arrays)
            throw EvalError("node " + std::to_string(id) + ": array read out of range");
          res.values[id] = std::int64_t{0};
        } else {
          res.values[id] = arr[static_cast<std::size_t>(idx)];
        }
        break;
      }
      case OpKind::ArrWrite: {
        std::int64_t idx = expect_scalar(res.values[n.operands[0]], id);
        std::vector<std::int64_t> arr = expect_array(res.values[n.operands[1]], id);
        std::int64_t val = expect_scalar(res.values[n.operands[2]], id);
        if (idx < 0 || idx >= static_cast<std::int64_t>(arr.size())) {
          if (opts.strict_arrays)
            throw EvalError("node " + std::to_string(id) + ": array write out of range");
          // total mode: out-of-range writes are dropped
        } else {
          arr[static_cast<std::size_t>(idx)] = val;
        }
        res.values[id] = std::move(arr);
        break;
      }
      case OpKind::ArrCreate: {
        if (n.operands.size() > static_cast<std::size_t>(opts.array_len))
          throw EvalError("node " + std::to_string(id) + ": ARR_CREATE wider than array length");
        std::vector<std::int64_t> arr(static_cast<std::size_t>(opts.array_len), 0);
        for (std::size_t i = 0; i < n.operands.size(); ++i)
          arr[i] = expect_scalar(res.values[n.operands[i]], id);
        res.values[id] = std::move(arr);
        break;
      }
      default: {
        std::vector<std::int64_t> args;
        args.reserve(n.operands.size());
        for (NodeId opnd : n.operands)
          args.push_back(expect_scalar(res.values[opnd], id));
        std::int64_t v = scalar_op_value(n.op, args, opts);
        if (n.op == OpKind::Assert && v != 1) res.failed_asserts.push_back(id);
        res.values[id] = v;
        break;
      }
    }
  }
  return res;
}

Value eval_node(const FormulaDag& dag, NodeId id, const Environment& env,
                const EvalOptions& opts) {
  return evaluate(dag, env, opts).values[id];
}

FormulaDag constant_fold(const FormulaDag& dag, const EvalOptions& opts,
                         std::vector<NodeId>* remap_out) {
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
    bool all_const = !is_leaf(n.op) && !n.operands.empty();
    for (NodeId opnd : n.operands) {
      ops.push_back(remap[opnd]);
      if (b.node(remap[opnd]).op != OpKind::Const) all_const = false;
    }
    if (all_const && is_scalar(n.sort)) {
      std::vector<std::int64_t> args;
      args.reserve(ops.size());
      for (NodeId opnd : ops) {
        const Node& c = b.node(opnd);
        args.push_back(c.sort == Sort::Bool ? c.value : wrap_int(c.value, opts.int_bits));
      }
      remap[id] = b.add_const(n.sort, scalar_op_value(n.op, args, opts));
    } else {
      remap[id] = b.add(n.op, n.sort, std::move(ops), n.value, n.name);
    }
  }

  std::vector<NodeId> roots;
  roots.reserve(dag.roots.size());
  for (NodeId r : dag.roots) roots.push_back(remap[r]);

  // Folding can orphan the operands it replaced; prune them from the result.
  std::vector<NodeId> prune;
  FormulaDag out = hash_cons(b.freeze(std::move(roots)), &prune);
  if (remap_out) {
    remap_out->assign(dag.nodes.size(), kNoNode);
    for (NodeId id = 0; id < dag.nodes.size(); ++id)
      if (remap[id] != kNoNode) (*remap_out)[id] = prune[remap[id]];
  }
  return out;
}

}  // namespace simpforge
