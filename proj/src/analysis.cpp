#include "simpforge/analysis.hpp"

#include <algorithm>
#include <charconv>

namespace simpforge {

AbstractValue AbstractValue::top() { return {}; }

AbstractValue AbstractValue::range(std::int64_t lo, std::int64_t hi) {
  if (lo == hi) return constant(lo);
  AbstractValue v;
  v.kind = Kind::Range;
  v.lo = lo;
  v.hi = hi;
  return v;
}

AbstractValue AbstractValue::list(std::vector<std::int64_t> vs) {
  std::sort(vs.begin(), vs.end());
  vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
  if (vs.empty()) return top();
  AbstractValue v;
  v.kind = Kind::List;
  v.values = std::move(vs);
  return v;
}

std::int64_t AbstractValue::min() const {
  return kind == Kind::List ? values.front() : lo;
}

std::int64_t AbstractValue::max() const {
  return kind == Kind::List ? values.back() : hi;
}

bool AbstractValue::contains(std::int64_t v) const {
  switch (kind) {
    case Kind::Top: return true;
    case Kind::Range: return lo <= v && v <= hi;
    case Kind::List: return std::binary_search(values.begin(), values.end(), v);
  }
  return true;
}

namespace {

using i128 = __int128;

i128 iabs(i128 v) { return v < 0 ? -v : v; }

bool is_definite(const AbstractValue& v, std::int64_t& out) {
  if (!v.bounded() || v.min() != v.max()) return false;
  out = v.min();
  return true;
}

// Final shaping of any computed fact: booleans stay within {0,1} (full
// uncertainty spelled Range(0,1)), integers are wrapped/widened to the
// evaluation width, oversized lists widen to their hull.
AbstractValue clamp_sort(AbstractValue v, Sort sort, const AnalysisOptions& opts) {
  if (is_array(sort)) return AbstractValue::top();

  if (sort == Sort::Bool) {
    if (v.is_list()) {
      std::vector<std::int64_t> kept;
      for (std::int64_t x : v.values)
        if (x == 0 || x == 1) kept.push_back(x);
      if (kept.size() == 1) return AbstractValue::constant(kept.front());
      return AbstractValue::range(0, 1);
    }
    if (v.is_range()) {
      std::int64_t lo = std::max<std::int64_t>(v.lo, 0);
      std::int64_t hi = std::min<std::int64_t>(v.hi, 1);
      if (lo > hi) return AbstractValue::range(0, 1);
      return AbstractValue::range(lo, hi);
    }
    return AbstractValue::range(0, 1);
  }

  int w = opts.int_bits;
  if (v.is_list()) {
    if (w > 0) {
      for (std::int64_t& x : v.values) x = wrap_int(x, w);
      v = AbstractValue::list(std::move(v.values));
    }
    if (v.is_list() && v.values.size() > opts.list_cap)
      v = AbstractValue::range(v.values.front(), v.values.back());
    return v;
  }
  if (v.is_range() && w > 0 && (v.lo < int_min_for(w) || v.hi > int_max_for(w)))
    return AbstractValue::range(int_min_for(w), int_max_for(w));
  return v;
}

AbstractValue from_interval(i128 lo, i128 hi, Sort sort, const AnalysisOptions& opts) {
  if (lo < INT64_MIN || hi > INT64_MAX) {
    if (opts.int_bits > 0)
      return AbstractValue::range(int_min_for(opts.int_bits), int_max_for(opts.int_bits));
    return clamp_sort(AbstractValue::top(), sort, opts);
  }
  return clamp_sort(
      AbstractValue::range(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)),
      sort, opts);
}

AbstractValue join(const std::vector<AbstractValue>& parts, Sort sort,
                   const AnalysisOptions& opts) {
  std::vector<std::int64_t> pool;
  bool all_lists = true;
  i128 lo = 0, hi = 0;
  bool first = true;
  for (const AbstractValue& p : parts) {
    if (p.is_top()) return clamp_sort(AbstractValue::top(), sort, opts);
    if (p.is_list())
      pool.insert(pool.end(), p.values.begin(), p.values.end());
    else
      all_lists = false;
    lo = first ? i128{p.min()} : std::min<i128>(lo, p.min());
    hi = first ? i128{p.max()} : std::max<i128>(hi, p.max());
    first = false;
  }
  if (first) return clamp_sort(AbstractValue::top(), sort, opts);
  if (all_lists) return clamp_sort(AbstractValue::list(std::move(pool)), sort, opts);
  return from_interval(lo, hi, sort, opts);
}

// Exhaustive product-space evaluation; exact for independent inputs.
AbstractValue enumerate_op(OpKind op, const std::vector<AbstractValue>& in, Sort sort,
                           const AnalysisOptions& opts) {
  EvalOptions eo;
  eo.int_bits = opts.int_bits;
  eo.array_len = opts.array_len;

  std::vector<std::size_t> cursor(in.size(), 0);
  std::vector<std::int64_t> args(in.size(), 0);
  std::vector<std::int64_t> out;
  for (;;) {
    for (std::size_t i = 0; i < in.size(); ++i) args[i] = in[i].values[cursor[i]];
    out.push_back(scalar_op_value(op, args, eo));

    std::size_t i = 0;
    while (i < in.size() && ++cursor[i] == in[i].values.size()) cursor[i++] = 0;
    if (i == in.size()) break;
  }
  return clamp_sort(AbstractValue::list(std::move(out)), sort, opts);
}

Tri eq_state(const AbstractValue& a, const AbstractValue& b) {
  std::int64_t va = 0, vb = 0;
  if (is_definite(a, va) && is_definite(b, vb)) return va == vb ? Tri::True : Tri::False;
  if (!a.bounded() || !b.bounded()) return Tri::Unknown;
  if (a.max() < b.min() || b.max() < a.min()) return Tri::False;
  if (a.is_list()) {
    bool any = false;
    for (std::int64_t v : a.values) any = any || b.contains(v);
    if (!any) return Tri::False;
  } else if (b.is_list()) {
    bool any = false;
    for (std::int64_t v : b.values) any = any || a.contains(v);
    if (!any) return Tri::False;
  }
  return Tri::Unknown;
}

AbstractValue tri_bool(Tri t) {
  switch (t) {
    case Tri::True: return AbstractValue::constant(1);
    case Tri::False: return AbstractValue::constant(0);
    case Tri::Unknown: break;
  }
  return AbstractValue::range(0, 1);
}

}  // namespace

AbstractValue transfer(OpKind op, const std::vector<AbstractValue>& in, Sort result_sort,
                       const AnalysisOptions& opts) {
  if (is_array(result_sort)) return AbstractValue::top();
  if (is_leaf(op)) return clamp_sort(AbstractValue::top(), result_sort, opts);

  std::int64_t v = 0;
  if (op == OpKind::And) {
    for (const AbstractValue& a : in)
      if (is_definite(a, v) && v == 0) return AbstractValue::constant(0);
  }
  if (op == OpKind::Or) {
    for (const AbstractValue& a : in)
      if (is_definite(a, v) && v == 1) return AbstractValue::constant(1);
  }

  if (op == OpKind::Assert) return clamp_sort(in[0], Sort::Bool, opts);
  if (op == OpKind::ArrRead) return clamp_sort(AbstractValue::top(), result_sort, opts);

  if (op == OpKind::ArrAcc) {
    const AbstractValue& sel = in[0];
    std::int64_t count = static_cast<std::int64_t>(in.size()) - 1;
    std::vector<AbstractValue> chosen;
    if (sel.is_list()) {
      for (std::int64_t s : sel.values) {
        if (s < 0 || s >= count) s = count - 1;
        chosen.push_back(in[1 + static_cast<std::size_t>(s)]);
      }
    } else {
      chosen.assign(in.begin() + 1, in.end());
    }
    return join(chosen, result_sort, opts);
  }

  bool all_lists = true;
  std::size_t tuples = 1;
  for (const AbstractValue& a : in) {
    if (!a.is_list()) {
      all_lists = false;
      break;
    }
    tuples *= a.values.size();
    if (tuples > opts.enum_budget) {
      all_lists = false;
      break;
    }
  }
  if (all_lists) return enumerate_op(op, in, result_sort, opts);

  switch (op) {
    case OpKind::Not: {
      if (is_definite(in[0], v)) return AbstractValue::constant(v ? 0 : 1);
      return AbstractValue::range(0, 1);
    }
    case OpKind::And:
    case OpKind::Or:
    case OpKind::Xor: {
      std::int64_t a0 = 0, a1 = 0;
      if (is_definite(in[0], a0) && is_definite(in[1], a1))
        return AbstractValue::constant(scalar_op_value(op, {a0, a1}, {}));
      return AbstractValue::range(0, 1);
    }
    case OpKind::Eq:
      return tri_bool(eq_state(in[0], in[1]));
    case OpKind::Lt: {
      if (!in[0].bounded() || !in[1].bounded()) return AbstractValue::range(0, 1);
      if (in[0].max() < in[1].min()) return AbstractValue::constant(1);
      if (in[0].min() >= in[1].max()) return AbstractValue::constant(0);
      return AbstractValue::range(0, 1);
    }
    case OpKind::Plus: {
      if (!in[0].bounded() || !in[1].bounded()) return AbstractValue::top();
      return from_interval(i128{in[0].min()} + in[1].min(), i128{in[0].max()} + in[1].max(),
                           result_sort, opts);
    }
    case OpKind::Times: {
      if (!in[0].bounded() || !in[1].bounded()) return AbstractValue::top();
      i128 c[4] = {i128{in[0].min()} * in[1].min(), i128{in[0].min()} * in[1].max(),
                   i128{in[0].max()} * in[1].min(), i128{in[0].max()} * in[1].max()};
      return from_interval(*std::min_element(c, c + 4), *std::max_element(c, c + 4),
                           result_sort, opts);
    }
    case OpKind::Neg: {
      if (!in[0].bounded()) return AbstractValue::top();
      return from_interval(-i128{in[0].max()}, -i128{in[0].min()}, result_sort, opts);
    }
    case OpKind::Div: {
      const AbstractValue& a = in[0];
      const AbstractValue& b = in[1];
      if (is_definite(b, v) && v == 0) return AbstractValue::constant(0);
      std::vector<i128> divisors;
      if (b.is_list()) {
        for (std::int64_t d : b.values)
          if (d != 0) divisors.push_back(d);
      } else if (b.is_range()) {
        if (b.lo != 0) divisors.push_back(b.lo);
        if (b.hi != 0) divisors.push_back(b.hi);
        if (b.contains(-1)) divisors.push_back(-1);
        if (b.contains(1)) divisors.push_back(1);
      } else {
        divisors.push_back(-1);
        divisors.push_back(1);
      }
      if (!a.bounded()) return AbstractValue::top();
      i128 lo = 0, hi = 0;
      bool first = true;
      if (b.contains(0)) first = false;  // division by zero contributes 0
      for (i128 d : divisors) {
        for (i128 num : {i128{a.min()}, i128{a.max()}}) {
          i128 q = num / d;
          lo = first ? q : std::min(lo, q);
          hi = first ? q : std::max(hi, q);
          first = false;
        }
      }
      if (first) return AbstractValue::constant(0);
      return from_interval(lo, hi, result_sort, opts);
    }
    case OpKind::Mod: {
      const AbstractValue& a = in[0];
      const AbstractValue& b = in[1];
      if (is_definite(b, v) && v == 0) return AbstractValue::constant(0);
      if (!a.bounded() && !b.bounded()) return AbstractValue::top();
      i128 lo = INT64_MIN, hi = INT64_MAX;
      if (b.bounded()) {
        i128 m = std::max(iabs(b.min()), iabs(b.max()));
        i128 mmax = m >= 1 ? m - 1 : 0;
        lo = -mmax;
        hi = mmax;
      }
      if (a.bounded()) {
        lo = std::max(lo, std::min<i128>(a.min(), 0));
        hi = std::min(hi, std::max<i128>(a.max(), 0));
      }
      return from_interval(lo, hi, result_sort, opts);
    }
    default:
      return clamp_sort(AbstractValue::top(), result_sort, opts);
  }
}

std::vector<AbstractValue> analyze(const FormulaDag& dag,
                                   const std::map<std::string, AbstractValue>& seed_facts,
                                   const AnalysisOptions& opts) {
  std::vector<AbstractValue> facts(dag.nodes.size());
  for (NodeId id = 0; id < dag.nodes.size(); ++id) {
    const Node& n = dag.nodes[id];
    switch (n.op) {
      case OpKind::Const:
        facts[id] = AbstractValue::constant(wrap_int(n.value, opts.int_bits));
        break;
      case OpKind::Source:
      case OpKind::Ctrl: {
        auto it = seed_facts.find(n.name);
        if (it != seed_facts.end())
          facts[id] = clamp_sort(it->second, n.sort, opts);
        else if (n.sort == Sort::Bool)
          facts[id] = AbstractValue::range(0, 1);
        else
          facts[id] = AbstractValue::top();
        break;
      }
      case OpKind::ArrRead: {
        const Node& arr = dag.nodes[n.operands[1]];
        if (arr.op != OpKind::ArrCreate) {
          facts[id] = clamp_sort(AbstractValue::top(), n.sort, opts);
          break;
        }
        // Reads of a literal array join the selected element facts; any index
        // that can land past the written elements (padding or out of range)
        // contributes the default 0.
        const AbstractValue& idx = facts[n.operands[0]];
        std::int64_t elems = static_cast<std::int64_t>(arr.operands.size());
        std::vector<AbstractValue> parts;
        if (idx.is_list()) {
          bool defaulted = false;
          for (std::int64_t s : idx.values) {
            if (s >= 0 && s < elems)
              parts.push_back(facts[arr.operands[static_cast<std::size_t>(s)]]);
            else
              defaulted = true;
          }
          if (defaulted) parts.push_back(AbstractValue::constant(0));
        } else {
          for (NodeId e : arr.operands) parts.push_back(facts[e]);
          parts.push_back(AbstractValue::constant(0));
        }
        facts[id] = join(parts, n.sort, opts);
        break;
      }
      default: {
        std::vector<AbstractValue> in;
        in.reserve(n.operands.size());
        for (NodeId opnd : n.operands) in.push_back(facts[opnd]);
        facts[id] = transfer(n.op, in, n.sort, opts);
        break;
      }
    }
  }
  return facts;
}

namespace {

Tri atom_state(const Atom& a, const AbstractValue& l, const AbstractValue& r) {
  switch (a.rel) {
    case Rel::Eq: return eq_state(l, r);
    case Rel::Ne: {
      Tri t = eq_state(l, r);
      if (t == Tri::True) return Tri::False;
      if (t == Tri::False) return Tri::True;
      return Tri::Unknown;
    }
    case Rel::Lt:
      if (!l.bounded() || !r.bounded()) return Tri::Unknown;
      if (l.max() < r.min()) return Tri::True;
      if (l.min() >= r.max()) return Tri::False;
      return Tri::Unknown;
    case Rel::Le:
      if (!l.bounded() || !r.bounded()) return Tri::Unknown;
      if (l.max() <= r.min()) return Tri::True;
      if (l.min() > r.max()) return Tri::False;
      return Tri::Unknown;
  }
  return Tri::Unknown;
}

}  // namespace

Tri implies(const std::map<std::string, AbstractValue>& facts, const Predicate& pred,
            const AnalysisOptions& opts) {
  std::vector<std::string> vars = predicate_variables(pred);
  std::vector<const AbstractValue*> var_facts;
  static const AbstractValue kTop = AbstractValue::top();
  bool all_lists = true;
  std::size_t tuples = 1;
  for (const std::string& name : vars) {
    auto it = facts.find(name);
    const AbstractValue* f = it == facts.end() ? &kTop : &it->second;
    var_facts.push_back(f);
    if (!f->is_list())
      all_lists = false;
    else if (all_lists) {
      tuples *= f->values.size();
      if (tuples > opts.enum_budget) all_lists = false;
    }
  }

  if (all_lists) {
    std::vector<std::size_t> cursor(vars.size(), 0);
    std::map<std::string, std::int64_t> valuation;
    bool any_true = false, any_false = false;
    for (;;) {
      for (std::size_t i = 0; i < vars.size(); ++i)
        valuation[vars[i]] = var_facts[i]->values[cursor[i]];
      (eval_predicate(pred, valuation) ? any_true : any_false) = true;
      if (any_true && any_false) return Tri::Unknown;

      std::size_t i = 0;
      while (i < vars.size() && ++cursor[i] == var_facts[i]->values.size()) cursor[i++] = 0;
      if (i == vars.size()) break;
    }
    return any_false ? Tri::False : Tri::True;
  }

  bool unknown = false;
  for (const Atom& a : pred.atoms) {
    Tri t;
    if (!a.rhs_is_const && a.rhs_var == a.lhs) {
      // same node on both sides: decided by the relation alone
      t = (a.rel == Rel::Eq || a.rel == Rel::Le) ? Tri::True : Tri::False;
    } else {
      auto lookup = [&](const std::string& name) -> const AbstractValue& {
        auto it = facts.find(name);
        return it == facts.end() ? kTop : it->second;
      };
      AbstractValue rhs =
          a.rhs_is_const ? AbstractValue::constant(a.rhs_const) : lookup(a.rhs_var);
      t = atom_state(a, lookup(a.lhs), rhs);
    }
    if (t == Tri::False) return Tri::False;
    if (t == Tri::Unknown) unknown = true;
  }
  return unknown ? Tri::Unknown : Tri::True;
}

std::string fact_to_string(const AbstractValue& v) {
  switch (v.kind) {
    case AbstractValue::Kind::Top:
      return "T";
    case AbstractValue::Kind::Range:
      return "R(" + std::to_string(v.lo) + "-" + std::to_string(v.hi) + ")";
    case AbstractValue::Kind::List: {
      std::string out = "L(|";
      for (std::int64_t x : v.values) {
        out += std::to_string(x);
        out += '|';
      }
      out += ')';
      return out;
    }
  }
  return "T";
}

AbstractValue fact_from_string(std::string_view s) {
  auto fail = [&]() -> FormatError {
    return FormatError("bad fact annotation '" + std::string(s) + "'");
  };
  auto parse_int = [&](std::string_view& rest) {
    std::int64_t v = 0;
    auto [end, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (ec != std::errc() || end == rest.data()) throw fail();
    rest.remove_prefix(static_cast<std::size_t>(end - rest.data()));
    return v;
  };

  if (s == "T") return AbstractValue::top();
  if (s.starts_with("R(") && s.ends_with(")")) {
    std::string_view rest = s.substr(2, s.size() - 3);
    std::int64_t lo = parse_int(rest);
    if (!rest.starts_with("-")) throw fail();
    rest.remove_prefix(1);
    std::int64_t hi = parse_int(rest);
    if (!rest.empty() || lo > hi) throw fail();
    return AbstractValue::range(lo, hi);
  }
  if (s.starts_with("L(|") && s.ends_with("|)")) {
    std::string_view rest = s.substr(3, s.size() - 4);
    std::vector<std::int64_t> vs;
    while (!rest.empty()) {
      vs.push_back(parse_int(rest));
      if (rest.empty()) break;
      if (!rest.starts_with("|")) throw fail();
      rest.remove_prefix(1);
    }
    if (vs.empty()) throw fail();
    return AbstractValue::list(std::move(vs));
  }
  throw fail();
}

}  // namespace simpforge
