#include "simpforge/matcher.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

namespace simpforge {

namespace {

bool is_variable(const Node& n) { return n.op == OpKind::Source || n.op == OpKind::Ctrl; }

AbstractValue fact_at(const std::vector<AbstractValue>& facts, NodeId id) {
  return id < facts.size() ? facts[id] : AbstractValue::top();
}

// Guard discharge per atom: hash-consed node identity settles (in)equalities
// between identical nodes instantly; everything else defers to the analysis
// facts of the bound nodes.
bool discharge(const Predicate& pred, const std::map<std::string, NodeId>& binding,
               const std::vector<AbstractValue>& facts) {
  for (const Atom& a : pred.atoms) {
    NodeId l = binding.at(a.lhs);
    std::map<std::string, AbstractValue> view{{a.lhs, fact_at(facts, l)}};
    if (!a.rhs_is_const) {
      NodeId r = binding.at(a.rhs_var);
      if (l == r) {
        if (a.rel == Rel::Eq || a.rel == Rel::Le) continue;
        return false;  // x != x and x < x never hold
      }
      view.emplace(a.rhs_var, fact_at(facts, r));
    }
    if (implies(view, make_predicate({a})) != Tri::True) return false;
  }
  return true;
}

}  // namespace

// ---- compilation ----

void Matcher::insert_sequence(Net& net, const std::vector<Instr>& seq, Leaf leaf) {
  std::vector<std::size_t>* level = &net.top;
  std::size_t at = 0;
  for (const Instr& instr : seq) {
    std::size_t next = net.nodes.size();
    for (std::size_t c : *level)
      if (net.nodes[c].instr == instr) {
        next = c;
        break;
      }
    if (next == net.nodes.size()) {
      level->push_back(next);
      net.nodes.push_back({instr, {}, {}});
    }
    at = next;
    level = &net.nodes[at].children;
  }
  net.nodes[at].leaves.push_back(std::move(leaf));
}

Matcher Matcher::compile(std::vector<RewriteRule> rules, std::vector<std::size_t> order) {
  Matcher m;
  m.rules_ = std::move(rules);
  if (order.empty()) {
    order.resize(m.rules_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  }
  std::set<std::size_t> seen_ids;
  for (std::size_t id : order) {
    if (id >= m.rules_.size()) throw ValidationError("rule order references unknown rule");
    if (!seen_ids.insert(id).second) throw ValidationError("rule order repeats a rule");
  }
  m.order_ = std::move(order);

  struct Variant {
    std::vector<Instr> seq;
    std::vector<std::string> names;
    std::uint32_t slots = 1;
    bool operator<(const Variant& o) const {
      return std::tie(seq, names) < std::tie(o.seq, o.names);
    }
  };

  for (std::size_t rank = 0; rank < m.order_.size(); ++rank) {
    std::size_t id = m.order_[rank];
    const RewriteRule& rule = m.rules_[id];
    validate_rule(rule);
    const FormulaDag& lhs = rule.lhs.dag;

    struct State {
      std::vector<std::pair<NodeId, std::uint32_t>> pending;  // front = next
      std::vector<Instr> seq;
      std::map<NodeId, std::uint32_t> seen;
      std::map<std::string, std::uint32_t> bound;
      std::vector<std::string> names;
      std::uint32_t next_slot = 1;
    };

    std::set<Variant> variants;
    std::vector<State> work;
    work.push_back({{{lhs.roots.at(0), 0}}, {}, {}, {}, {}, 1});
    while (!work.empty()) {
      State st = std::move(work.back());
      work.pop_back();
      bool branched = false;
      while (!st.pending.empty() && !branched) {
        auto [cur, slot] = st.pending.front();
        st.pending.erase(st.pending.begin());
        const Node& n = lhs.node(cur);

        if (auto it = st.seen.find(cur); it != st.seen.end()) {
          Instr instr;
          instr.kind = Instr::Kind::Same;
          instr.slot = slot;
          instr.other = it->second;
          st.seq.push_back(instr);
          continue;
        }
        if (is_variable(n)) {
          if (auto it = st.bound.find(n.name); it != st.bound.end()) {
            Instr instr;
            instr.kind = Instr::Kind::Same;
            instr.slot = slot;
            instr.other = it->second;
            st.seq.push_back(instr);
          } else {
            Instr instr;
            instr.kind = Instr::Kind::Bind;
            instr.slot = slot;
            instr.sort = n.sort;
            st.seq.push_back(instr);
            st.bound.emplace(n.name, slot);
            st.names.push_back(n.name);
          }
          continue;
        }
        if (n.op == OpKind::Const) {
          Instr instr;
          instr.kind = Instr::Kind::Const;
          instr.slot = slot;
          instr.sort = n.sort;
          instr.value = n.value;
          st.seq.push_back(instr);
          continue;
        }

        st.seen.emplace(cur, slot);
        Instr instr;
        instr.kind = Instr::Kind::Op;
        instr.slot = slot;
        instr.op = n.op;
        instr.sort = n.sort;
        instr.arity = static_cast<std::uint32_t>(n.operands.size());
        instr.child_base = st.next_slot;
        st.seq.push_back(instr);
        std::uint32_t base = st.next_slot;
        st.next_slot += instr.arity;

        if (is_commutative(n.op) && n.operands.size() == 2 &&
            n.operands[0] != n.operands[1]) {
          State swapped = st;
          st.pending.insert(st.pending.begin(),
                            {{n.operands[0], base}, {n.operands[1], base + 1}});
          swapped.pending.insert(swapped.pending.begin(),
                                 {{n.operands[1], base}, {n.operands[0], base + 1}});
          work.push_back(std::move(st));
          work.push_back(std::move(swapped));
          branched = true;
          continue;
        }
        for (std::size_t i = n.operands.size(); i-- > 0;)
          st.pending.insert(st.pending.begin(),
                            {n.operands[i], base + static_cast<std::uint32_t>(i)});
      }
      if (!branched) variants.insert({std::move(st.seq), std::move(st.names), st.next_slot});
    }

    OpKind root_op = lhs.node(lhs.roots.at(0)).op;
    Net& net = m.nets_[root_op];
    for (const Variant& v : variants) {
      net.slot_count = std::max(net.slot_count, v.slots);
      insert_sequence(net, v.seq, {id, v.names});
    }
  }
  return m;
}

// ---- matching ----

void Matcher::match_net(const Net& net, const FormulaDag& dag, NodeId node,
                        const std::vector<AbstractValue>& facts,
                        std::vector<Match>& out) const {
  std::vector<NodeId> slots(net.slot_count, kNoNode);
  slots[0] = node;
  std::vector<NodeId> binds;
  std::vector<bool> taken(rules_.size(), false);

  // Sibling branches may reuse slot numbers, but each path writes a slot
  // before any of its instructions read it, so no save/restore is needed.
  std::function<void(std::size_t)> walk = [&](std::size_t at) {
    const NetNode& t = net.nodes[at];
    const Instr& instr = t.instr;
    bool bound_here = false;
    switch (instr.kind) {
      case Instr::Kind::Op: {
        const Node& s = dag.node(slots[instr.slot]);
        if (s.op != instr.op || s.sort != instr.sort ||
            s.operands.size() != instr.arity)
          return;
        for (std::uint32_t i = 0; i < instr.arity; ++i)
          slots[instr.child_base + i] = s.operands[i];
        break;
      }
      case Instr::Kind::Const: {
        const Node& s = dag.node(slots[instr.slot]);
        if (s.op != OpKind::Const || s.sort != instr.sort || s.value != instr.value) return;
        break;
      }
      case Instr::Kind::Bind: {
        if (dag.node(slots[instr.slot]).sort != instr.sort) return;
        binds.push_back(slots[instr.slot]);
        bound_here = true;
        break;
      }
      case Instr::Kind::Same:
        if (slots[instr.slot] != slots[instr.other]) return;
        break;
    }
    for (const Leaf& leaf : t.leaves) {
      if (taken[leaf.rule]) continue;
      std::map<std::string, NodeId> binding;
      for (std::size_t i = 0; i < leaf.names.size(); ++i)
        binding.emplace(leaf.names[i], binds[i]);
      if (!discharge(rules_[leaf.rule].pred, binding, facts)) continue;
      taken[leaf.rule] = true;
      out.push_back({leaf.rule, std::move(binding)});
    }
    for (std::size_t c : t.children) walk(c);
    if (bound_here) binds.pop_back();
  };

  for (std::size_t top : net.top) walk(top);
}

std::vector<Match> Matcher::match_at(const FormulaDag& dag, NodeId node,
                                     const std::vector<AbstractValue>& facts) const {
  std::vector<Match> found;
  auto it = nets_.find(dag.node(node).op);
  if (it == nets_.end()) return found;
  match_net(it->second, dag, node, facts, found);

  std::vector<std::size_t> rank(rules_.size(), rules_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) rank[order_[i]] = i;
  std::sort(found.begin(), found.end(),
            [&](const Match& a, const Match& b) { return rank[a.rule] < rank[b.rule]; });
  return found;
}

std::size_t Matcher::test_count() const {
  std::size_t total = 0;
  for (const auto& [op, net] : nets_) total += net.nodes.size();
  return total;
}

// ---- serialization ----

namespace {

constexpr char kMagic[4] = {'S', 'F', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 8);
}

void put_i64(std::ostream& out, std::int64_t v) { put_u64(out, static_cast<std::uint64_t>(v)); }

void put_str(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  put_bytes(out, s.data(), s.size());
}

void get_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw FormatError("matcher image truncated");
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::int64_t get_i64(std::istream& in) { return static_cast<std::int64_t>(get_u64(in)); }

std::string get_str(std::istream& in) {
  std::uint64_t n = get_u64(in);
  if (n > (std::uint64_t{1} << 32)) throw FormatError("matcher image string too large");
  std::string s(static_cast<std::size_t>(n), '\0');
  get_bytes(in, s.data(), s.size());
  return s;
}

template <typename Enum>
Enum get_enum(std::istream& in, Enum last) {
  std::uint8_t raw;
  get_bytes(in, &raw, 1);
  if (raw > static_cast<std::uint8_t>(last)) throw FormatError("matcher image enum out of range");
  return static_cast<Enum>(raw);
}

}  // namespace

void serialize_matcher(std::ostream& out, const Matcher& m) {
  put_bytes(out, kMagic, 4);
  put_u32(out, kVersion);

  put_u64(out, m.rules_.size());
  for (const RewriteRule& rule : m.rules_) {
    RuleText text = rule_to_text(rule);
    put_str(out, text.d);
    put_str(out, text.f);
    put_str(out, text.p);
    put_str(out, text.meta);
  }
  put_u64(out, m.order_.size());
  for (std::size_t id : m.order_) put_u64(out, id);

  put_u64(out, m.nets_.size());
  for (const auto& [op, net] : m.nets_) {
    std::uint8_t opv = static_cast<std::uint8_t>(op);
    put_bytes(out, &opv, 1);
    put_u32(out, net.slot_count);
    put_u64(out, net.nodes.size());
    for (const Matcher::NetNode& t : net.nodes) {
      std::uint8_t kind = static_cast<std::uint8_t>(t.instr.kind);
      std::uint8_t iop = static_cast<std::uint8_t>(t.instr.op);
      std::uint8_t isort = static_cast<std::uint8_t>(t.instr.sort);
      put_bytes(out, &kind, 1);
      put_u32(out, t.instr.slot);
      put_bytes(out, &iop, 1);
      put_bytes(out, &isort, 1);
      put_u32(out, t.instr.arity);
      put_u32(out, t.instr.child_base);
      put_i64(out, t.instr.value);
      put_u32(out, t.instr.other);
      put_u64(out, t.children.size());
      for (std::size_t c : t.children) put_u64(out, c);
      put_u64(out, t.leaves.size());
      for (const Matcher::Leaf& leaf : t.leaves) {
        put_u64(out, leaf.rule);
        put_u64(out, leaf.names.size());
        for (const std::string& name : leaf.names) put_str(out, name);
      }
    }
    put_u64(out, net.top.size());
    for (std::size_t t : net.top) put_u64(out, t);
  }
  if (!out) throw FormatError("matcher image write failed");
}

Matcher deserialize_matcher(std::istream& in) {
  char magic[4];
  get_bytes(in, magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("not a matcher image");
  if (std::uint32_t v = get_u32(in); v != kVersion)
    throw FormatError("unsupported matcher image version " + std::to_string(v));

  Matcher m;
  std::uint64_t nrules = get_u64(in);
  for (std::uint64_t i = 0; i < nrules; ++i) {
    RuleText text;
    text.d = get_str(in);
    text.f = get_str(in);
    text.p = get_str(in);
    text.meta = get_str(in);
    m.rules_.push_back(rule_from_text(text));
  }
  std::uint64_t norder = get_u64(in);
  for (std::uint64_t i = 0; i < norder; ++i) {
    std::uint64_t id = get_u64(in);
    if (id >= m.rules_.size()) throw FormatError("matcher image order out of range");
    m.order_.push_back(static_cast<std::size_t>(id));
  }

  std::uint64_t nnets = get_u64(in);
  for (std::uint64_t i = 0; i < nnets; ++i) {
    OpKind op = get_enum(in, OpKind::Assert);
    Matcher::Net net;
    net.slot_count = get_u32(in);
    std::uint64_t nnodes = get_u64(in);
    for (std::uint64_t t = 0; t < nnodes; ++t) {
      Matcher::NetNode node;
      node.instr.kind = get_enum(in, Matcher::Instr::Kind::Same);
      node.instr.slot = get_u32(in);
      node.instr.op = get_enum(in, OpKind::Assert);
      node.instr.sort = get_enum(in, Sort::IntArr);
      node.instr.arity = get_u32(in);
      node.instr.child_base = get_u32(in);
      node.instr.value = get_i64(in);
      node.instr.other = get_u32(in);
      if (node.instr.slot >= net.slot_count ||
          (node.instr.kind == Matcher::Instr::Kind::Op &&
           std::uint64_t{node.instr.child_base} + node.instr.arity > net.slot_count) ||
          (node.instr.kind == Matcher::Instr::Kind::Same && node.instr.other >= net.slot_count))
        throw FormatError("matcher image slot out of range");
      std::uint64_t nchildren = get_u64(in);
      for (std::uint64_t c = 0; c < nchildren; ++c) {
        std::uint64_t idx = get_u64(in);
        if (idx >= nnodes) throw FormatError("matcher image child out of range");
        node.children.push_back(static_cast<std::size_t>(idx));
      }
      std::uint64_t nleaves = get_u64(in);
      for (std::uint64_t l = 0; l < nleaves; ++l) {
        Matcher::Leaf leaf;
        std::uint64_t rid = get_u64(in);
        if (rid >= m.rules_.size()) throw FormatError("matcher image leaf rule out of range");
        leaf.rule = static_cast<std::size_t>(rid);
        std::uint64_t nnames = get_u64(in);
        for (std::uint64_t k = 0; k < nnames; ++k) leaf.names.push_back(get_str(in));
        node.leaves.push_back(std::move(leaf));
      }
      net.nodes.push_back(std::move(node));
    }
    std::uint64_t ntop = get_u64(in);
    for (std::uint64_t t = 0; t < ntop; ++t) {
      std::uint64_t idx = get_u64(in);
      if (idx >= net.nodes.size()) throw FormatError("matcher image top index out of range");
      net.top.push_back(static_cast<std::size_t>(idx));
    }
    m.nets_.emplace(op, std::move(net));
  }
  return m;
}

void write_matcher(const std::filesystem::path& path, const Matcher& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  serialize_matcher(out, m);
}

Matcher read_matcher(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return deserialize_matcher(in);
}

}  // namespace simpforge
