#include <simpforge/pattern.hpp>

#include <simpforge/errors.hpp>

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>

namespace simpforge {

namespace {

bool is_source_leaf(OpKind op) { return op == OpKind::Source || op == OpKind::Ctrl; }

std::string leaf_token(const Node& n) {
  if (n.op == OpKind::Const)
    return "(CONST:" + std::to_string(n.value) + ":" + std::string(sort_token(n.sort)) + ")";
  return "(S:" + std::string(sort_token(n.sort)) + ")";
}

// Shape strings describe structure with leaf identity erased; they drive the
// canonical display order of commutative operands.
std::vector<std::string> compute_shapes(const FormulaDag& dag) {
  std::vector<std::string> shape(dag.nodes.size());
  for (NodeId id = 0; id < dag.nodes.size(); ++id) {
    const Node& n = dag.nodes[id];
    if (is_leaf(n.op)) {
      shape[id] = leaf_token(n);
      continue;
    }
    std::vector<std::string> kids;
    for (NodeId c : n.operands) kids.push_back(shape[c]);
    if (is_commutative(n.op)) std::sort(kids.begin(), kids.end());
    std::string s = "(" + std::string(op_token(n.op)) + "|";
    for (const std::string& k : kids) s += k + "|";
    shape[id] = s + ")";
  }
  return shape;
}

// All candidate operand display orders for one node: commutative operands are
// ordered by ascending shape, and operands with tied shapes appear in every
// relative order. The canonicalizer picks one final rendering among these
// branches, which is what keeps patterns with shared leaves canonical.
std::vector<std::vector<NodeId>> order_candidates(const Node& n,
                                                  const std::vector<std::string>& shape) {
  if (!is_commutative(n.op) || n.operands.size() < 2) return {n.operands};
  std::vector<NodeId> base = n.operands;
  std::stable_sort(base.begin(), base.end(),
                   [&](NodeId a, NodeId b) { return shape[a] < shape[b]; });
  std::vector<std::vector<NodeId>> out{base};
  for (std::size_t lo = 0; lo < base.size();) {
    std::size_t hi = lo + 1;
    while (hi < base.size() && shape[base[hi]] == shape[base[lo]]) ++hi;
    if (hi - lo > 1) {
      std::vector<std::vector<NodeId>> grown;
      std::vector<std::size_t> idx;
      for (std::size_t i = lo; i < hi; ++i) idx.push_back(i);
      do {
        for (const std::vector<NodeId>& prefix : out) {
          std::vector<NodeId> next = prefix;
          for (std::size_t i = 0; i < idx.size(); ++i) next[lo + i] = base[idx[i]];
          grown.push_back(std::move(next));
        }
      } while (std::next_permutation(idx.begin(), idx.end()));
      out = std::move(grown);
    }
    lo = hi;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct LeafInfo {
  NodeId id;
  std::string shape;
  std::size_t depth;
  std::size_t first_idx;
};

class Canonicalizer {
 public:
  Canonicalizer(const FormulaDag& dag, NodeId root)
      : dag_(dag), root_(root), shape_(compute_shapes(dag)) {
    for (NodeId id = 0; id < dag.nodes.size(); ++id)
      candidates_.push_back(order_candidates(dag.nodes[id], shape_));
  }

  void run() {
    std::vector<std::size_t> pick(dag_.nodes.size(), 0);
    while (true) {
      try_display(pick);
      std::size_t i = 0;
      for (; i < pick.size(); ++i) {
        if (pick[i] + 1 < candidates_[i].size()) {
          ++pick[i];
          break;
        }
        pick[i] = 0;
      }
      if (i == pick.size()) break;
    }
  }

  const std::string& sig() const { return best_.empty() ? fallback_ : best_; }
  const std::map<NodeId, std::string>& leaf_names() const {
    return best_.empty() ? fallback_names_ : best_names_;
  }
  const std::vector<std::vector<NodeId>>& orders() const {
    return best_.empty() ? fallback_orders_ : best_orders_;
  }

 private:
  void try_display(const std::vector<std::size_t>& pick) {
    std::vector<std::vector<NodeId>> order;
    for (NodeId id = 0; id < dag_.nodes.size(); ++id)
      order.push_back(candidates_[id][pick[id]]);

    // First-occurrence scan of source leaves over the displayed tree expansion.
    std::vector<LeafInfo> leaves;
    std::set<NodeId> seen;
    scan(root_, 0, order, seen, leaves);
    std::stable_sort(leaves.begin(), leaves.end(), [](const LeafInfo& a, const LeafInfo& b) {
      if (a.depth != b.depth) return a.depth < b.depth;
      if (a.shape != b.shape) return a.shape > b.shape;
      return a.first_idx < b.first_idx;
    });
    std::map<NodeId, std::string> names;
    for (std::size_t k = 0; k < leaves.size(); ++k)
      names[leaves[k].id] = "N_" + std::to_string(k + 1);

    // A display is admissible when every commutative node's operands come out
    // in nondecreasing rendered order; the canonical form is the largest
    // admissible rendering. Shared leaves make tied branches render
    // differently, and this choice pins one of them down.
    std::map<NodeId, std::string> memo;
    bool ordered = true;
    std::string s = render(root_, order, names, memo, &ordered);
    if (ordered && (best_.empty() || s > best_)) {
      best_ = s;
      best_names_ = names;
      best_orders_ = order;
    }
    if (fallback_.empty() || s > fallback_) {
      fallback_ = std::move(s);
      fallback_names_ = std::move(names);
      fallback_orders_ = std::move(order);
    }
  }

  void scan(NodeId id, std::size_t depth, const std::vector<std::vector<NodeId>>& order,
            std::set<NodeId>& seen, std::vector<LeafInfo>& leaves) {
    if (!seen.insert(id).second) return;
    const Node& n = dag_.nodes[id];
    if (is_source_leaf(n.op)) {
      leaves.push_back({id, shape_[id], depth, leaves.size()});
      return;
    }
    for (NodeId c : order[id]) scan(c, depth + 1, order, seen, leaves);
  }

  std::string render(NodeId id, const std::vector<std::vector<NodeId>>& order,
                     const std::map<NodeId, std::string>& names,
                     std::map<NodeId, std::string>& memo, bool* ordered) {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const Node& n = dag_.nodes[id];
    std::string s;
    if (n.op == OpKind::Const) {
      s = leaf_token(n);
    } else if (is_source_leaf(n.op)) {
      s = "(S:" + names.at(id) + ":" + std::string(sort_token(n.sort)) + ")";
    } else {
      std::vector<std::string> kids;
      for (NodeId c : order[id]) kids.push_back(render(c, order, names, memo, ordered));
      if (is_commutative(n.op) && !std::is_sorted(kids.begin(), kids.end()))
        *ordered = false;
      s = "(" + std::string(op_token(n.op)) + "|";
      for (const std::string& k : kids) s += k + "|";
      s += ")";
    }
    memo.emplace(id, s);
    return s;
  }

  const FormulaDag& dag_;
  NodeId root_;
  std::vector<std::string> shape_;
  std::vector<std::vector<std::vector<NodeId>>> candidates_;
  std::string best_, fallback_;
  std::map<NodeId, std::string> best_names_, fallback_names_;
  std::vector<std::vector<NodeId>> best_orders_, fallback_orders_;
};

void emit_canonical(const FormulaDag& dag, NodeId id, const Canonicalizer& canon,
                    std::vector<Node>& out, std::map<NodeId, NodeId>& remap) {
  if (remap.count(id)) return;
  const Node& n = dag.nodes[id];
  Node copy;
  copy.sort = n.sort;
  if (n.op == OpKind::Const) {
    copy.op = OpKind::Const;
    copy.value = n.value;
  } else if (is_source_leaf(n.op)) {
    copy.op = OpKind::Source;
    copy.name = canon.leaf_names().at(id);
  } else {
    copy.op = n.op;
    for (NodeId c : canon.orders()[id]) emit_canonical(dag, c, canon, out, remap);
    for (NodeId c : canon.orders()[id]) copy.operands.push_back(remap.at(c));
  }
  remap[id] = static_cast<NodeId>(out.size());
  out.push_back(std::move(copy));
}

}  // namespace

std::size_t Pattern::size() const {
  std::size_t ops = 0;
  for (const Node& n : dag.nodes)
    if (!is_leaf(n.op)) ++ops;
  return ops;
}

Pattern canonicalize(const FormulaDag& single_root,
                     std::map<std::string, std::string>* rename) {
  if (single_root.roots.size() != 1)
    throw ValidationError("pattern must have exactly one root");
  NodeId root = single_root.roots[0];

  std::set<std::string> leaf_names_seen;
  for (const Node& n : single_root.nodes)
    if (is_source_leaf(n.op) && !leaf_names_seen.insert(n.name).second)
      throw ValidationError("pattern leaves must be distinct nodes; share the node instead of the name '" +
                            n.name + "'");

  Canonicalizer canon(single_root, root);
  canon.run();

  std::vector<Node> nodes;
  std::map<NodeId, NodeId> remap;
  emit_canonical(single_root, root, canon, nodes, remap);

  Pattern p;
  p.dag.nodes = std::move(nodes);
  p.dag.roots = {remap.at(root)};
  validate(p.dag);
  p.sig = canon.sig();

  if (rename) {
    rename->clear();
    for (const auto& [id, nk] : canon.leaf_names())
      (*rename)[single_root.nodes[id].name] = nk;
  }
  return p;
}

Pattern extract_pattern(const FormulaDag& host, const std::vector<NodeId>& members,
                        NodeId root, std::map<std::string, NodeId>* leaf_hosts) {
  std::set<NodeId> mem(members.begin(), members.end());
  if (!mem.count(root)) throw ValidationError("pattern root must be a member node");
  for (NodeId m : mem) {
    if (m >= host.nodes.size()) throw ValidationError("pattern member out of range");
    if (is_leaf(host.nodes[m].op))
      throw ValidationError("pattern members must be operation nodes");
  }

  // Members plus the cut operands; ascending host id is already topological.
  std::set<NodeId> frag = mem;
  for (NodeId m : mem)
    for (NodeId c : host.nodes[m].operands) frag.insert(c);

  std::map<NodeId, NodeId> to_frag;
  std::vector<Node> nodes;
  for (NodeId h : frag) {
    const Node& src = host.nodes[h];
    Node n;
    n.sort = src.sort;
    if (!mem.count(h)) {
      if (src.op == OpKind::Const) {
        n.op = OpKind::Const;
        n.value = src.value;
      } else {
        n.op = OpKind::Source;
        n.name = "h" + std::to_string(h);
      }
    } else {
      n.op = src.op;
      for (NodeId c : src.operands) n.operands.push_back(to_frag.at(c));
    }
    to_frag[h] = static_cast<NodeId>(nodes.size());
    nodes.push_back(std::move(n));
  }

  FormulaDag fragment;
  fragment.nodes = std::move(nodes);
  fragment.roots = {to_frag.at(root)};
  validate(fragment);

  // Growth attaches every member under the root, so all must be reachable.
  std::vector<char> reach(fragment.nodes.size(), 0);
  std::vector<NodeId> stack{fragment.roots[0]};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (reach[id]) continue;
    reach[id] = 1;
    for (NodeId c : fragment.nodes[id].operands) stack.push_back(c);
  }
  for (NodeId m : mem)
    if (!reach[to_frag.at(m)])
      throw ValidationError("pattern member not reachable from root");

  std::map<std::string, std::string> rename;
  Pattern p = canonicalize(fragment, &rename);
  if (leaf_hosts) {
    leaf_hosts->clear();
    for (NodeId h : frag) {
      if (mem.count(h) || host.nodes[h].op == OpKind::Const) continue;
      (*leaf_hosts)[rename.at("h" + std::to_string(h))] = h;
    }
  }
  return p;
}

std::string annotated_signature(const Pattern& p, const StaticConfig& cfg) {
  std::string out;
  out.reserve(p.sig.size() * 2);
  std::size_t i = 0;
  while (i < p.sig.size()) {
    if (p.sig.compare(i, 3, "(S:") != 0) {
      out += p.sig[i++];
      continue;
    }
    std::size_t close = p.sig.find(')', i);
    std::size_t name_end = p.sig.find(':', i + 3);
    std::string name = p.sig.substr(i + 3, name_end - (i + 3));
    out += p.sig.substr(i, close - i) + ":";
    auto it = cfg.find(name);
    out += it == cfg.end() ? "T" : fact_to_string(it->second);
    out += ")";
    i = close + 1;
  }
  return out;
}

namespace {

class SigParser {
 public:
  SigParser(const std::string& s) : s_(s) {}

  NodeId parse() {
    NodeId root = parse_token();
    if (pos_ != s_.size()) throw FormatError("signature: trailing characters");
    return root;
  }

  std::vector<Node> take_nodes() { return std::move(nodes_); }
  const std::map<std::string, std::string>& facts() const { return facts_; }

 private:
  NodeId parse_token() {
    expect('(');
    std::string head;
    while (pos_ < s_.size() && s_[pos_] != ':' && s_[pos_] != '|') head += s_[pos_++];
    if (pos_ >= s_.size()) throw FormatError("signature: truncated token");
    if (s_[pos_] == ':') {
      ++pos_;
      return head == "S"       ? parse_source()
             : head == "CONST" ? parse_const()
                               : throw FormatError("signature: unknown leaf '" + head + "'");
    }
    ++pos_;
    auto op = op_from_token(head);
    if (!op || is_leaf(*op)) throw FormatError("signature: unknown operation '" + head + "'");
    std::vector<NodeId> kids;
    while (pos_ < s_.size() && s_[pos_] != ')') {
      kids.push_back(parse_token());
      expect('|');
    }
    expect(')');
    Node n;
    n.op = *op;
    n.operands = std::move(kids);
    if (n.operands.empty()) throw FormatError("signature: operation with no operands");
    n.sort = result_sort_of(n);
    return push(std::move(n));
  }

  NodeId parse_source() {
    std::string name = until(':');
    std::string sort_text, fact;
    std::size_t depth = 0;
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (c == ')' && depth == 0) break;
      if (c == '(') ++depth;
      if (c == ')') --depth;
      sort_text += c;
      ++pos_;
    }
    expect(')');
    std::size_t cut = sort_text.find(':');
    if (cut != std::string::npos) {
      fact = sort_text.substr(cut + 1);
      sort_text = sort_text.substr(0, cut);
    }
    auto sort = sort_from_token(sort_text);
    if (!sort) throw FormatError("signature: bad sort '" + sort_text + "'");
    if (!fact.empty()) facts_[name] = fact;

    auto it = leaf_ids_.find(name);
    if (it != leaf_ids_.end()) {
      if (nodes_[it->second].sort != *sort)
        throw FormatError("signature: leaf '" + name + "' used at two sorts");
      return it->second;
    }
    Node n;
    n.op = OpKind::Source;
    n.sort = *sort;
    n.name = name;
    NodeId id = push(std::move(n));
    leaf_ids_[name] = id;
    return id;
  }

  NodeId parse_const() {
    std::string value = until(':');
    std::string sort_text = until(')');
    auto sort = sort_from_token(sort_text);
    if (!sort) throw FormatError("signature: bad sort '" + sort_text + "'");
    Node n;
    n.op = OpKind::Const;
    n.sort = *sort;
    try {
      n.value = std::stoll(value);
    } catch (const std::exception&) {
      throw FormatError("signature: bad constant '" + value + "'");
    }
    return push(std::move(n));
  }

  Sort result_sort_of(const Node& n) {
    const Node& a = nodes_[n.operands[0]];
    switch (n.op) {
      case OpKind::Not:
      case OpKind::And:
      case OpKind::Or:
      case OpKind::Xor:
      case OpKind::Eq:
      case OpKind::Lt:
      case OpKind::Assert:
        return Sort::Bool;
      case OpKind::Plus:
      case OpKind::Times:
      case OpKind::Div:
      case OpKind::Mod:
      case OpKind::Neg:
        return Sort::Int;
      case OpKind::ArrAcc:
        return nodes_[n.operands.back()].sort;
      case OpKind::ArrRead:
        return elem_sort(nodes_[n.operands.back()].sort);
      case OpKind::ArrWrite:
      case OpKind::ArrCreate:
        return is_array(a.sort) ? a.sort : array_sort(a.sort);
      default:
        return a.sort;
    }
  }

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::string until(char stop) {
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != stop) out += s_[pos_++];
    expect(stop);
    return out;
  }

  void expect(char c) {
    if (pos_ >= s_.size() || s_[pos_] != c)
      throw FormatError("signature: expected '" + std::string(1, c) + "' at offset " +
                        std::to_string(pos_));
    ++pos_;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;
  std::map<std::string, NodeId> leaf_ids_;
  std::map<std::string, std::string> facts_;
};

}  // namespace

Pattern parse_signature(const std::string& sig) {
  SigParser parser(sig);
  NodeId root = parser.parse();
  FormulaDag dag;
  dag.nodes = parser.take_nodes();
  dag.roots = {root};
  validate(dag);
  return canonicalize(dag);
}

std::pair<Pattern, StaticConfig> parse_annotated_signature(const std::string& s) {
  SigParser parser(s);
  NodeId root = parser.parse();
  FormulaDag dag;
  dag.nodes = parser.take_nodes();
  dag.roots = {root};
  validate(dag);

  std::map<std::string, std::string> rename;
  Pattern p = canonicalize(dag, &rename);
  StaticConfig cfg;
  for (const auto& [name, fact] : parser.facts()) cfg[rename.at(name)] = fact_from_string(fact);
  return {std::move(p), std::move(cfg)};
}

}  // namespace simpforge
