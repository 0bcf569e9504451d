#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "simpforge/analysis.hpp"
#include "simpforge/rules.hpp"

namespace simpforge {

struct Match {
  std::size_t rule = 0;                   // index into Matcher::rules()
  std::map<std::string, NodeId> binding;  // lhs leaf name -> subject node
};

// Rule sets compiled into one discrimination net per root operation, so all
// rules probe a subject node through a single shared traversal. Rules with a
// common LHS prefix share the test path; commutative LHS nodes are expanded
// into their operand orderings at compile time so every arrangement of a
// hash-consed subject is reachable.
class Matcher {
 public:
  // `order` lists the active rules by index, most preferred first; it may
  // select a subset. Empty means all rules in the given order. Indices out of
  // range or repeated throw ValidationError.
  static Matcher compile(std::vector<RewriteRule> rules, std::vector<std::size_t> order = {});

  const std::vector<RewriteRule>& rules() const { return rules_; }
  const std::vector<std::size_t>& order() const { return order_; }

  // Active rules whose LHS structurally matches the subject at `node` and
  // whose guard discharges definitely-true, each with its leaf binding, in
  // `order` position. Equality atoms discharge by node identity (the subject
  // must be hash-consed) or by the analysis facts; other atoms by the facts.
  // At most one entry per rule: the first binding that discharges wins.
  std::vector<Match> match_at(const FormulaDag& dag, NodeId node,
                              const std::vector<AbstractValue>& facts) const;

  // Structural tests in the nets; leaf entries excluded. Rules sharing an LHS
  // add no tests beyond the first rule's path.
  std::size_t test_count() const;

 private:
  friend void serialize_matcher(std::ostream& out, const Matcher& m);
  friend Matcher deserialize_matcher(std::istream& in);

  struct Instr {
    enum class Kind : std::uint8_t { Op, Const, Bind, Same };
    Kind kind = Kind::Bind;
    std::uint32_t slot = 0;
    OpKind op = OpKind::Const;        // Op
    Sort sort = Sort::Bool;           // Op, Const, Bind
    std::uint32_t arity = 0;          // Op
    std::uint32_t child_base = 0;     // Op: operands land in slots [base, base+arity)
    std::int64_t value = 0;           // Const
    std::uint32_t other = 0;          // Same: must equal this earlier slot
    auto operator<=>(const Instr&) const = default;
  };

  struct Leaf {
    std::size_t rule = 0;
    std::vector<std::string> names;  // binding names in Bind-instruction order
  };

  struct NetNode {
    Instr instr;
    std::vector<std::size_t> children;  // indices into the net's node pool
    std::vector<Leaf> leaves;
  };

  struct Net {
    std::vector<NetNode> nodes;
    std::vector<std::size_t> top;  // root-level alternatives
    std::uint32_t slot_count = 1;
  };

  static void insert_sequence(Net& net, const std::vector<Instr>& seq, Leaf leaf);
  void match_net(const Net& net, const FormulaDag& dag, NodeId node,
                 const std::vector<AbstractValue>& facts, std::vector<Match>& out) const;

  std::vector<RewriteRule> rules_;
  std::vector<std::size_t> order_;
  std::map<OpKind, Net> nets_;
};

// Binary matcher image: magic "SFM1", format version, the rule table in the
// aux text format, the active order, and the compiled nets. Truncated or
// mismatched input throws FormatError and never yields a partial matcher.
void serialize_matcher(std::ostream& out, const Matcher& m);
Matcher deserialize_matcher(std::istream& in);

void write_matcher(const std::filesystem::path& path, const Matcher& m);
Matcher read_matcher(const std::filesystem::path& path);

}  // namespace simpforge
