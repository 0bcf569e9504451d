#pragma once

#include <simpforge/analysis.hpp>
#include <simpforge/dag.hpp>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace simpforge {

// A small single-root DAG in canonical form: source leaves renamed N_1..N_k,
// commutative operands in canonical display order, and `sig` the string that
// identifies the pattern up to commutative operand reordering.
struct Pattern {
  FormulaDag dag;
  std::string sig;

  std::size_t size() const;  // operation (non-leaf) node count
  bool operator==(const Pattern& other) const { return dag == other.dag; }
  bool operator<(const Pattern& other) const { return sig < other.sig; }
};

// Canonicalizes any single-root DAG whose leaves are sources or constants.
// `rename`, when given, receives original leaf name -> canonical N_k.
Pattern canonicalize(const FormulaDag& single_root,
                     std::map<std::string, std::string>* rename = nullptr);

// Cuts the fragment induced by `members` (operation nodes of `host`) rooted at
// `root`; operands outside the set become leaves, shared ones staying shared.
// `leaf_hosts`, when given, receives canonical leaf name -> host node id.
Pattern extract_pattern(const FormulaDag& host, const std::vector<NodeId>& members,
                        NodeId root, std::map<std::string, NodeId>* leaf_hosts = nullptr);

// Analysis facts projected onto a pattern's source leaves, keyed by leaf name.
using StaticConfig = std::map<std::string, AbstractValue>;

// The pattern's signature with each source-leaf token extended by its fact,
// e.g. (S:N_1:INT:L(|-1|0|1|)); leaves without an entry read as unconstrained.
std::string annotated_signature(const Pattern& p, const StaticConfig& cfg);

Pattern parse_signature(const std::string& sig);
std::pair<Pattern, StaticConfig> parse_annotated_signature(const std::string& s);

}  // namespace simpforge
