#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "simpforge/dag.hpp"
#include "simpforge/pattern.hpp"
#include "simpforge/predicate.hpp"

namespace simpforge {

// A guarded left-to-right rewrite: wherever lhs matches and the guard is
// discharged, the matched node may be replaced by rhs over the same leaves.
// rhs leaves reference lhs leaves by name, so the lhs DAG is kept exactly as
// supplied; sig is the lhs's canonical signature and serves as a dedup key.
struct RewriteRule {
  Pattern lhs;
  Predicate pred;
  FormulaDag rhs;
  int verified_bound = 0;
  bool exhaustive = true;     // full enumeration vs stratified sampling
  std::uint64_t checked = 0;  // environments the verifier examined
};

// Operation nodes only; constants and leaf references are free.
std::size_t op_count(const FormulaDag& dag);

// Single roots, matching root sorts, rhs variables drawn from the lhs
// leaves, and strictly fewer rhs operations. Throws ValidationError.
void validate_rule(const RewriteRule& rule);

// Guard as a single-root DAG declaring every lhs leaf first (dangling leaves
// allowed). TRUE becomes CONST BIT 1, != and <= go through NOT, conjunctions
// chain through AND.
FormulaDag predicate_to_dag(const Predicate& pred, const FormulaDag& lhs);
Predicate predicate_from_dag(const FormulaDag& dag);

// The aux-format payload of one rule: d (LHS), f (RHS), p (guard) in the DAG
// text format, plus the meta JSON document. Used both for per-rule
// directories and for rule tables embedded in binary files.
struct RuleText {
  std::string d;
  std::string f;
  std::string p;
  std::string meta;  // empty = no verification claim recorded
};

RuleText rule_to_text(const RewriteRule& rule);
RewriteRule rule_from_text(const RuleText& text);

// Per-rule directory with d.aux (LHS), f.aux (RHS), p.aux (guard) in the DAG
// text format -- f.aux and p.aux repeat every lhs leaf so variable bindings
// survive even when unused -- plus meta.json with the verifier fields.
void write_rule(const std::filesystem::path& dir, const RewriteRule& rule);
RewriteRule read_rule(const std::filesystem::path& dir);

// Numbered subdirectories 0..n-1, one rule each.
void write_rules(const std::filesystem::path& root, const std::vector<RewriteRule>& rules);
std::vector<RewriteRule> read_rules(const std::filesystem::path& root);

}  // namespace simpforge
