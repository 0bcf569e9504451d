#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "simpforge/dag.hpp"
#include "simpforge/predicate.hpp"

namespace simpforge {

// Dataflow fact for one node: a small exact value set, an interval, or Top.
// Lists stay sorted and duplicate-free; ranges keep lo < hi (a singleton
// range collapses to a one-element list so each set has one spelling).
struct AbstractValue {
  enum class Kind : std::uint8_t { List, Range, Top };

  Kind kind = Kind::Top;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::vector<std::int64_t> values;

  static AbstractValue top();
  static AbstractValue range(std::int64_t lo, std::int64_t hi);
  static AbstractValue list(std::vector<std::int64_t> vs);
  static AbstractValue constant(std::int64_t v) { return list({v}); }

  bool is_top() const { return kind == Kind::Top; }
  bool is_range() const { return kind == Kind::Range; }
  bool is_list() const { return kind == Kind::List; }

  bool bounded() const { return kind != Kind::Top; }
  std::int64_t min() const;  // bounded only
  std::int64_t max() const;  // bounded only
  bool definite() const { return is_list() && values.size() == 1; }
  bool contains(std::int64_t v) const;

  auto operator<=>(const AbstractValue&) const = default;
};

struct AnalysisOptions {
  std::size_t list_cap = 32;       // larger lists widen to a range
  std::size_t enum_budget = 4096;  // max input tuples enumerated exactly
  int int_bits = 0;                // evaluation width; escaping results widen
  int array_len = 4;
};

// Output facts respect the result sort: boolean facts stay within {0,1}
// (spelled Range(0,1) when both values remain possible), integer facts are
// clamped to the evaluation width, oversized lists widen.
AbstractValue transfer(OpKind op, const std::vector<AbstractValue>& inputs,
                       Sort result_sort, const AnalysisOptions& opts = {});

// One topological pass; facts indexed by node id. Sources and controls not
// named in seed_facts default to Range(0,1) for BOOL and Top otherwise.
std::vector<AbstractValue> analyze(
    const FormulaDag& dag,
    const std::map<std::string, AbstractValue>& seed_facts = {},
    const AnalysisOptions& opts = {});

enum class Tri : std::uint8_t { True, False, Unknown };

// Does every valuation drawn from the facts satisfy the predicate? Exact
// (joint enumeration) whenever the referenced facts are small value lists;
// interval reasoning per atom otherwise.
Tri implies(const std::map<std::string, AbstractValue>& facts, const Predicate& pred,
            const AnalysisOptions& opts = {});

// Annotation spellings: "R(lo-hi)", "L(|v1|v2|...|)", "T".
std::string fact_to_string(const AbstractValue& v);
AbstractValue fact_from_string(std::string_view s);  // throws FormatError

}  // namespace simpforge
