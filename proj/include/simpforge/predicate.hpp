#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "simpforge/errors.hpp"

namespace simpforge {

enum class Rel : std::uint8_t { Eq, Ne, Lt, Le };

const char* rel_token(Rel r);

// One comparison over named scalar variables; the right side is either a
// variable or an integer literal.
struct Atom {
  std::string lhs;
  Rel rel = Rel::Eq;
  bool rhs_is_const = false;
  std::string rhs_var;
  std::int64_t rhs_const = 0;

  auto operator<=>(const Atom&) const = default;
};

Atom make_atom(std::string lhs, Rel rel, std::string rhs_var);
Atom make_atom(std::string lhs, Rel rel, std::int64_t rhs_const);

// Conjunction of atoms; an empty conjunction is TRUE.
struct Predicate {
  std::vector<Atom> atoms;

  static Predicate truth() { return {}; }
  bool is_true() const { return atoms.empty(); }

  auto operator<=>(const Predicate&) const = default;
};

Predicate make_predicate(std::vector<Atom> atoms);

// Flips symmetric variable-variable atoms (x=y vs y=x) to put the smaller
// name on the left, then sorts and deduplicates, so predicates equal up to
// symmetry compare equal.
Predicate canonical(Predicate p);

// Sorted unique variable names mentioned anywhere in the predicate.
std::vector<std::string> predicate_variables(const Predicate& p);

bool eval_atom(const Atom& a, const std::map<std::string, std::int64_t>& valuation);
bool eval_predicate(const Predicate& p, const std::map<std::string, std::int64_t>& valuation);

// "TRUE" or atoms joined with " && ", e.g. "c = d && b < 3".
std::string to_string(const Atom& a);
std::string to_string(const Predicate& p);
Predicate parse_predicate(const std::string& text);

}  // namespace simpforge
