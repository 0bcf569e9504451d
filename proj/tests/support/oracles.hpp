#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <simpforge/analysis.hpp>
#include <simpforge/dag.hpp>
#include <simpforge/predicate.hpp>

// Reference implementations the tests trust instead of the library: each one
// recomputes its answer from first principles through a different mechanism
// than the production code, so agreement is evidence and not circularity.
namespace sft {

// Plain memoized recursive interpreter.
simpforge::Value ref_eval(const simpforge::FormulaDag& dag, simpforge::NodeId id,
                          const simpforge::Environment& env,
                          const simpforge::EvalOptions& opts = {});

// Visits every environment assigning each named leaf a value from the signed
// `width`-bit domain (bools from {0,1}); array leaves enumerate all element
// tuples, so keep widths tiny when arrays are present.
void for_each_env(const simpforge::FormulaDag& dag, int width,
                  const std::function<void(const simpforge::Environment&)>& fn,
                  int array_len = 4);

// Ground truth for implies(): enumerate the facts' concretizations outright.
// Throws if any referenced fact is not finitely enumerable.
simpforge::Tri brute_implies(const std::map<std::string, simpforge::AbstractValue>& facts,
                             const simpforge::Predicate& pred);

// Complete isomorphism invariant for single-root patterns: unfolds sharing
// into a tree, then takes the minimum rendering over every leaf-name
// permutation with commutative children sorted per rendering. Exponential in
// leaf count, so only for small fixtures.
std::string ref_pattern_key(const simpforge::FormulaDag& single_root);

// Nearest-rank percentile, p in [0, 100].
double ref_percentile(std::vector<double> xs, double p);

// Upper-tail p-value of the chi-square distribution with `dof` degrees of
// freedom, via the regularized incomplete gamma function.
double chi_square_p_value(double stat, int dof);

}  // namespace sft
