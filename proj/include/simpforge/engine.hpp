#pragma once

#include "simpforge/matcher.hpp"

namespace simpforge {

struct SimplifyLimits {
  int max_passes = 5;
  std::size_t max_rewrites = 0;  // 0: ten times the input's size_metric
};

struct RewriteStep {
  std::size_t rule = 0;  // index into the matcher's rule table
  NodeId node = kNoNode;  // subject node at the moment of application
  int pass = 0;
};

struct SimplifyTrace {
  std::vector<RewriteStep> steps;
  int passes = 0;         // sweeps executed, the final no-change sweep included
  bool limit_hit = false; // stopped by a cap instead of reaching a fixpoint
  // Output node carrying each input root's value, aligned with the input's
  // root list. Roots that collapse to one node share an entry.
  std::vector<NodeId> root_map;
};

// Operation nodes only; sources, controls, and constants are free.
std::size_t size_metric(const FormulaDag& dag);

// Runs passes of {constant-fold + hash-cons; analyze; topological sweep
// applying at each node the first rule in the matcher's order whose guard
// discharges, splicing the bound RHS with immediate consing} until a pass
// changes nothing or a limit trips. Roots are preserved through splices, and
// the result is always folded and consed, so an empty matcher yields the
// constant-fold/hash-cons fixpoint.
FormulaDag simplify(const FormulaDag& dag, const Matcher& m,
                    const SimplifyLimits& limits = {},
                    SimplifyTrace* trace = nullptr, const EvalOptions& eval_opts = {},
                    const AnalysisOptions& analysis_opts = {});

}  // namespace simpforge
