#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "simpforge/analysis.hpp"
#include "simpforge/pattern.hpp"
#include "simpforge/rng.hpp"
#include "simpforge/rules.hpp"

namespace simpforge {

struct SynthConfig {
  std::size_t k_max = 2;         // replacement operation budget
  int oracle_width = 4;          // bit width of the bounded verifier
  std::vector<std::int64_t> const_pool{-1, 0, 1};  // extended by lhs constants
  std::size_t max_predicates = 5000;
  std::size_t candidate_budget = 100000;  // replacements enumerated per guard
  std::uint64_t exhaustive_cap = 1u << 16;  // env ceiling for full sweeps
  std::size_t random_checks = 2048;       // verification sample past the cap
  std::size_t recheck_envs = 1000;        // wider-width confirmation sample
  int recheck_extra_bits = 2;
  int array_len = 4;
  std::size_t workers = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 0;
};

// Every conjunction of at most two atoms over the lhs leaves and the constant
// pool, kept when at least one recorded config forces it; TRUE is always
// included. Returned canonical, deduplicated, and sorted.
std::vector<Predicate> enumerate_predicates(const Pattern& lhs,
                                            const std::vector<StaticConfig>& configs,
                                            const SynthConfig& cfg,
                                            bool* truncated = nullptr);

// Strength order over guards: an edge i -> j records that preds[i] holds only
// where preds[j] does (checked exhaustively over the bounded domain).
// Logically equivalent guards collapse into their shortest spelling.
struct ImplicationGraph {
  std::vector<Predicate> preds;
  std::vector<std::set<std::size_t>> weaker;  // i -> every j implied by i
};

ImplicationGraph build_implication_graph(const std::vector<Predicate>& preds,
                                         const SynthConfig& cfg,
                                         const std::map<std::string, Sort>& var_sorts);

struct VerifyStats {
  bool exhaustive = true;
  std::uint64_t checked = 0;  // guard-satisfying environments compared
};

// True iff lhs and rhs agree on every width-bounded environment satisfying
// the guard. Falls back to guard-directed sampling (equality atoms collapsed
// before drawing, the rest by rejection) when the space exceeds the cap.
bool verify_rule(const RewriteRule& rule, int width, const SynthConfig& cfg = {},
                 VerifyStats* stats = nullptr);

// The sampling arm alone, for wider-width spot checks; fails when it cannot
// place `envs` guard-satisfying environments.
bool verify_rule_sampled(const RewriteRule& rule, int width, std::size_t envs, Rng& rng,
                         const SynthConfig& cfg = {}, std::uint64_t* checked = nullptr);

struct SynthOutcome {
  std::optional<FormulaDag> rhs;  // smallest verified replacement
  bool truncated = false;         // candidate budget ran out first
  bool exhaustive = true;         // verification mode of the winner
  std::uint64_t checked = 0;
  std::uint64_t candidates = 0;   // replacements examined
};

// Enumerates replacements in nondecreasing size -- size 0 means a bare leaf
// or constant -- restricted to operation kinds present in the lhs, with the
// final operation forced to the lhs root sort. The first candidate passing
// both the width-W sweep and the wider confirmation sample wins, so the
// result is size-minimal; candidates of equal size are tried in signature
// order.
SynthOutcome synth_rhs(const Pattern& lhs, const Predicate& pred, const SynthConfig& cfg);

struct SynthStats {
  std::uint64_t synth_calls = 0;  // guards actually sent to synth_rhs
  std::uint64_t candidates = 0;
  std::uint64_t pruned = 0;  // guards eliminated without a synthesis run
  bool truncated = false;
};

// The refinement loop: pop a strongest remaining guard, synthesize, and on
// proven absence drop every weaker guard (they admit strictly more
// environments, so they cannot succeed either). Keeps, per distinct
// replacement, only the most permissive guards.
std::vector<RewriteRule> refine_rules(const Pattern& lhs, const std::vector<Predicate>& preds,
                                      const SynthConfig& cfg, SynthStats* stats = nullptr);

std::vector<RewriteRule> synthesize_rules(const Pattern& lhs,
                                          const std::vector<StaticConfig>& configs,
                                          const SynthConfig& cfg, SynthStats* stats = nullptr);

}  // namespace simpforge
