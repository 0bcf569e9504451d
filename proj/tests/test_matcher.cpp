#include "simpforge/matcher.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "simpforge/pattern.hpp"
#include "support/generators.hpp"
#include "support/reference_matcher.hpp"

namespace simpforge {
namespace {

namespace fs = std::filesystem;

Pattern as_given(const std::string& text) {
  FormulaDag dag = parse_dag(text);
  Pattern p;
  p.sig = canonicalize(dag).sig;
  p.dag = std::move(dag);
  return p;
}

RewriteRule make_rule(const std::string& lhs_text, Predicate pred,
                      const std::string& rhs_text) {
  RewriteRule rule;
  rule.lhs = as_given(lhs_text);
  rule.pred = std::move(pred);
  rule.rhs = parse_dag(rhs_text);
  return rule;
}

// ARRACC(t, c, d) -> c when the two choices agree
RewriteRule mux_rule() {
  return make_rule(
      "0 = S INT t\n"
      "1 = S INT c\n"
      "2 = S INT d\n"
      "3 = ARRACC INT 0 1 2\n"
      "3\n",
      make_predicate({make_atom("c", Rel::Eq, "d")}), "0 = S INT c\n0\n");
}

// ARRACC(t, c, d) -> c when the selector pins the first choice
RewriteRule mux_zero_rule() {
  return make_rule(
      "0 = S INT t\n"
      "1 = S INT c\n"
      "2 = S INT d\n"
      "3 = ARRACC INT 0 1 2\n"
      "3\n",
      make_predicate({make_atom("t", Rel::Eq, 0)}), "0 = S INT c\n0\n");
}

// OR(LT(a, b), LT(a, d)) -> LT(a, d) when b <= d
RewriteRule or_lt_rule() {
  return make_rule(
      "0 = S INT a\n"
      "1 = S INT b\n"
      "2 = S INT d\n"
      "3 = LT BOOL 0 1\n"
      "4 = LT BOOL 0 2\n"
      "5 = OR BOOL 3 4\n"
      "5\n",
      make_predicate({make_atom("b", Rel::Le, "d")}),
      "0 = S INT a\n"
      "1 = S INT d\n"
      "2 = LT BOOL 0 1\n"
      "2\n");
}

// AND(OR(x, y), x) -> x
RewriteRule absorb_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = S BOOL y\n"
      "2 = OR BOOL 0 1\n"
      "3 = AND BOOL 2 0\n"
      "3\n",
      make_predicate({}), "0 = S BOOL x\n0\n");
}

// OR(AND(x, y), x) -> x
RewriteRule absorb_or_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = S BOOL y\n"
      "2 = AND BOOL 0 1\n"
      "3 = OR BOOL 2 0\n"
      "3\n",
      make_predicate({}), "0 = S BOOL x\n0\n");
}

// NOT(NOT(x)) -> x
RewriteRule double_not_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = NOT BOOL 0\n"
      "2 = NOT BOOL 1\n"
      "2\n",
      make_predicate({}), "0 = S BOOL x\n0\n");
}

// AND(x, NOT(x)) -> 0
RewriteRule contradiction_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = NOT BOOL 0\n"
      "2 = AND BOOL 0 1\n"
      "2\n",
      make_predicate({}), "0 = CONST BIT 0\n0\n");
}

// XOR(x, x) -> 0
RewriteRule self_xor_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = XOR BOOL 0 0\n"
      "1\n",
      make_predicate({}), "0 = CONST BIT 0\n0\n");
}

// PLUS(x, 0) -> x
RewriteRule plus_zero_rule() {
  return make_rule(
      "0 = S INT x\n"
      "1 = CONST INT 0\n"
      "2 = PLUS INT 0 1\n"
      "2\n",
      make_predicate({}), "0 = S INT x\n0\n");
}

// AND(NOT(x), y) -> y when y is pinned to 0
RewriteRule masked_and_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = NOT BOOL 0\n"
      "2 = S BOOL y\n"
      "3 = AND BOOL 1 2\n"
      "3\n",
      make_predicate({make_atom("y", Rel::Eq, 0)}), "0 = S BOOL y\n0\n");
}

std::vector<RewriteRule> rule_pool() {
  return {double_not_rule(), absorb_rule(),  absorb_or_rule(), contradiction_rule(),
          self_xor_rule(),   plus_zero_rule(), mux_rule(),      or_lt_rule()};
}

std::vector<std::size_t> matched_rules(const std::vector<Match>& ms) {
  std::vector<std::size_t> ids;
  for (const Match& m : ms) ids.push_back(m.rule);
  return ids;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sf_matcher_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

TEST(MatcherCompile, EmptyRuleSetMatchesNothing) {
  Matcher m = Matcher::compile({});
  EXPECT_EQ(m.test_count(), 0u);

  DagBuilder b;
  NodeId x = b.add_source(Sort::Bool, "x");
  NodeId n = b.add(OpKind::Not, Sort::Bool, {x});
  FormulaDag dag = b.freeze({n});
  EXPECT_TRUE(m.match_at(dag, n, analyze(dag)).empty());
}

TEST(MatcherCompile, OrderMustNameDistinctKnownRules) {
  EXPECT_THROW(Matcher::compile({mux_rule()}, {1}), ValidationError);
  EXPECT_THROW(Matcher::compile({mux_rule(), mux_zero_rule()}, {0, 0}), ValidationError);
}

TEST(MatcherCompile, RulesSharingAnLhsShareTheTestPath) {
  std::size_t alone = Matcher::compile({mux_rule()}).test_count();
  Matcher both = Matcher::compile({mux_rule(), mux_zero_rule()});
  EXPECT_EQ(both.test_count(), alone);

  DagBuilder b;
  NodeId t = b.add_source(Sort::Int, "t");
  NodeId c = b.add_source(Sort::Int, "c");
  NodeId acc = b.add(OpKind::ArrAcc, Sort::Int, {t, c, c});
  FormulaDag dag = b.freeze({acc});
  auto facts = analyze(dag, {{"t", AbstractValue::constant(0)}});
  EXPECT_EQ(matched_rules(both.match_at(dag, acc, facts)),
            (std::vector<std::size_t>{0, 1}));
}

TEST(MatcherCompile, NetsAreKeyedByTheRootOperation) {
  std::size_t mux_alone = Matcher::compile({mux_rule()}).test_count();
  std::size_t or_alone = Matcher::compile({or_lt_rule()}).test_count();
  Matcher m = Matcher::compile({mux_rule(), or_lt_rule()});
  EXPECT_EQ(m.test_count(), mux_alone + or_alone);

  DagBuilder b;
  NodeId p = b.add_source(Sort::Bool, "p");
  NodeId q = b.add_source(Sort::Bool, "q");
  NodeId a = b.add(OpKind::And, Sort::Bool, {p, q});
  FormulaDag dag = b.freeze({a});
  EXPECT_TRUE(m.match_at(dag, a, analyze(dag)).empty());
}

TEST(MatcherMatch, SharedChoiceDischargesBySelectorIdentity) {
  DagBuilder b;
  NodeId t = b.add_source(Sort::Int, "t");
  NodeId c = b.add_source(Sort::Int, "c");
  NodeId acc = b.add(OpKind::ArrAcc, Sort::Int, {t, c, c});
  FormulaDag dag = b.freeze({acc});

  Matcher m = Matcher::compile({mux_rule()});
  auto ms = m.match_at(dag, acc, analyze(dag));
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].rule, 0u);
  EXPECT_EQ(ms[0].binding.at("t"), t);
  EXPECT_EQ(ms[0].binding.at("c"), c);
  EXPECT_EQ(ms[0].binding.at("d"), c);
}

TEST(MatcherMatch, DistinctChoicesWithoutFactsDoNotMatch) {
  DagBuilder b;
  NodeId t = b.add_source(Sort::Int, "t");
  NodeId c = b.add_source(Sort::Int, "c");
  NodeId d = b.add_source(Sort::Int, "d");
  NodeId acc = b.add(OpKind::ArrAcc, Sort::Int, {t, c, d});
  FormulaDag dag = b.freeze({acc});

  Matcher m = Matcher::compile({mux_rule()});
  EXPECT_TRUE(m.match_at(dag, acc, analyze(dag)).empty());
}

TEST(MatcherMatch, AnalysisFactsDischargeValueGuards) {
  DagBuilder b;
  NodeId t = b.add_source(Sort::Int, "t");
  NodeId c = b.add_source(Sort::Int, "c");
  NodeId d = b.add_source(Sort::Int, "d");
  NodeId acc = b.add(OpKind::ArrAcc, Sort::Int, {t, c, d});
  FormulaDag dag = b.freeze({acc});

  Matcher m = Matcher::compile({mux_rule()});
  auto same = analyze(dag, {{"c", AbstractValue::constant(5)},
                            {"d", AbstractValue::constant(5)}});
  ASSERT_EQ(m.match_at(dag, acc, same).size(), 1u);

  auto split = analyze(dag, {{"c", AbstractValue::constant(5)},
                             {"d", AbstractValue::constant(6)}});
  EXPECT_TRUE(m.match_at(dag, acc, split).empty());
}

TEST(MatcherMatch, OrderedFactsDischargeTheComparisonGuard) {
  DagBuilder b;
  NodeId a = b.add_source(Sort::Int, "a");
  NodeId lo = b.add_source(Sort::Int, "b");
  NodeId hi = b.add_source(Sort::Int, "d");
  NodeId l1 = b.add(OpKind::Lt, Sort::Bool, {a, lo});
  NodeId l2 = b.add(OpKind::Lt, Sort::Bool, {a, hi});
  NodeId root = b.add(OpKind::Or, Sort::Bool, {l1, l2});
  FormulaDag dag = b.freeze({root});

  Matcher m = Matcher::compile({or_lt_rule()});
  auto ordered = analyze(dag, {{"b", AbstractValue::constant(1)},
                               {"d", AbstractValue::constant(3)}});
  auto ms = m.match_at(dag, root, ordered);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].binding.at("b"), lo);
  EXPECT_EQ(ms[0].binding.at("d"), hi);

  // with the bounds reversed the disjunction still matches: OR commutes, so
  // the pattern re-reads the subject with its comparisons swapped
  auto reversed = analyze(dag, {{"b", AbstractValue::constant(3)},
                                {"d", AbstractValue::constant(1)}});
  auto swapped = m.match_at(dag, root, reversed);
  ASSERT_EQ(swapped.size(), 1u);
  EXPECT_EQ(swapped[0].binding.at("b"), hi);
  EXPECT_EQ(swapped[0].binding.at("d"), lo);

  // overlapping ranges leave neither orientation definite
  auto vague = analyze(dag, {{"b", AbstractValue::range(0, 2)},
                             {"d", AbstractValue::range(1, 3)}});
  EXPECT_TRUE(m.match_at(dag, root, vague).empty());
}

TEST(MatcherMatch, CommutativeArrangementsOfTheSubjectMatch) {
  Matcher m = Matcher::compile({absorb_rule()});

  // consing orders the conjunction as AND(a, OR(a, b)): the leaf-first
  // arrangement, opposite the pattern's spelling
  DagBuilder b1;
  NodeId a1 = b1.add_source(Sort::Bool, "a");
  NodeId b1n = b1.add_source(Sort::Bool, "b");
  NodeId or1 = b1.add(OpKind::Or, Sort::Bool, {a1, b1n});
  NodeId and1 = b1.add(OpKind::And, Sort::Bool, {or1, a1});
  FormulaDag d1 = b1.freeze({and1});
  ASSERT_EQ(d1.node(and1).operands[0], a1);
  auto ms = m.match_at(d1, and1, analyze(d1));
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].binding.at("x"), a1);
  EXPECT_EQ(ms[0].binding.at("y"), b1n);

  // the disjunction's own operands arrive swapped: OR(a, b) against OR(y, x)
  DagBuilder b2;
  NodeId a2 = b2.add_source(Sort::Bool, "a");
  NodeId b2n = b2.add_source(Sort::Bool, "b");
  NodeId or2 = b2.add(OpKind::Or, Sort::Bool, {a2, b2n});
  NodeId and2 = b2.add(OpKind::And, Sort::Bool, {or2, b2n});
  FormulaDag d2 = b2.freeze({and2});
  auto ms2 = m.match_at(d2, and2, analyze(d2));
  ASSERT_EQ(ms2.size(), 1u);
  EXPECT_EQ(ms2[0].binding.at("x"), b2n);
  EXPECT_EQ(ms2[0].binding.at("y"), a2);
}

TEST(MatcherMatch, GuardsSelectAmongCommutativeBindings) {
  // AND(NOT(a), NOT(b)) embeds the pattern both ways; only the binding whose
  // y-node is pinned to zero discharges
  DagBuilder b;
  NodeId a = b.add_source(Sort::Bool, "a");
  NodeId bn = b.add_source(Sort::Bool, "b");
  NodeId na = b.add(OpKind::Not, Sort::Bool, {a});
  NodeId nb = b.add(OpKind::Not, Sort::Bool, {bn});
  NodeId root = b.add(OpKind::And, Sort::Bool, {na, nb});
  FormulaDag dag = b.freeze({root});

  Matcher m = Matcher::compile({masked_and_rule()});
  auto pin_b = analyze(dag, {{"b", AbstractValue::constant(1)}});
  auto ms = m.match_at(dag, root, pin_b);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].binding.at("x"), a);
  EXPECT_EQ(ms[0].binding.at("y"), nb);

  auto pin_a = analyze(dag, {{"a", AbstractValue::constant(1)}});
  auto ms2 = m.match_at(dag, root, pin_a);
  ASSERT_EQ(ms2.size(), 1u);
  EXPECT_EQ(ms2[0].binding.at("x"), bn);
  EXPECT_EQ(ms2[0].binding.at("y"), na);

  EXPECT_TRUE(m.match_at(dag, root, analyze(dag)).empty());
}

TEST(MatcherMatch, RepeatedPatternLeafRequiresTheSameNode) {
  Matcher m = Matcher::compile({self_xor_rule()});

  DagBuilder b;
  NodeId a = b.add_source(Sort::Bool, "a");
  NodeId c = b.add_source(Sort::Bool, "c");
  NodeId same = b.add(OpKind::Xor, Sort::Bool, {a, a});
  NodeId mixed = b.add(OpKind::Xor, Sort::Bool, {a, c});
  FormulaDag dag = b.freeze({same, mixed});
  auto facts = analyze(dag);

  auto ms = m.match_at(dag, same, facts);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].binding.at("x"), a);
  EXPECT_TRUE(m.match_at(dag, mixed, facts).empty());
}

TEST(MatcherOrder, PositionsDriveTheResultOrder) {
  DagBuilder b;
  NodeId t = b.add_source(Sort::Int, "t");
  NodeId c = b.add_source(Sort::Int, "c");
  NodeId acc = b.add(OpKind::ArrAcc, Sort::Int, {t, c, c});
  FormulaDag dag = b.freeze({acc});
  auto facts = analyze(dag, {{"t", AbstractValue::constant(0)}});

  Matcher swapped = Matcher::compile({mux_rule(), mux_zero_rule()}, {1, 0});
  EXPECT_EQ(matched_rules(swapped.match_at(dag, acc, facts)),
            (std::vector<std::size_t>{1, 0}));
}

TEST(MatcherOrder, ASubsetOrderDeactivatesTheRest) {
  DagBuilder b;
  NodeId t = b.add_source(Sort::Int, "t");
  NodeId c = b.add_source(Sort::Int, "c");
  NodeId acc = b.add(OpKind::ArrAcc, Sort::Int, {t, c, c});
  FormulaDag dag = b.freeze({acc});
  auto facts = analyze(dag, {{"t", AbstractValue::constant(0)}});

  Matcher subset = Matcher::compile({mux_rule(), mux_zero_rule()}, {1});
  EXPECT_EQ(matched_rules(subset.match_at(dag, acc, facts)),
            (std::vector<std::size_t>{1}));
}

TEST(MatcherReference, AgreesWithRuleAtATimeMatchingOnRandomSubjects) {
  std::vector<RewriteRule> pool = rule_pool();
  Rng rng(20260822);
  for (int round = 0; round < 30; ++round) {
    sft::GenOptions opts;
    opts.use_div_mod = false;
    FormulaDag dag = sft::random_dag(rng, 25, opts);

    std::vector<std::size_t> picks(pool.size());
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    for (std::size_t i = picks.size(); i > 1; --i)
      std::swap(picks[i - 1], picks[rng.below(i)]);
    picks.resize(1 + rng.below(4));

    std::vector<RewriteRule> rules;
    for (std::size_t id : picks) rules.push_back(pool[id]);

    std::map<std::string, AbstractValue> seed;
    for (int i = 0; i < 3; ++i) {
      if (rng.chance(0.5))
        seed["b" + std::to_string(i)] =
            AbstractValue::constant(static_cast<std::int64_t>(rng.below(2)));
      if (rng.chance(0.5))
        seed["i" + std::to_string(i)] =
            AbstractValue::constant(static_cast<std::int64_t>(rng.below(4)));
    }
    auto facts = analyze(dag, seed);

    Matcher m = Matcher::compile(rules);
    for (NodeId id = 0; id < dag.nodes.size(); ++id) {
      auto ms = m.match_at(dag, id, facts);
      EXPECT_EQ(matched_rules(ms), sft::reference_matches(rules, {}, dag, id, facts))
          << "round " << round << " node " << id;
      for (const Match& match : ms) {
        auto valid = sft::all_bindings(rules[match.rule], dag, id);
        EXPECT_NE(std::find(valid.begin(), valid.end(), match.binding), valid.end())
            << "round " << round << " node " << id << " rule " << match.rule;
        EXPECT_TRUE(sft::binding_discharges(rules[match.rule].pred, match.binding, facts));
      }
    }
  }
}

TEST(MatcherSerialize, RoundTripPreservesRulesAndMatches) {
  std::vector<RewriteRule> rules = {mux_rule(), or_lt_rule(), absorb_rule(),
                                    contradiction_rule()};
  Matcher m = Matcher::compile(rules, {2, 0, 3, 1});

  std::stringstream buf;
  serialize_matcher(buf, m);
  Matcher back = deserialize_matcher(buf);

  EXPECT_EQ(back.order(), m.order());
  EXPECT_EQ(back.test_count(), m.test_count());
  ASSERT_EQ(back.rules().size(), m.rules().size());
  for (std::size_t i = 0; i < m.rules().size(); ++i) {
    RuleText ours = rule_to_text(m.rules()[i]);
    RuleText theirs = rule_to_text(back.rules()[i]);
    EXPECT_EQ(ours.d, theirs.d);
    EXPECT_EQ(ours.f, theirs.f);
    EXPECT_EQ(ours.p, theirs.p);
    EXPECT_EQ(ours.meta, theirs.meta);
  }

  Rng rng(7);
  for (int round = 0; round < 50; ++round) {
    FormulaDag dag = sft::random_dag(rng, 20);
    auto facts = analyze(dag);
    for (NodeId id = 0; id < dag.nodes.size(); ++id) {
      auto a = m.match_at(dag, id, facts);
      auto b = back.match_at(dag, id, facts);
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].rule, b[k].rule);
        EXPECT_EQ(a[k].binding, b[k].binding);
      }
    }
  }
}

TEST(MatcherSerialize, EmptyMatcherRoundTrips) {
  std::stringstream buf;
  serialize_matcher(buf, Matcher::compile({}));
  Matcher back = deserialize_matcher(buf);
  EXPECT_EQ(back.test_count(), 0u);
  EXPECT_TRUE(back.rules().empty());
}

TEST(MatcherSerialize, DamagedImagesAreRejectedWhole) {
  std::stringstream buf;
  serialize_matcher(buf, Matcher::compile({mux_rule(), or_lt_rule()}));
  std::string image = buf.str();

  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{8},
                          image.size() / 2, image.size() - 1}) {
    std::stringstream in(image.substr(0, cut));
    EXPECT_THROW(deserialize_matcher(in), FormatError) << "cut " << cut;
  }

  std::string bad_magic = image;
  bad_magic[0] ^= 0x20;
  std::stringstream in1(bad_magic);
  EXPECT_THROW(deserialize_matcher(in1), FormatError);

  std::string bad_version = image;
  bad_version[4] = 9;
  std::stringstream in2(bad_version);
  EXPECT_THROW(deserialize_matcher(in2), FormatError);
}

TEST(MatcherSerialize, FileRoundTripMatchesInMemory) {
  TempDir tmp;
  Matcher m = Matcher::compile({absorb_rule(), double_not_rule()});
  write_matcher(tmp.path / "rules.sfm", m);
  Matcher back = read_matcher(tmp.path / "rules.sfm");
  EXPECT_EQ(back.test_count(), m.test_count());
  EXPECT_EQ(back.rules().size(), 2u);
  EXPECT_THROW(read_matcher(tmp.path / "missing.sfm"), FormatError);
}

}  // namespace
}  // namespace simpforge
