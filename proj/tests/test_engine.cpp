#include "simpforge/engine.hpp"

#include <gtest/gtest.h>

#include <string>

#include "simpforge/pattern.hpp"
#include "support/generators.hpp"

namespace simpforge {
namespace {

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

RewriteRule mux_rule() {
  return make_rule(
      "0 = S INT t\n"
      "1 = S INT c\n"
      "2 = S INT d\n"
      "3 = ARRACC INT 0 1 2\n"
      "3\n",
      make_predicate({make_atom("c", Rel::Eq, "d")}), "0 = S INT c\n0\n");
}

RewriteRule double_not_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = NOT BOOL 0\n"
      "2 = NOT BOOL 1\n"
      "2\n",
      make_predicate({}), "0 = S BOOL x\n0\n");
}

RewriteRule self_xor_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = XOR BOOL 0 0\n"
      "1\n",
      make_predicate({}), "0 = CONST BIT 0\n0\n");
}

RewriteRule plus_zero_rule() {
  return make_rule(
      "0 = S INT x\n"
      "1 = CONST INT 0\n"
      "2 = PLUS INT 0 1\n"
      "2\n",
      make_predicate({}), "0 = S INT x\n0\n");
}

RewriteRule absorb_rule() {
  return make_rule(
      "0 = S BOOL x\n"
      "1 = S BOOL y\n"
      "2 = OR BOOL 0 1\n"
      "3 = AND BOOL 2 0\n"
      "3\n",
      make_predicate({}), "0 = S BOOL x\n0\n");
}

// AND(OR(OR(OR(N_3, N_4), N_2), N_1), N_4) -> N_4
RewriteRule chain_absorb_rule() {
  return make_rule(
      "0 = S BOOL N_3\n"
      "1 = S BOOL N_4\n"
      "2 = S BOOL N_2\n"
      "3 = S BOOL N_1\n"
      "4 = OR BOOL 0 1\n"
      "5 = OR BOOL 4 2\n"
      "6 = OR BOOL 5 3\n"
      "7 = AND BOOL 6 1\n"
      "7\n",
      make_predicate({}), "0 = S BOOL N_4\n0\n");
}

// Appends one instance of the chain-absorption LHS over fresh sources and
// makes it a root; exactly seven of the eight added nodes die when the rule
// fires (the kept choice survives as the new root).
std::size_t plant_chain(FormulaDag& dag, const std::string& tag) {
  auto push = [&](Node n) {
    dag.nodes.push_back(std::move(n));
    return static_cast<NodeId>(dag.nodes.size() - 1);
  };
  auto source = [&](const std::string& name) {
    Node n;
    n.op = OpKind::Source;
    n.sort = Sort::Bool;
    n.name = name;
    return push(std::move(n));
  };
  auto op2 = [&](OpKind op, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.sort = Sort::Bool;
    n.operands = {a, b};
    return push(std::move(n));
  };
  NodeId n3 = source(tag + "_n3");
  NodeId n4 = source(tag + "_n4");
  NodeId n2 = source(tag + "_n2");
  NodeId n1 = source(tag + "_n1");
  NodeId chain = op2(OpKind::And, op2(OpKind::Or, op2(OpKind::Or, op2(OpKind::Or, n3, n4), n2), n1), n4);
  dag.roots.push_back(chain);
  return 7;
}

void expect_same_semantics(const FormulaDag& before, const FormulaDag& after,
                           const std::vector<NodeId>& root_map, Rng& rng, int envs) {
  ASSERT_EQ(root_map.size(), before.roots.size());
  for (int e = 0; e < envs; ++e) {
    Environment env = sft::random_env(before, rng, 4);
    EvalResult a = evaluate(before, env);
    EvalResult b = evaluate(after, env);
    for (std::size_t r = 0; r < before.roots.size(); ++r)
      ASSERT_EQ(a.values[before.roots[r]], b.values[root_map[r]]) << "env " << e;
  }
}

TEST(SizeMetric, CountsOnlyOperationNodes) {
  EXPECT_EQ(size_metric(FormulaDag{}), 0u);
  EXPECT_EQ(size_metric(parse_dag("0 = S BOOL x\n1 = NOT BOOL 0\n1\n")), 1u);
  EXPECT_EQ(size_metric(parse_dag("0 = S INT i\n0\n")), 0u);
}

TEST(SizeMetric, BenchmarkFragmentCountsItsOperationLines) {
  FormulaDag dag = parse_dag(
      "429 = S INT a\n"
      "536 = S INT_ARR m\n"
      "542 = S INT b\n"
      "428 = S INT c\n"
      "5 = S INT d\n"
      "482 = S BOOL p\n"
      "361 = S BOOL q\n"
      "481 = S BOOL r\n"
      "543 = ARR_W INT_ARR 429 536 542\n"
      "544 = ARR_W INT_ARR 428 543 5\n"
      "545 = NOT BOOL 482\n"
      "546 = AND BOOL 361 545\n"
      "547 = AND BOOL 481 546\n"
      "544\n547\n");
  EXPECT_EQ(size_metric(dag), 5u);
}

TEST(Simplify, CollapsesTheSharedChoiceSelector) {
  DagBuilder b;
  NodeId t = b.add_source(Sort::Int, "t");
  NodeId c = b.add_source(Sort::Int, "c");
  NodeId acc = b.add(OpKind::ArrAcc, Sort::Int, {t, c, c});
  FormulaDag dag = b.freeze({acc});

  SimplifyTrace trace;
  FormulaDag out = simplify(dag, Matcher::compile({mux_rule()}), {}, &trace);
  ASSERT_EQ(out.roots.size(), 1u);
  EXPECT_EQ(out.node(out.roots[0]).op, OpKind::Source);
  EXPECT_EQ(out.node(out.roots[0]).name, "c");
  EXPECT_LT(out.size(), dag.size());
  ASSERT_EQ(trace.steps.size(), 1u);
  EXPECT_EQ(trace.steps[0].rule, 0u);
  EXPECT_FALSE(trace.limit_hit);
}

TEST(Simplify, EmptyMatcherIsTheFoldAndConsFixpoint) {
  Matcher empty = Matcher::compile({});
  Rng rng(41);
  for (int round = 0; round < 20; ++round) {
    FormulaDag dag = sft::random_dag(rng, 25);
    SimplifyTrace trace;
    FormulaDag out = simplify(dag, empty, {}, &trace);
    EXPECT_EQ(out, constant_fold(dag));
    EXPECT_TRUE(trace.steps.empty());
    EXPECT_FALSE(trace.limit_hit);
    EXPECT_EQ(simplify(out, empty), out);
  }
}

TEST(Simplify, NegationChainsCascadeWithinOnePass) {
  DagBuilder b;
  NodeId x = b.add_source(Sort::Bool, "x");
  NodeId n = x;
  for (int i = 0; i < 4; ++i) n = b.add(OpKind::Not, Sort::Bool, {n});
  FormulaDag dag = b.freeze({n});

  SimplifyTrace trace;
  FormulaDag out = simplify(dag, Matcher::compile({double_not_rule()}), {}, &trace);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.node(out.roots[0]).name, "x");
  for (const RewriteStep& s : trace.steps) EXPECT_EQ(s.pass, 1);
  EXPECT_EQ(trace.passes, 2);  // the second sweep confirms the fixpoint
  EXPECT_FALSE(trace.limit_hit);
}

TEST(Simplify, FoldingFinishesWhatARewriteExposes) {
  DagBuilder b;
  NodeId a = b.add_source(Sort::Bool, "a");
  NodeId x = b.add(OpKind::Xor, Sort::Bool, {a, a});
  NodeId root = b.add(OpKind::Not, Sort::Bool, {x});
  FormulaDag dag = b.freeze({root});

  SimplifyTrace trace;
  FormulaDag out = simplify(dag, Matcher::compile({self_xor_rule()}), {}, &trace);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.node(out.roots[0]).op, OpKind::Const);
  EXPECT_EQ(out.node(out.roots[0]).value, 1);
  ASSERT_EQ(trace.steps.size(), 1u);
  EXPECT_EQ(trace.steps[0].pass, 1);
}

TEST(Simplify, EveryRootSurvivesASplice) {
  DagBuilder b;
  NodeId a = b.add_source(Sort::Bool, "a");
  NodeId c = b.add_source(Sort::Bool, "c");
  NodeId x = b.add(OpKind::Xor, Sort::Bool, {a, a});
  NodeId keep = b.add(OpKind::And, Sort::Bool, {a, c});
  FormulaDag dag = b.freeze({x, keep});

  SimplifyTrace trace;
  FormulaDag out = simplify(dag, Matcher::compile({self_xor_rule()}), {}, &trace);
  ASSERT_EQ(out.roots.size(), 2u);
  ASSERT_EQ(trace.root_map.size(), 2u);
  EXPECT_EQ(out.node(trace.root_map[0]).op, OpKind::Const);
  EXPECT_EQ(out.node(trace.root_map[1]).op, OpKind::And);

  Rng rng(5);
  expect_same_semantics(dag, out, trace.root_map, rng, 50);
}

TEST(Simplify, TheRewriteCapStopsTheSweep) {
  DagBuilder b;
  NodeId a = b.add_source(Sort::Bool, "a");
  NodeId c = b.add_source(Sort::Bool, "c");
  NodeId x1 = b.add(OpKind::Xor, Sort::Bool, {a, a});
  NodeId x2 = b.add(OpKind::Xor, Sort::Bool, {c, c});
  FormulaDag dag = b.freeze({x1, x2});

  SimplifyLimits limits;
  limits.max_rewrites = 1;
  SimplifyTrace trace;
  FormulaDag out = simplify(dag, Matcher::compile({self_xor_rule()}), limits, &trace);
  EXPECT_EQ(trace.steps.size(), 1u);
  EXPECT_TRUE(trace.limit_hit);
  EXPECT_EQ(size_metric(out), 1u);

  Rng rng(6);
  expect_same_semantics(dag, out, trace.root_map, rng, 30);
}

TEST(Simplify, ThePassCapIsReportedEvenWhenWorkCompletes) {
  DagBuilder b;
  NodeId a = b.add_source(Sort::Bool, "a");
  NodeId x = b.add(OpKind::Xor, Sort::Bool, {a, a});
  NodeId root = b.add(OpKind::Not, Sort::Bool, {x});
  FormulaDag dag = b.freeze({root});

  SimplifyLimits limits;
  limits.max_passes = 1;
  SimplifyTrace trace;
  FormulaDag out = simplify(dag, Matcher::compile({self_xor_rule()}), limits, &trace);
  EXPECT_TRUE(trace.limit_hit);
  EXPECT_EQ(trace.passes, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.node(out.roots[0]).op, OpKind::Const);
}

TEST(Simplify, RandomDagsShrinkMonotonicallyAndIdempotently) {
  Matcher m = Matcher::compile({double_not_rule(), self_xor_rule(), plus_zero_rule(),
                                absorb_rule(), mux_rule()});
  Rng rng(20260822);
  for (int round = 0; round < 15; ++round) {
    sft::GenOptions opts;
    opts.use_div_mod = false;
    FormulaDag dag = sft::random_dag(rng, 30, opts);

    SimplifyTrace trace;
    FormulaDag out = simplify(dag, m, {}, &trace);
    EXPECT_LE(size_metric(out), size_metric(dag)) << "round " << round;

    SimplifyTrace again;
    EXPECT_EQ(simplify(out, m, {}, &again), out) << "round " << round;
    EXPECT_TRUE(again.steps.empty());

    Rng envs = rng.fork(round);
    expect_same_semantics(dag, out, trace.root_map, envs, 30);
  }
}

TEST(Simplify, PlantedChainsAreRemovedWholesale) {
  Matcher m = Matcher::compile({chain_absorb_rule()});
  Rng rng(77);
  std::size_t total_expected = 0;
  std::size_t total_removed = 0;
  for (int round = 0; round < 50; ++round) {
    FormulaDag dag = sft::random_dag(rng, 30);
    std::size_t expected = 0;
    for (int i = 0; i < 5; ++i)
      expected += plant_chain(dag, "p" + std::to_string(round) + "_" + std::to_string(i));
    validate(dag);

    SimplifyTrace trace;
    FormulaDag out = simplify(dag, m, {}, &trace);
    EXPECT_GE(trace.steps.size(), 5u) << "round " << round;
    ASSERT_GE(dag.size(), out.size());
    total_expected += expected;
    total_removed += dag.size() - out.size();

    Rng envs = rng.fork(1000 + round);
    expect_same_semantics(dag, out, trace.root_map, envs, 10);
  }
  EXPECT_GE(total_removed, total_expected);
}

}  // namespace
}  // namespace simpforge
