#include <gtest/gtest.h>

#include <simpforge/dag.hpp>
#include <simpforge/rng.hpp>

#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace simpforge;

namespace {

const char* kRule119Lhs =
    "0 = S BOOL N_3\n"
    "1 = S BOOL N_4\n"
    "2 = S BOOL N_2\n"
    "3 = S BOOL N_1\n"
    "4 = OR BOOL 0 1\n"
    "5 = OR BOOL 4 2\n"
    "6 = OR BOOL 5 3\n"
    "7 = AND BOOL 6 1\n"
    "7\n";

}  // namespace

TEST(Parse, RenumbersSparseIdsDense) {
  FormulaDag dag = parse_dag(
      "10 = S INT x\n"
      "20 = S INT y\n"
      "30 = PLUS INT 10 20\n"
      "30\n");
  ASSERT_EQ(dag.nodes.size(), 3u);
  EXPECT_EQ(dag.nodes[2].op, OpKind::Plus);
  EXPECT_EQ(dag.nodes[2].operands, (std::vector<NodeId>{0, 1}));
  EXPECT_EQ(dag.roots, (std::vector<NodeId>{2}));
}

TEST(Parse, BitSpellingsAndBoolConst) {
  FormulaDag dag = parse_dag(
      "0 = CONST BIT 1\n"
      "1 = S BIT_ARR flags\n"
      "0\n");
  EXPECT_EQ(dag.nodes[0].sort, Sort::Bool);
  EXPECT_EQ(dag.nodes[0].value, 1);
  EXPECT_EQ(dag.nodes[1].sort, Sort::BoolArr);

  std::string text = serialize_dag(dag);
  EXPECT_NE(text.find("0 = CONST BIT 1"), std::string::npos);
  EXPECT_NE(text.find("BOOL_ARR"), std::string::npos);
}

TEST(Parse, AssertsBecomeRoots) {
  FormulaDag dag = parse_dag(
      "0 = S BOOL p\n"
      "1 = ASSERT BOOL 0\n"
      "2 = S BOOL q\n"
      "3 = ASSERT BOOL 2\n");
  EXPECT_EQ(dag.roots, (std::vector<NodeId>{1, 3}));
}

TEST(Parse, ArrReadTokenWithScalarChoicesIsMux) {
  FormulaDag dag = parse_dag(
      "0 = S INT sel\n"
      "1 = S INT a\n"
      "2 = S INT b\n"
      "3 = ARR_R INT 0 1 2\n"
      "3\n");
  EXPECT_EQ(dag.nodes[3].op, OpKind::ArrAcc);

  FormulaDag read = parse_dag(
      "0 = S INT idx\n"
      "1 = S INT_ARR xs\n"
      "2 = ARR_R INT 0 1\n"
      "2\n");
  EXPECT_EQ(read.nodes[2].op, OpKind::ArrRead);
}

TEST(Parse, Errors) {
  EXPECT_THROW(parse_dag("0 = PLUS INT 1 2\n"), ParseError);  // forward operands
  EXPECT_THROW(parse_dag("0 = S INT x\n0 = S INT y\n"), ParseError);
  EXPECT_THROW(parse_dag("0 = CONST BIT 2\n"), ParseError);
  EXPECT_THROW(parse_dag("0 = FROB INT\n"), ParseError);
  EXPECT_THROW(parse_dag("junk\n"), ParseError);
  EXPECT_THROW(parse_dag("0 = S INT x\n1 = NOT BOOL 0\n"), ParseError);  // sort mismatch
  // selector plus three choices exceeds the in-degree bound of 3
  EXPECT_THROW(parse_dag("0 = S INT s\n1 = S INT a\n2 = ARR_R INT 0 1 1 1\n"), ParseError);
}

TEST(Validate, RejectsIllFormedNodes) {
  FormulaDag dag;
  Node x;
  x.op = OpKind::Source;
  x.sort = Sort::Int;
  dag.nodes.push_back(x);  // unnamed source
  EXPECT_THROW(validate(dag), ValidationError);

  dag.nodes[0].name = "x";
  validate(dag);

  Node bad;
  bad.op = OpKind::Not;
  bad.sort = Sort::Bool;
  bad.operands = {5};
  dag.nodes.push_back(bad);  // dangling operand
  EXPECT_THROW(validate(dag), ValidationError);
}

TEST(HashCons, MergesCommutativeReorderings) {
  FormulaDag dag = parse_dag(
      "0 = S BOOL x\n"
      "1 = S BOOL y\n"
      "2 = AND BOOL 0 1\n"
      "3 = AND BOOL 1 0\n"
      "4 = OR BOOL 2 3\n"
      "4\n");
  FormulaDag consed = hash_cons(dag);
  ASSERT_EQ(consed.nodes.size(), 4u);  // one AND survives
  const Node& root = consed.nodes[consed.roots[0]];
  EXPECT_EQ(root.op, OpKind::Or);
  EXPECT_EQ(root.operands[0], root.operands[1]);
}

TEST(HashCons, DropsUnreachableAndIsIdempotent) {
  FormulaDag dag = parse_dag(
      "0 = S INT x\n"
      "1 = S INT dead\n"
      "2 = NEG INT 1\n"
      "3 = NEG INT 0\n"
      "3\n");
  FormulaDag consed = hash_cons(dag);
  EXPECT_EQ(consed.nodes.size(), 2u);
  EXPECT_EQ(consed, hash_cons(consed));
}

TEST(Eval, TotalSemanticsForPartialOps) {
  FormulaDag dag = parse_dag(
      "0 = S INT a\n"
      "1 = CONST INT 0\n"
      "2 = DIV INT 0 1\n"
      "3 = MOD INT 0 1\n"
      "2\n3\n");
  Environment env{{"a", std::int64_t{17}}};
  EvalResult r = evaluate(dag, env);
  EXPECT_EQ(std::get<std::int64_t>(r.values[2]), 0);
  EXPECT_EQ(std::get<std::int64_t>(r.values[3]), 0);
}

TEST(Eval, MuxClampsSelector) {
  FormulaDag dag = parse_dag(
      "0 = S INT s\n"
      "1 = CONST INT 10\n"
      "2 = CONST INT 20\n"
      "3 = ARRACC INT 0 1 2\n"
      "3\n");
  auto at = [&](std::int64_t s) {
    return std::get<std::int64_t>(eval_node(dag, 3, {{"s", s}}));
  };
  EXPECT_EQ(at(0), 10);
  EXPECT_EQ(at(1), 20);
  EXPECT_EQ(at(-1), 20);
  EXPECT_EQ(at(7), 20);
}

TEST(Eval, ArrayDefaultsAndStrictMode) {
  FormulaDag dag = parse_dag(
      "0 = S INT i\n"
      "1 = CONST INT 5\n"
      "2 = ARR_CREATE INT_ARR 1 1\n"
      "3 = ARR_R INT 0 2\n"
      "4 = ARR_W INT_ARR 0 2 1\n"
      "3\n4\n");
  Environment in_range{{"i", std::int64_t{1}}};
  Environment beyond{{"i", std::int64_t{9}}};

  EXPECT_EQ(std::get<std::int64_t>(evaluate(dag, in_range).values[3]), 5);
  // index 2 is inside the fixed array length, reading the zero padding
  EXPECT_EQ(std::get<std::int64_t>(evaluate(dag, {{"i", std::int64_t{2}}}).values[3]), 0);
  EXPECT_EQ(std::get<std::int64_t>(evaluate(dag, beyond).values[3]), 0);

  auto written = std::get<std::vector<std::int64_t>>(evaluate(dag, beyond).values[4]);
  EXPECT_EQ(written, (std::vector<std::int64_t>{5, 5, 0, 0}));  // write dropped

  EvalOptions strict;
  strict.strict_arrays = true;
  EXPECT_THROW(evaluate(dag, beyond, strict), EvalError);
}

TEST(Eval, WrapsToConfiguredWidth) {
  FormulaDag dag = parse_dag(
      "0 = S INT a\n"
      "1 = CONST INT 1\n"
      "2 = PLUS INT 0 1\n"
      "3 = NEG INT 0\n"
      "2\n3\n");
  EvalOptions w4;
  w4.int_bits = 4;
  EvalResult r = evaluate(dag, {{"a", std::int64_t{7}}}, w4);
  EXPECT_EQ(std::get<std::int64_t>(r.values[2]), -8);
  EXPECT_EQ(std::get<std::int64_t>(r.values[3]), -7);

  r = evaluate(dag, {{"a", std::int64_t{-8}}}, w4);
  EXPECT_EQ(std::get<std::int64_t>(r.values[3]), -8);  // -(-8) wraps back
}

TEST(Eval, Int64Corners) {
  FormulaDag dag = parse_dag(
      "0 = S INT a\n"
      "1 = CONST INT -1\n"
      "2 = DIV INT 0 1\n"
      "3 = MOD INT 0 1\n"
      "2\n3\n");
  EvalResult r = evaluate(dag, {{"a", INT64_MIN}});
  EXPECT_EQ(std::get<std::int64_t>(r.values[2]), INT64_MIN);
  EXPECT_EQ(std::get<std::int64_t>(r.values[3]), 0);
}

TEST(Eval, RecordsFailedAsserts) {
  FormulaDag dag = parse_dag(
      "0 = S BOOL p\n"
      "1 = ASSERT BOOL 0\n");
  EXPECT_TRUE(evaluate(dag, {{"p", std::int64_t{1}}}).failed_asserts.empty());
  EXPECT_EQ(evaluate(dag, {{"p", std::int64_t{0}}}).failed_asserts,
            (std::vector<NodeId>{1}));
}

TEST(Eval, ErrorsOnMissingOrIllTypedInputs) {
  FormulaDag dag = parse_dag("0 = S BOOL p\n1 = NOT BOOL 0\n1\n");
  EXPECT_THROW(evaluate(dag, {}), EvalError);
  EXPECT_THROW(evaluate(dag, {{"p", std::int64_t{2}}}), EvalError);
}

TEST(Eval, AgreesWithReferenceInterpreter) {
  Rng rng(611);
  for (int trial = 0; trial < 200; ++trial) {
    sft::GenOptions g;
    g.use_arrays = trial % 2 == 1;
    FormulaDag dag = sft::random_dag(rng, 10 + rng.below(30), g);

    EvalOptions opts;
    opts.int_bits = trial % 3 == 0 ? 0 : 4;
    Environment env = sft::random_env(dag, rng, opts.int_bits == 0 ? 8 : 4);

    EvalResult got = evaluate(dag, env, opts);
    for (NodeId root : dag.roots)
      EXPECT_EQ(got.values[root], sft::ref_eval(dag, root, env, opts))
          << "trial " << trial << " root " << root;
  }
}

TEST(Fold, FoldsConstantSubtrees) {
  FormulaDag dag = parse_dag(
      "0 = CONST INT 2\n"
      "1 = CONST INT 3\n"
      "2 = PLUS INT 0 1\n"
      "3 = S INT x\n"
      "4 = PLUS INT 2 3\n"
      "4\n");
  FormulaDag folded = constant_fold(dag);
  const Node& root = folded.nodes[folded.roots[0]];
  ASSERT_EQ(root.op, OpKind::Plus);
  bool has_five = false;
  for (NodeId o : root.operands) {
    const Node& n = folded.nodes[o];
    has_five = has_five || (n.op == OpKind::Const && n.value == 5);
  }
  EXPECT_TRUE(has_five);
}

TEST(Fold, UsesEvaluationWidth) {
  FormulaDag dag = parse_dag(
      "0 = CONST INT 7\n"
      "1 = CONST INT 1\n"
      "2 = PLUS INT 0 1\n"
      "2\n");
  EvalOptions w4;
  w4.int_bits = 4;
  FormulaDag folded = constant_fold(dag, w4);
  ASSERT_EQ(folded.nodes.size(), 1u);
  EXPECT_EQ(folded.nodes[0].value, -8);
}

TEST(Fold, PreservesRootSemantics) {
  Rng rng(4214);
  for (int trial = 0; trial < 100; ++trial) {
    FormulaDag dag = sft::random_dag(rng, 10 + rng.below(20));
    EvalOptions opts;
    opts.int_bits = 4;
    std::vector<NodeId> remap;
    FormulaDag folded = constant_fold(dag, opts, &remap);

    for (int e = 0; e < 20; ++e) {
      Environment env = sft::random_env(dag, rng, 4);
      EvalResult a = evaluate(dag, env, opts);
      EvalResult b = evaluate(folded, env, opts);
      for (NodeId r : dag.roots) {
        ASSERT_NE(remap[r], kNoNode);
        ASSERT_EQ(a.values[r], b.values[remap[r]]);
      }
    }
  }
}

TEST(Roundtrip, SerializeParseIsStable) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    sft::GenOptions g;
    g.use_arrays = trial % 2 == 1;
    FormulaDag dag = sft::random_dag(rng, 5 + rng.below(25), g);
    std::string text = serialize_dag(dag);
    FormulaDag back = parse_dag(text);
    EXPECT_EQ(back, dag);
    EXPECT_EQ(serialize_dag(back), text);
  }
}

TEST(Rule119Shape, CollapsesToItsSharedLeaf) {
  FormulaDag lhs = parse_dag(kRule119Lhs);
  ASSERT_EQ(lhs.roots.size(), 1u);

  int envs = 0;
  sft::for_each_env(lhs, 1, [&](const Environment& env) {
    ++envs;
    EvalResult r = evaluate(lhs, env);
    EXPECT_EQ(std::get<std::int64_t>(r.values[lhs.roots[0]]),
              std::get<std::int64_t>(env.at("N_4")));
  });
  EXPECT_EQ(envs, 16);
}
