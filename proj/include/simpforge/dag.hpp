#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "simpforge/errors.hpp"

namespace simpforge {

using NodeId = std::uint32_t;

// Sentinel in remap tables for nodes with no image in the rebuilt DAG.
constexpr NodeId kNoNode = static_cast<NodeId>(-1);

enum class Sort : std::uint8_t { Bool, Int, BoolArr, IntArr };

enum class OpKind : std::uint8_t {
  Const,
  Source,
  Ctrl,
  Not,
  And,
  Or,
  Xor,
  Plus,
  Times,
  Div,
  Mod,
  Neg,
  Eq,
  Lt,
  ArrAcc,     // mux: INT selector picks among listed same-sort choices
  ArrRead,    // element read: INT index + array value
  ArrWrite,
  ArrCreate,
  Assert,
};

constexpr std::size_t kDefaultMaxArity = 3;

bool is_leaf(OpKind op);         // Const, Source, Ctrl
bool is_commutative(OpKind op);  // And, Or, Xor, Plus, Times, Eq
bool is_scalar(Sort s);
bool is_array(Sort s);
Sort elem_sort(Sort s);
Sort array_sort(Sort elem);

const char* op_token(OpKind op);
const char* sort_token(Sort s);
std::optional<OpKind> op_from_token(std::string_view tok);
std::optional<Sort> sort_from_token(std::string_view tok);

struct Node {
  OpKind op = OpKind::Const;
  Sort sort = Sort::Bool;
  std::vector<NodeId> operands;
  std::int64_t value = 0;  // Const payload
  std::string name;        // Source/Ctrl payload

  auto operator<=>(const Node&) const = default;
};

// Nodes are stored in topological order: operands always precede consumers.
// roots is kept sorted and duplicate-free.
struct FormulaDag {
  std::vector<Node> nodes;
  std::vector<NodeId> roots;

  bool operator==(const FormulaDag&) const = default;
  std::size_t size() const { return nodes.size(); }
  const Node& node(NodeId id) const { return nodes[id]; }
};

// Arity/sort/acyclicity checks; throws ValidationError naming the offending
// node. max_arity = 0 disables the width cap.
void validate(const FormulaDag& dag, std::size_t max_arity = kDefaultMaxArity);

FormulaDag parse_dag(const std::string& text, std::size_t max_arity = kDefaultMaxArity);
std::string serialize_dag(const FormulaDag& dag);

// Incremental hash-consing constructor. add() sorts commutative operand pairs
// and returns the id of an existing structural duplicate instead of growing.
class DagBuilder {
 public:
  NodeId add(OpKind op, Sort sort, std::vector<NodeId> operands,
             std::int64_t value = 0, std::string name = {});
  NodeId add_const(Sort sort, std::int64_t value) { return add(OpKind::Const, sort, {}, value); }
  NodeId add_source(Sort sort, std::string name) {
    return add(OpKind::Source, sort, {}, 0, std::move(name));
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  FormulaDag freeze(std::vector<NodeId> roots) const;

 private:
  std::vector<Node> nodes_;
  std::map<Node, NodeId> index_;
};

// Rebuilds the DAG keeping only nodes reachable from the roots, with duplicate
// structures merged and commutative operands in canonical order. remap, when
// given, receives old-id -> new-id (kNoNode for pruned nodes).
FormulaDag hash_cons(const FormulaDag& dag, std::vector<NodeId>* remap = nullptr);

// ---- evaluation ----

using Value = std::variant<std::int64_t, std::vector<std::int64_t>>;
using Environment = std::map<std::string, Value>;

struct EvalOptions {
  // Integer width in bits for two's-complement wraparound; 0 means plain
  // 64-bit arithmetic. Oracle enumeration uses small widths (default 4).
  int int_bits = 0;
  int array_len = 4;
  bool strict_arrays = false;
};

struct EvalResult {
  std::vector<Value> values;           // indexed by node id
  std::vector<NodeId> failed_asserts;  // Assert nodes whose operand != 1
};

std::int64_t wrap_int(std::int64_t v, int bits);
std::int64_t int_min_for(int bits);
std::int64_t int_max_for(int bits);

// Semantics of any op over scalar inputs (element 0 first); shared by
// evaluate, constant_fold, and abstract-value enumeration.
std::int64_t scalar_op_value(OpKind op, const std::vector<std::int64_t>& args,
                             const EvalOptions& opts);

EvalResult evaluate(const FormulaDag& dag, const Environment& env,
                    const EvalOptions& opts = {});
Value eval_node(const FormulaDag& dag, NodeId id, const Environment& env,
                const EvalOptions& opts = {});

FormulaDag constant_fold(const FormulaDag& dag, const EvalOptions& opts = {},
                         std::vector<NodeId>* remap = nullptr);

}  // namespace simpforge
