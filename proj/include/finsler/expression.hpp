#pragma once

// Closed-form scalar expressions over a flat variable vector z, compiled to a
// linear tape that can be evaluated on double or on any Taylor jet type.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finsler/errors.hpp"
#include "finsler/taylor.hpp"

namespace finsler {

enum class Op : std::uint8_t {
  constant,
  variable,
  add,
  sub,
  mul,
  div,
  neg,
  pow,       // general real power, base must stay positive
  pow_int,   // integer exponent, any base
  sqrt,
  exp,
  log,
  sin,
  cos,
};

// Immutable expression DAG handle. Subtrees may be shared; sharing is
// preserved by compilation.
class Expr {
 public:
  struct Node {
    Op op;
    double value = 0.0;  // constant value or integer exponent
    int index = 0;       // variable index
    std::vector<std::shared_ptr<const Node>> args;
  };

  Expr() : Expr(constant(0.0)) {}
  static Expr constant(double value);
  static Expr variable(int index);
  static Expr from_node(std::shared_ptr<const Node> node) { return Expr(std::move(node)); }

  Op op() const { return node_->op; }
  const Node& node() const { return *node_; }
  const std::shared_ptr<const Node>& ptr() const { return node_; }

  bool is_constant() const { return node_->op == Op::constant; }
  double constant_value() const { return node_->value; }

  // Largest variable index referenced, or -1.
  int max_variable() const;

  // Infix rendering, used in error messages. `names` maps variable indices to
  // display names; missing entries print as z<i>.
  std::string to_string(const std::vector<std::string>& names = {}) const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& a, const Expr& b);
  friend Expr pow(const Expr& a, int p);
  friend Expr sqrt(const Expr& a);
  friend Expr exp(const Expr& a);
  friend Expr log(const Expr& a);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);

  friend Expr operator+(const Expr& a, double b) { return a + constant(b); }
  friend Expr operator+(double a, const Expr& b) { return constant(a) + b; }
  friend Expr operator-(const Expr& a, double b) { return a - constant(b); }
  friend Expr operator-(double a, const Expr& b) { return constant(a) - b; }
  friend Expr operator*(const Expr& a, double b) { return a * constant(b); }
  friend Expr operator*(double a, const Expr& b) { return constant(a) * b; }
  friend Expr operator/(const Expr& a, double b) { return a / constant(b); }
  friend Expr operator/(double a, const Expr& b) { return constant(a) / b; }

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static Expr make(Op op, std::vector<Expr> args, double value = 0.0);

  std::shared_ptr<const Node> node_;
};

// Nested-array JSON form. Numbers are constants; variables are ["x", i],
// ["v", i] (metric expressions) or ["z", i] (plain variable lists). Operators: ["+", a, b, ...],
// ["-", a] / ["-", a, b], ["*", a, b, ...], ["/", a, b], ["pow", a, b],
// ["sqrt", a], ["exp", a], ["log", a], ["sin", a], ["cos", a].
struct SymbolTable {
  // Variables 0..dimension-1 are "x", dimension..2*dimension-1 are "v".
  // With dimension == 0 every variable is written as ["z", i].
  int dimension = 0;
};

// Replaces variable i by replacement[i] (variables beyond the list are kept).
Expr substitute(const Expr& e, const std::vector<Expr>& replacement);

nlohmann::json expr_to_json(const Expr& e, const SymbolTable& symbols);
// Throws SchemaError naming `path` on malformed input.
Expr expr_from_json(const nlohmann::json& j, const SymbolTable& symbols, const std::string& path);

class Tape {
 public:
  Tape() = default;
  explicit Tape(const Expr& root, int num_vars, std::vector<std::string> names = {});

  int num_vars() const { return num_vars_; }
  std::size_t size() const { return code_.size(); }

  template <class S>
  S evaluate(std::span<const S> vars) const;

  double operator()(std::span<const double> vars) const { return evaluate<double>(vars); }

 private:
  struct Instr {
    Op op;
    int a = -1;
    int b = -1;
    double value = 0.0;
  };

  [[noreturn]] void fail(std::size_t slot, const char* what) const;

  std::vector<Instr> code_;
  std::vector<std::shared_ptr<const Expr::Node>> origin_;
  std::vector<std::string> names_;
  int num_vars_ = 0;
};

template <class S>
S Tape::evaluate(std::span<const S> vars) const {
  using std::cos;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sin;
  using std::sqrt;
  // Reused per thread and scalar type; evaluate() is never re-entered for
  // the same S on one thread.
  thread_local std::vector<S> slot;
  if (slot.size() < code_.size()) slot.resize(code_.size());
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    switch (in.op) {
      case Op::constant:
        slot[i] = S(in.value);
        break;
      case Op::variable:
        slot[i] = vars[in.a];
        break;
      case Op::add:
        slot[i] = slot[in.a] + slot[in.b];
        break;
      case Op::sub:
        slot[i] = slot[in.a] - slot[in.b];
        break;
      case Op::mul:
        slot[i] = slot[in.a] * slot[in.b];
        break;
      case Op::div:
        if (primal(slot[in.b]) == 0.0) fail(i, "division by zero");
        slot[i] = slot[in.a] / slot[in.b];
        break;
      case Op::neg:
        slot[i] = -slot[in.a];
        break;
      case Op::pow_int:
        if (in.value < 0 && primal(slot[in.a]) == 0.0) fail(i, "negative power of zero");
        slot[i] = ipow(slot[in.a], static_cast<int>(in.value));
        break;
      case Op::pow: {
        if (!(primal(slot[in.a]) > 0.0)) fail(i, "real power of a nonpositive value");
        // exponent is constant when b < 0
        if (in.b < 0) {
          slot[i] = pow(slot[in.a], in.value);
        } else {
          slot[i] = exp(slot[in.b] * log(slot[in.a]));
        }
        break;
      }
      case Op::sqrt:
        if (!(primal(slot[in.a]) > 0.0)) fail(i, "sqrt of a nonpositive value");
        slot[i] = sqrt(slot[in.a]);
        break;
      case Op::exp:
        slot[i] = exp(slot[in.a]);
        break;
      case Op::log:
        if (!(primal(slot[in.a]) > 0.0)) fail(i, "log of a nonpositive value");
        slot[i] = log(slot[in.a]);
        break;
      case Op::sin:
        slot[i] = sin(slot[in.a]);
        break;
      case Op::cos:
        slot[i] = cos(slot[in.a]);
        break;
    }
  }
  return slot[code_.size() - 1];
}

}  // namespace finsler
