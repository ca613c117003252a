#include "finsler/expression.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

namespace finsler {

namespace {

bool is_integral(double x) { return std::isfinite(x) && std::floor(x) == x && std::fabs(x) < 1e6; }

const char* op_symbol(Op op) {
  switch (op) {
    case Op::add: return "+";
    case Op::sub: return "-";
    case Op::mul: return "*";
    case Op::div: return "/";
    case Op::neg: return "-";
    case Op::pow:
    case Op::pow_int: return "pow";
    case Op::sqrt: return "sqrt";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    default: return "?";
  }
}

}  // namespace

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->op = Op::constant;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::variable(int index) {
  if (index < 0) throw InputError("variable index must be nonnegative");
  auto n = std::make_shared<Node>();
  n->op = Op::variable;
  n->index = index;
  return Expr(std::move(n));
}

Expr Expr::make(Op op, std::vector<Expr> args, double value) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = value;
  n->args.reserve(args.size());
  for (auto& a : args) n->args.push_back(a.node_);
  return Expr(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() + b.constant_value());
  if (a.is_constant() && a.constant_value() == 0.0) return b;
  if (b.is_constant() && b.constant_value() == 0.0) return a;
  return Expr::make(Op::add, {a, b});
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() - b.constant_value());
  if (b.is_constant() && b.constant_value() == 0.0) return a;
  return Expr::make(Op::sub, {a, b});
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() * b.constant_value());
  if (a.is_constant() && a.constant_value() == 1.0) return b;
  if (b.is_constant() && b.constant_value() == 1.0) return a;
  return Expr::make(Op::mul, {a, b});
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_constant() && b.constant_value() == 1.0) return a;
  return Expr::make(Op::div, {a, b});
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.constant_value());
  return Expr::make(Op::neg, {a});
}

Expr pow(const Expr& a, const Expr& b) {
  if (b.is_constant() && is_integral(b.constant_value())) return pow(a, static_cast<int>(b.constant_value()));
  return Expr::make(Op::pow, {a, b});
}

Expr pow(const Expr& a, int p) {
  if (p == 1) return a;
  return Expr::make(Op::pow_int, {a}, static_cast<double>(p));
}

Expr sqrt(const Expr& a) { return Expr::make(Op::sqrt, {a}); }
Expr exp(const Expr& a) { return Expr::make(Op::exp, {a}); }
Expr log(const Expr& a) { return Expr::make(Op::log, {a}); }
Expr sin(const Expr& a) { return Expr::make(Op::sin, {a}); }
Expr cos(const Expr& a) { return Expr::make(Op::cos, {a}); }

int Expr::max_variable() const {
  std::unordered_map<const Node*, int> memo;
  auto walk = [&](auto&& self, const Node* n) -> int {
    if (auto it = memo.find(n); it != memo.end()) return it->second;
    int m = n->op == Op::variable ? n->index : -1;
    for (const auto& a : n->args) m = std::max(m, self(self, a.get()));
    memo.emplace(n, m);
    return m;
  };
  return walk(walk, node_.get());
}

namespace {

void render(std::ostringstream& os, const Expr::Node& n, const std::vector<std::string>& names) {
  switch (n.op) {
    case Op::constant:
      os << n.value;
      return;
    case Op::variable:
      if (n.index < static_cast<int>(names.size()))
        os << names[n.index];
      else
        os << "z" << n.index;
      return;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div:
      os << "(";
      render(os, *n.args[0], names);
      os << " " << op_symbol(n.op) << " ";
      render(os, *n.args[1], names);
      os << ")";
      return;
    case Op::neg:
      os << "-";
      render(os, *n.args[0], names);
      return;
    case Op::pow_int:
      os << "pow(";
      render(os, *n.args[0], names);
      os << ", " << static_cast<int>(n.value) << ")";
      return;
    case Op::pow:
      os << "pow(";
      render(os, *n.args[0], names);
      os << ", ";
      render(os, *n.args[1], names);
      os << ")";
      return;
    default:
      os << op_symbol(n.op) << "(";
      render(os, *n.args[0], names);
      os << ")";
      return;
  }
}

}  // namespace

std::string Expr::to_string(const std::vector<std::string>& names) const {
  std::ostringstream os;
  os.precision(17);
  render(os, *node_, names);
  return os.str();
}

Expr substitute(const Expr& e, const std::vector<Expr>& replacement) {
  std::unordered_map<const Expr::Node*, Expr> memo;
  auto walk = [&](auto&& self, const Expr& cur) -> Expr {
    const Expr::Node* key = cur.ptr().get();
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const auto& n = cur.node();
    Expr out = cur;
    auto child = [&](std::size_t i) { return self(self, Expr::from_node(n.args[i])); };
    switch (n.op) {
      case Op::constant: break;
      case Op::variable:
        if (n.index < static_cast<int>(replacement.size())) out = replacement[n.index];
        break;
      case Op::add: out = child(0) + child(1); break;
      case Op::sub: out = child(0) - child(1); break;
      case Op::mul: out = child(0) * child(1); break;
      case Op::div: out = child(0) / child(1); break;
      case Op::neg: out = -child(0); break;
      case Op::pow_int: out = pow(child(0), static_cast<int>(n.value)); break;
      case Op::pow: out = pow(child(0), child(1)); break;
      case Op::sqrt: out = sqrt(child(0)); break;
      case Op::exp: out = exp(child(0)); break;
      case Op::log: out = log(child(0)); break;
      case Op::sin: out = sin(child(0)); break;
      case Op::cos: out = cos(child(0)); break;
    }
    memo.emplace(key, out);
    return out;
  };
  return walk(walk, e);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json node_to_json(const Expr::Node& n, const SymbolTable& symbols) {
  using nlohmann::json;
  switch (n.op) {
    case Op::constant:
      return n.value;
    case Op::variable:
      if (symbols.dimension == 0) return json::array({"z", n.index});
      if (n.index < symbols.dimension) return json::array({"x", n.index});
      return json::array({"v", n.index - symbols.dimension});
    case Op::pow_int:
      return json::array({"pow", node_to_json(*n.args[0], symbols), static_cast<int>(n.value)});
    default: {
      json arr = json::array({op_symbol(n.op)});
      for (const auto& a : n.args) arr.push_back(node_to_json(*a, symbols));
      return arr;
    }
  }
}

}  // namespace

nlohmann::json expr_to_json(const Expr& e, const SymbolTable& symbols) { return node_to_json(e.node(), symbols); }

Expr expr_from_json(const nlohmann::json& j, const SymbolTable& symbols, const std::string& path) {
  if (j.is_number()) return Expr::constant(j.get<double>());
  if (!j.is_array() || j.empty() || !j[0].is_string())
    throw SchemaError(path + ": expected a number or an array [\"op\", args...]");
  const std::string head = j[0].get<std::string>();
  const std::size_t argc = j.size() - 1;
  auto arg = [&](std::size_t i) { return expr_from_json(j[i], symbols, path + "[" + std::to_string(i) + "]"); };
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (argc < lo || argc > hi)
      throw SchemaError(path + ": operator \"" + head + "\" takes " + std::to_string(lo) +
                        (hi != lo ? "+" : "") + " argument(s), got " + std::to_string(argc));
  };

  if (head == "x" || head == "v" || head == "z") {
    need(1, 1);
    if (!j[1].is_number_integer()) throw SchemaError(path + ": variable index must be an integer");
    const int i = j[1].get<int>();
    if (head == "z") {
      if (i < 0) throw SchemaError(path + ": negative variable index");
      return Expr::variable(i);
    }
    if (symbols.dimension == 0) throw SchemaError(path + ": \"" + head + "\" variables need a dimension");
    if (i < 0 || i >= symbols.dimension)
      throw SchemaError(path + ": index " + std::to_string(i) + " out of range for dimension " +
                        std::to_string(symbols.dimension));
    return Expr::variable(head == "x" ? i : symbols.dimension + i);
  }
  if (head == "+" || head == "*") {
    need(1, static_cast<std::size_t>(-1));
    Expr acc = arg(1);
    for (std::size_t i = 2; i <= argc; ++i) acc = head == "+" ? acc + arg(i) : acc * arg(i);
    return acc;
  }
  if (head == "-") {
    need(1, 2);
    return argc == 1 ? -arg(1) : arg(1) - arg(2);
  }
  if (head == "/") {
    need(2, 2);
    return arg(1) / arg(2);
  }
  if (head == "pow") {
    need(2, 2);
    return pow(arg(1), arg(2));
  }
  need(1, 1);
  if (head == "sqrt") return sqrt(arg(1));
  if (head == "exp") return exp(arg(1));
  if (head == "log") return log(arg(1));
  if (head == "sin") return sin(arg(1));
  if (head == "cos") return cos(arg(1));
  throw SchemaError(path + ": unknown operator \"" + head + "\"");
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(const Expr& root, int num_vars, std::vector<std::string> names)
    : names_(std::move(names)), num_vars_(num_vars) {
  if (root.max_variable() >= num_vars)
    throw InputError("expression references variable " + std::to_string(root.max_variable()) + " but only " +
                     std::to_string(num_vars) + " variables are declared");
  std::unordered_map<const Expr::Node*, int> slot_of;
  auto emit = [&](auto&& self, const std::shared_ptr<const Expr::Node>& n) -> int {
    if (auto it = slot_of.find(n.get()); it != slot_of.end()) return it->second;
    Instr in{n->op};
    switch (n->op) {
      case Op::constant:
        in.value = n->value;
        break;
      case Op::variable:
        in.a = n->index;
        break;
      case Op::pow_int:
        in.a = self(self, n->args[0]);
        in.value = n->value;
        break;
      case Op::pow:
        in.a = self(self, n->args[0]);
        if (n->args[1]->op == Op::constant) {
          in.value = n->args[1]->value;
        } else {
          in.b = self(self, n->args[1]);
        }
        break;
      default:
        in.a = self(self, n->args[0]);
        if (n->args.size() > 1) in.b = self(self, n->args[1]);
        break;
    }
    code_.push_back(in);
    origin_.push_back(n);
    const int slot = static_cast<int>(code_.size()) - 1;
    slot_of.emplace(n.get(), slot);
    return slot;
  };
  emit(emit, root.ptr());
}

void Tape::fail(std::size_t slot, const char* what) const {
  std::ostringstream os;
  os << what << " in subexpression ";
  os.precision(17);
  render(os, *origin_[slot], names_);
  throw EvaluationError(os.str());
}

}  // namespace finsler
