#include "bg2phs/expr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "bg2phs/sampling.hpp"

namespace bg2phs {

namespace detail {

struct Node {
  ExprKind kind = ExprKind::Constant;
  Function fn = Function::Sin;
  int exponent = 0;
  std::size_t symbol = 0;
  std::string name;
  Rational value;
  std::vector<Expr> ops;
  std::size_t size = 1;
  std::uint64_t hash = 0;
};

}  // namespace detail

using detail::Node;

double to_double(const Rational& q) { return q.convert_to<double>(); }

// ---------------------------------------------------------------------------
// SymbolTable
// ---------------------------------------------------------------------------

std::size_t SymbolTable::add(Symbol s) {
  if (index_.count(s.name)) {
    throw Error(ErrorCode::DuplicateId, "symbol '" + s.name + "' declared twice");
  }
  const std::size_t id = symbols_.size();
  index_.emplace(s.name, id);
  symbols_.push_back(std::move(s));
  return id;
}

std::size_t SymbolTable::add_state(const std::string& name) {
  return add(Symbol{name, SymbolKind::State, std::nullopt});
}

std::size_t SymbolTable::add_parameter(const std::string& name,
                                       std::optional<double> value) {
  return add(Symbol{name, SymbolKind::Parameter, value});
}

std::optional<std::size_t> SymbolTable::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> SymbolTable::state_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < symbols_.size(); ++i)
    if (symbols_[i].kind == SymbolKind::State) ids.push_back(i);
  return ids;
}

std::vector<std::size_t> SymbolTable::parameter_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < symbols_.size(); ++i)
    if (symbols_[i].kind == SymbolKind::Parameter) ids.push_back(i);
  return ids;
}

std::size_t SymbolTable::state_count() const { return state_ids().size(); }

// ---------------------------------------------------------------------------
// Node construction
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kSizeCap = std::numeric_limits<std::size_t>::max() / 2;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t hash_rational(const Rational& q) {
  return std::hash<std::string>{}(q.str());
}

const char* kFunctionNames[] = {"sin", "cos", "exp", "ln", "sqrt", "tanh"};

}  // namespace

const char* function_name(Function f) {
  return kFunctionNames[static_cast<int>(f)];
}

std::optional<Function> function_from_name(std::string_view name) {
  for (int i = 0; i < 6; ++i)
    if (name == kFunctionNames[i]) return static_cast<Function>(i);
  return std::nullopt;
}

namespace {

std::shared_ptr<Node> new_node(ExprKind kind) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  return n;
}

void finish(Node& n) {
  std::uint64_t h = static_cast<std::uint64_t>(n.kind) * 1315423911ULL;
  std::size_t size = 1;
  switch (n.kind) {
    case ExprKind::Constant:
      h = mix(h, hash_rational(n.value));
      break;
    case ExprKind::Symbol:
      h = mix(h, n.symbol);
      break;
    case ExprKind::Power:
      h = mix(h, static_cast<std::uint64_t>(n.exponent + 1000003));
      break;
    case ExprKind::Function:
      h = mix(h, static_cast<std::uint64_t>(n.fn));
      break;
    default:
      break;
  }
  for (const Expr& op : n.ops) {
    h = mix(h, op.hash());
    size = std::min(kSizeCap, size + op.tree_size());
  }
  n.hash = h;
  n.size = size;
}

}  // namespace

Expr::Expr() : Expr(constant(Rational(0))) {}

Expr Expr::constant(const Rational& q) {
  auto n = new_node(ExprKind::Constant);
  n->value = q;
  finish(*n);
  return Expr(std::move(n));
}

Expr Expr::integer(long long v) { return constant(Rational(v)); }

Expr Expr::symbol(std::size_t id, const std::string& name) {
  auto n = new_node(ExprKind::Symbol);
  n->symbol = id;
  n->name = name;
  finish(*n);
  return Expr(std::move(n));
}

ExprKind Expr::kind() const { return node_->kind; }

bool Expr::is_zero_constant() const {
  return is_constant() && node_->value == 0;
}

bool Expr::is_one_constant() const {
  return is_constant() && node_->value == 1;
}

const Rational& Expr::constant_value() const { return node_->value; }
std::size_t Expr::symbol_id() const { return node_->symbol; }
const std::string& Expr::symbol_name() const { return node_->name; }
int Expr::exponent() const { return node_->exponent; }
Function Expr::function() const { return node_->fn; }
std::span<const Expr> Expr::operands() const { return node_->ops; }
std::size_t Expr::tree_size() const { return node_->size; }
std::uint64_t Expr::hash() const { return node_->hash; }

bool Expr::structurally_equal(const Expr& other) const {
  if (node_ == other.node_) return true;
  const Node& a = *node_;
  const Node& b = *other.node_;
  if (a.hash != b.hash || a.kind != b.kind || a.ops.size() != b.ops.size())
    return false;
  switch (a.kind) {
    case ExprKind::Constant:
      if (a.value != b.value) return false;
      break;
    case ExprKind::Symbol:
      if (a.symbol != b.symbol) return false;
      break;
    case ExprKind::Power:
      if (a.exponent != b.exponent) return false;
      break;
    case ExprKind::Function:
      if (a.fn != b.fn) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.ops.size(); ++i)
    if (!a.ops[i].structurally_equal(b.ops[i])) return false;
  return true;
}

Expr Expr::negate(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Constant:
      return constant(-e.constant_value());
    case ExprKind::Negate:
      return e.operands()[0];
    case ExprKind::Multiply:
      if (e.operands()[0].is_constant()) {
        std::vector<Expr> f(e.operands().begin(), e.operands().end());
        f[0] = constant(-f[0].constant_value());
        return product(std::move(f));
      }
      break;
    default:
      break;
  }
  auto n = new_node(ExprKind::Negate);
  n->ops.push_back(e);
  finish(*n);
  return Expr(std::move(n));
}

Expr Expr::sum(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  flat.reserve(terms.size());
  Rational c = 0;
  std::function<void(const Expr&)> push = [&](const Expr& t) {
    switch (t.kind()) {
      case ExprKind::Constant:
        c += t.constant_value();
        break;
      case ExprKind::Add:
        for (const Expr& s : t.operands()) push(s);
        break;
      default:
        flat.push_back(t);
    }
  };
  for (const Expr& t : terms) push(t);
  if (c != 0) flat.push_back(constant(c));
  if (flat.empty()) return Expr();
  if (flat.size() == 1) return flat.front();
  auto n = new_node(ExprKind::Add);
  n->ops = std::move(flat);
  finish(*n);
  return Expr(std::move(n));
}

Expr Expr::product(std::vector<Expr> factors) {
  std::vector<Expr> rest;
  rest.reserve(factors.size());
  Rational c = 1;
  std::function<void(const Expr&)> push = [&](const Expr& f) {
    switch (f.kind()) {
      case ExprKind::Constant:
        c *= f.constant_value();
        break;
      case ExprKind::Negate:
        c = -c;
        push(f.operands()[0]);
        break;
      case ExprKind::Multiply:
        for (const Expr& g : f.operands()) push(g);
        break;
      default:
        rest.push_back(f);
    }
  };
  for (const Expr& f : factors) push(f);
  if (c == 0) return Expr();
  // Repeated bases collapse into one power.
  std::vector<std::pair<Expr, int>> powers;
  for (const Expr& f : rest) {
    const bool is_pow = f.kind() == ExprKind::Power;
    const Expr& base = is_pow ? f.operands()[0] : f;
    const int e = is_pow ? f.exponent() : 1;
    auto it = std::find_if(powers.begin(), powers.end(),
                           [&](const auto& p) { return p.first.structurally_equal(base); });
    if (it == powers.end()) powers.emplace_back(base, e);
    else it->second += e;
  }
  if (powers.size() < rest.size()) {
    std::vector<Expr> merged{constant(c)};
    for (const auto& [base, e] : powers)
      if (e != 0) merged.push_back(power(base, e));
    return product(std::move(merged));
  }
  if (rest.empty()) return constant(c);
  Expr core;
  if (rest.size() == 1 && (c == 1 || c == -1)) {
    core = rest.front();
  } else if (c == 1 || c == -1) {
    auto n = new_node(ExprKind::Multiply);
    n->ops = std::move(rest);
    finish(*n);
    core = Expr(std::move(n));
  } else {
    auto n = new_node(ExprKind::Multiply);
    n->ops.reserve(rest.size() + 1);
    n->ops.push_back(constant(c));
    for (Expr& r : rest) n->ops.push_back(std::move(r));
    finish(*n);
    return Expr(std::move(n));
  }
  if (c == 1) return core;
  auto n = new_node(ExprKind::Negate);
  n->ops.push_back(core);
  finish(*n);
  return Expr(std::move(n));
}

Expr Expr::quotient(const Expr& num, const Expr& den) {
  if (den.is_constant()) {
    if (den.constant_value() == 0)
      throw Error(ErrorCode::DivisionByZero, "division by the constant 0");
    return product({constant(1 / den.constant_value()), num});
  }
  if (num.is_zero_constant()) return Expr();
  if (num.is_constant() && num.constant_value() != 1)
    return product({num, quotient(integer(1), den)});
  if (den.kind() == ExprKind::Negate)
    return negate(quotient(num, den.operands()[0]));
  if (num.kind() == ExprKind::Negate)
    return negate(quotient(num.operands()[0], den));
  if (num.kind() == ExprKind::Multiply && num.operands()[0].is_constant()) {
    std::vector<Expr> rest(num.operands().begin() + 1, num.operands().end());
    return product({num.operands()[0], quotient(product(std::move(rest)), den)});
  }
  auto n = new_node(ExprKind::Divide);
  n->ops = {num, den};
  finish(*n);
  return Expr(std::move(n));
}

namespace {

Rational rational_pow(const Rational& q, int e) {
  if (e < 0) {
    if (q == 0) throw Error(ErrorCode::DivisionByZero, "0 raised to a negative power");
    return rational_pow(1 / q, -e);
  }
  Rational r = 1;
  Rational b = q;
  unsigned u = static_cast<unsigned>(e);
  while (u) {
    if (u & 1u) r *= b;
    b *= b;
    u >>= 1;
  }
  return r;
}

std::optional<Rational> exact_sqrt(const Rational& q) {
  if (q < 0) return std::nullopt;
  using boost::multiprecision::cpp_int;
  const cpp_int num = boost::multiprecision::numerator(q);
  const cpp_int den = boost::multiprecision::denominator(q);
  const cpp_int rn = boost::multiprecision::sqrt(num);
  const cpp_int rd = boost::multiprecision::sqrt(den);
  if (rn * rn != num || rd * rd != den) return std::nullopt;
  return Rational(rn, rd);
}

}  // namespace

Expr Expr::power(const Expr& base, int exponent) {
  if (exponent == 0) return integer(1);
  if (exponent == 1) return base;
  switch (base.kind()) {
    case ExprKind::Constant:
      return constant(rational_pow(base.constant_value(), exponent));
    case ExprKind::Power: {
      const long long e = static_cast<long long>(base.exponent()) * exponent;
      if (e > std::numeric_limits<int>::max() || e < std::numeric_limits<int>::min())
        throw Error(ErrorCode::InvalidArgument, "exponent overflow");
      return power(base.operands()[0], static_cast<int>(e));
    }
    case ExprKind::Negate: {
      Expr p = power(base.operands()[0], exponent);
      return exponent % 2 == 0 ? p : negate(p);
    }
    case ExprKind::Divide:
      if (exponent > 0 && base.operands()[0].is_constant())
        return quotient(power(base.operands()[0], exponent), power(base.operands()[1], exponent));
      break;
    default:
      break;
  }
  auto n = new_node(ExprKind::Power);
  n->exponent = exponent;
  n->ops.push_back(base);
  finish(*n);
  return Expr(std::move(n));
}

Expr Expr::apply(Function f, const Expr& arg) {
  if (arg.is_constant()) {
    const Rational& q = arg.constant_value();
    switch (f) {
      case Function::Sin:
      case Function::Tanh:
        if (q == 0) return Expr();
        break;
      case Function::Cos:
      case Function::Exp:
        if (q == 0) return integer(1);
        break;
      case Function::Ln:
        if (q == 1) return Expr();
        break;
      case Function::Sqrt:
        if (auto r = exact_sqrt(q)) return constant(*r);
        break;
    }
  }
  auto n = new_node(ExprKind::Function);
  n->fn = f;
  n->ops.push_back(arg);
  finish(*n);
  return Expr(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) {
  return Expr::sum({a, Expr::negate(b)});
}
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::quotient(a, b); }
Expr operator-(const Expr& a) { return Expr::negate(a); }

Expr pow(const Expr& base, int exponent) { return Expr::power(base, exponent); }
Expr sin(const Expr& e) { return Expr::apply(Function::Sin, e); }
Expr cos(const Expr& e) { return Expr::apply(Function::Cos, e); }
Expr exp(const Expr& e) { return Expr::apply(Function::Exp, e); }
Expr ln(const Expr& e) { return Expr::apply(Function::Ln, e); }
Expr sqrt(const Expr& e) { return Expr::apply(Function::Sqrt, e); }
Expr tanh(const Expr& e) { return Expr::apply(Function::Tanh, e); }

// ---------------------------------------------------------------------------
// Structural utilities
// ---------------------------------------------------------------------------

Expr normalize(const Expr& e) {
  std::unordered_map<const void*, Expr> memo;
  std::function<Expr(const Expr&)> rec = [&](const Expr& x) -> Expr {
    auto it = memo.find(x.identity());
    if (it != memo.end()) return it->second;
    std::vector<Expr> ops;
    for (const Expr& o : x.operands()) ops.push_back(rec(o));
    Expr r;
    switch (x.kind()) {
      case ExprKind::Constant:
      case ExprKind::Symbol:
        r = x;
        break;
      case ExprKind::Negate:
        r = Expr::negate(ops[0]);
        break;
      case ExprKind::Add:
        r = Expr::sum(std::move(ops));
        break;
      case ExprKind::Multiply:
        r = Expr::product(std::move(ops));
        break;
      case ExprKind::Divide:
        r = Expr::quotient(ops[0], ops[1]);
        break;
      case ExprKind::Power:
        r = Expr::power(ops[0], x.exponent());
        break;
      case ExprKind::Function:
        r = Expr::apply(x.function(), ops[0]);
        break;
    }
    memo.emplace(x.identity(), r);
    return r;
  };
  return rec(e);
}

std::vector<std::size_t> free_symbols(const Expr& e) {
  std::unordered_set<const void*> seen;
  std::vector<std::size_t> ids;
  std::function<void(const Expr&)> rec = [&](const Expr& x) {
    if (!seen.insert(x.identity()).second) return;
    if (x.kind() == ExprKind::Symbol) ids.push_back(x.symbol_id());
    for (const Expr& o : x.operands()) rec(o);
  };
  rec(e);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

std::string rational_str(const Rational& q) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (denominator(q) == 1) return numerator(q).str();
  return numerator(q).str() + "/" + denominator(q).str();
}

bool is_negative_term(const Expr& t) {
  switch (t.kind()) {
    case ExprKind::Constant:
      return t.constant_value() < 0;
    case ExprKind::Negate:
      return true;
    case ExprKind::Multiply:
      return t.operands()[0].is_constant() && t.operands()[0].constant_value() < 0;
    default:
      return false;
  }
}

bool is_atom(const Expr& e) {
  return e.kind() == ExprKind::Symbol || e.kind() == ExprKind::Function ||
         (e.is_constant() && e.constant_value() >= 0 &&
          boost::multiprecision::denominator(e.constant_value()) == 1);
}

void print(const Expr& e, std::string& out);

void print_paren(const Expr& e, std::string& out, bool paren) {
  if (paren) out += '(';
  print(e, out);
  if (paren) out += ')';
}

void print(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case ExprKind::Constant:
      out += rational_str(e.constant_value());
      return;
    case ExprKind::Symbol:
      out += e.symbol_name();
      return;
    case ExprKind::Negate: {
      const Expr& a = e.operands()[0];
      out += '-';
      print_paren(a, out, !is_atom(a));
      return;
    }
    case ExprKind::Add: {
      bool first = true;
      for (const Expr& t : e.operands()) {
        if (first) {
          print(t, out);
          first = false;
          continue;
        }
        if (is_negative_term(t)) {
          out += " - ";
          const Expr a = Expr::negate(t);
          print_paren(a, out, a.kind() == ExprKind::Add);
        } else {
          out += " + ";
          print(t, out);
        }
      }
      return;
    }
    case ExprKind::Multiply: {
      const auto ops = e.operands();
      for (std::size_t i = 0; i < ops.size(); ++i) {
        if (i) out += '*';
        const Expr& f = ops[i];
        bool paren = false;
        if (f.kind() == ExprKind::Add) paren = true;
        if (f.kind() == ExprKind::Divide) {
          const bool only_coefficient_before =
              i == ops.size() - 1 && i == 1 && ops[0].is_constant();
          paren = !only_coefficient_before;
        }
        print_paren(f, out, paren);
      }
      return;
    }
    case ExprKind::Divide: {
      const Expr& num = e.operands()[0];
      const Expr& den = e.operands()[1];
      print_paren(num, out, num.kind() == ExprKind::Add);
      out += '/';
      const bool den_bare = den.kind() == ExprKind::Symbol ||
                            den.kind() == ExprKind::Function ||
                            den.kind() == ExprKind::Power;
      print_paren(den, out, !den_bare);
      return;
    }
    case ExprKind::Power: {
      const Expr& b = e.operands()[0];
      const bool bare = b.kind() == ExprKind::Symbol || b.kind() == ExprKind::Function;
      print_paren(b, out, !bare);
      out += '^';
      out += std::to_string(e.exponent());
      return;
    }
    case ExprKind::Function:
      out += function_name(e.function());
      out += '(';
      print(e.operands()[0], out);
      out += ')';
      return;
  }
}

}  // namespace

std::string Expr::str() const {
  std::string out;
  print(*this, out);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

Expr diff_expr(const Expr& e, std::size_t symbol) {
  std::unordered_map<const void*, Expr> memo;
  std::function<Expr(const Expr&)> d = [&](const Expr& x) -> Expr {
    auto it = memo.find(x.identity());
    if (it != memo.end()) return it->second;
    Expr r;
    const auto ops = x.operands();
    switch (x.kind()) {
      case ExprKind::Constant:
        r = Expr();
        break;
      case ExprKind::Symbol:
        r = Expr::integer(x.symbol_id() == symbol ? 1 : 0);
        break;
      case ExprKind::Negate:
        r = -d(ops[0]);
        break;
      case ExprKind::Add: {
        std::vector<Expr> terms;
        for (const Expr& t : ops) terms.push_back(d(t));
        r = Expr::sum(std::move(terms));
        break;
      }
      case ExprKind::Multiply: {
        std::vector<Expr> terms;
        for (std::size_t i = 0; i < ops.size(); ++i) {
          Expr di = d(ops[i]);
          if (di.is_zero_constant()) continue;
          std::vector<Expr> f;
          for (std::size_t j = 0; j < ops.size(); ++j) f.push_back(j == i ? di : ops[j]);
          terms.push_back(Expr::product(std::move(f)));
        }
        r = Expr::sum(std::move(terms));
        break;
      }
      case ExprKind::Divide: {
        const Expr& a = ops[0];
        const Expr& b = ops[1];
        Expr da = d(a);
        Expr db = d(b);
        if (db.is_zero_constant()) {
          r = da / b;
        } else {
          r = (da * b - a * db) / pow(b, 2);
        }
        break;
      }
      case ExprKind::Power: {
        const int n = x.exponent();
        r = Expr::product({Expr::integer(n), pow(ops[0], n - 1), d(ops[0])});
        break;
      }
      case ExprKind::Function: {
        const Expr& a = ops[0];
        Expr da = d(a);
        if (da.is_zero_constant()) {
          r = Expr();
          break;
        }
        switch (x.function()) {
          case Function::Sin:
            r = cos(a) * da;
            break;
          case Function::Cos:
            r = -(sin(a) * da);
            break;
          case Function::Exp:
            r = x * da;
            break;
          case Function::Ln:
            r = da / a;
            break;
          case Function::Sqrt:
            r = da / (Expr::integer(2) * x);
            break;
          case Function::Tanh:
            r = (Expr::integer(1) - pow(x, 2)) * da;
            break;
        }
        break;
      }
    }
    memo.emplace(x.identity(), r);
    return r;
  };
  return d(e);
}

// ---------------------------------------------------------------------------
// Program
// ---------------------------------------------------------------------------

Program::Program(std::span<const Expr> roots) {
  std::unordered_map<const void*, std::uint32_t> slot;
  std::function<std::uint32_t(const Expr&)> emit = [&](const Expr& x) -> std::uint32_t {
    auto it = slot.find(x.identity());
    if (it != slot.end()) return it->second;
    std::vector<std::uint32_t> children;
    for (const Expr& o : x.operands()) children.push_back(emit(o));
    Instr ins;
    ins.kind = x.kind();
    switch (x.kind()) {
      case ExprKind::Constant:
        ins.constant = to_double(x.constant_value());
        break;
      case ExprKind::Symbol:
        ins.symbol = x.symbol_id();
        break;
      case ExprKind::Power:
        ins.exponent = x.exponent();
        break;
      case ExprKind::Function:
        ins.fn = x.function();
        break;
      default:
        break;
    }
    ins.first = static_cast<std::uint32_t>(args_.size());
    ins.count = static_cast<std::uint32_t>(children.size());
    args_.insert(args_.end(), children.begin(), children.end());
    const auto id = static_cast<std::uint32_t>(code_.size());
    code_.push_back(ins);
    slot.emplace(x.identity(), id);
    return id;
  };
  for (const Expr& r : roots) roots_.push_back(emit(r));
}

namespace {

[[noreturn]] void domain_fail(const char* what) {
  throw EvalError(ErrorCode::DomainError, what);
}

double apply_function(Function f, double a) {
  switch (f) {
    case Function::Sin:
      return std::sin(a);
    case Function::Cos:
      return std::cos(a);
    case Function::Exp:
      return std::exp(a);
    case Function::Ln:
      if (!(a > 0)) domain_fail("ln of a non-positive value");
      return std::log(a);
    case Function::Sqrt:
      if (a < 0) domain_fail("sqrt of a negative value");
      return std::sqrt(a);
    case Function::Tanh:
      return std::tanh(a);
  }
  return 0.0;
}

}  // namespace

void Program::run(std::span<const double> point, std::span<double> out) const {
  scratch_.resize(code_.size());
  double* v = scratch_.data();
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    const std::uint32_t* a = args_.data() + ins.first;
    double r = 0.0;
    switch (ins.kind) {
      case ExprKind::Constant:
        r = ins.constant;
        break;
      case ExprKind::Symbol:
        if (ins.symbol >= point.size())
          throw Error(ErrorCode::InvalidArgument, "evaluation point lacks a symbol value");
        r = point[ins.symbol];
        break;
      case ExprKind::Negate:
        r = -v[a[0]];
        break;
      case ExprKind::Add:
        for (std::uint32_t k = 0; k < ins.count; ++k) r += v[a[k]];
        break;
      case ExprKind::Multiply:
        r = 1.0;
        for (std::uint32_t k = 0; k < ins.count; ++k) r *= v[a[k]];
        break;
      case ExprKind::Divide:
        if (v[a[1]] == 0.0) throw EvalError(ErrorCode::DivisionByZero, "division by zero");
        r = v[a[0]] / v[a[1]];
        break;
      case ExprKind::Power:
        if (v[a[0]] == 0.0 && ins.exponent < 0)
          throw EvalError(ErrorCode::DivisionByZero, "division by zero (negative power of 0)");
        r = std::pow(v[a[0]], ins.exponent);
        break;
      case ExprKind::Function:
        r = apply_function(ins.fn, v[a[0]]);
        break;
    }
    if (!std::isfinite(r)) domain_fail("non-finite intermediate value");
    v[i] = r;
  }
  for (std::size_t k = 0; k < roots_.size(); ++k) out[k] = v[roots_[k]];
}

std::vector<double> Program::run(std::span<const double> point) const {
  std::vector<double> out(roots_.size());
  run(point, out);
  return out;
}

void Program::run_with_magnitude(std::span<const double> point, std::span<double> out,
                                 std::span<double> magnitude) const {
  run(point, out);
  scratch_mag_.resize(code_.size());
  const double* v = scratch_.data();
  double* m = scratch_mag_.data();
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    const std::uint32_t* a = args_.data() + ins.first;
    double r = 0.0;
    switch (ins.kind) {
      case ExprKind::Add:
        for (std::uint32_t k = 0; k < ins.count; ++k) r += m[a[k]];
        break;
      case ExprKind::Multiply:
        r = 1.0;
        for (std::uint32_t k = 0; k < ins.count; ++k) r *= m[a[k]];
        break;
      case ExprKind::Negate:
        r = m[a[0]];
        break;
      case ExprKind::Divide:
        r = m[a[0]] / std::abs(v[a[1]]);
        break;
      case ExprKind::Power:
        r = ins.exponent > 0 ? std::pow(m[a[0]], ins.exponent) : std::abs(v[i]);
        break;
      default:
        r = std::abs(v[i]);
    }
    m[i] = r;
  }
  for (std::size_t k = 0; k < roots_.size(); ++k) magnitude[k] = m[roots_[k]];
}

double eval_expr(const Expr& e, std::span<const double> point) {
  Program p(std::span<const Expr>(&e, 1));
  double out = 0.0;
  p.run(point, std::span<double>(&out, 1));
  return out;
}

std::optional<Rational> eval_exact(const Expr& e, std::span<const Rational> point) {
  std::unordered_map<const void*, std::optional<Rational>> memo;
  auto go = [&](auto& self, const Expr& x) -> std::optional<Rational> {
    if (auto it = memo.find(x.identity()); it != memo.end()) return it->second;
    std::optional<Rational> out;
    const auto ops = x.operands();
    switch (x.kind()) {
      case ExprKind::Constant:
        out = x.constant_value();
        break;
      case ExprKind::Symbol:
        if (x.symbol_id() < point.size()) out = point[x.symbol_id()];
        break;
      case ExprKind::Negate:
        if (auto a = self(self, ops[0])) out = -*a;
        break;
      case ExprKind::Add: {
        Rational acc = 0;
        bool ok = true;
        for (const Expr& o : ops) {
          auto a = self(self, o);
          if (!a) {
            ok = false;
            break;
          }
          acc += *a;
        }
        if (ok) out = acc;
        break;
      }
      case ExprKind::Multiply: {
        Rational acc = 1;
        bool ok = true;
        for (const Expr& o : ops) {
          auto a = self(self, o);
          if (!a) {
            ok = false;
            break;
          }
          acc *= *a;
        }
        if (ok) out = acc;
        break;
      }
      case ExprKind::Divide: {
        auto a = self(self, ops[0]);
        auto b = self(self, ops[1]);
        if (a && b && *b != 0) out = *a / *b;
        break;
      }
      case ExprKind::Power: {
        auto a = self(self, ops[0]);
        const int k = x.exponent();
        if (!a || (k < 0 && *a == 0)) break;
        Rational acc = 1;
        for (int i = 0; i < std::abs(k); ++i) acc *= *a;
        out = k < 0 ? Rational(1) / acc : acc;
        break;
      }
      case ExprKind::Function:
        break;
    }
    memo.emplace(x.identity(), out);
    return out;
  };
  return go(go, e);
}

bool is_zero(const Expr& e, const SymbolTable& symbols, int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "is_zero needs at least one trial");
  if (e.is_constant()) return e.constant_value() == 0;
  Program p(std::span<const Expr>(&e, 1));
  Sampler sampler(symbols, seed);
  for (int t = 0; t < trials; ++t) {
    const double v = sampler.evaluate_valid(p)[0];
    if (std::abs(v) > 1e-10) return false;
  }
  return true;
}

}  // namespace bg2phs
