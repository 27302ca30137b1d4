#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bg2phs/error.hpp"

namespace bg2phs {

using Rational = boost::multiprecision::cpp_rational;

double to_double(const Rational& q);

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

enum class SymbolKind : std::uint8_t { State, Parameter };

struct Symbol {
  std::string name;
  SymbolKind kind = SymbolKind::State;
  std::optional<double> value;  // bound numeric value, parameters only
};

/// Ordered symbol registry. Ids are positions and never change once assigned,
/// so evaluation points are plain vectors indexed by symbol id.
class SymbolTable {
 public:
  std::size_t add_state(const std::string& name);
  std::size_t add_parameter(const std::string& name,
                            std::optional<double> value = std::nullopt);

  std::optional<std::size_t> find(std::string_view name) const;
  const Symbol& operator[](std::size_t id) const { return symbols_.at(id); }
  std::size_t size() const { return symbols_.size(); }

  std::vector<std::size_t> state_ids() const;
  std::vector<std::size_t> parameter_ids() const;
  std::size_t state_count() const;

 private:
  std::size_t add(Symbol s);

  std::vector<Symbol> symbols_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class ExprKind : std::uint8_t {
  Constant,
  Symbol,
  Negate,
  Add,
  Multiply,
  Divide,
  Power,
  Function,
};

enum class Function : std::uint8_t { Sin, Cos, Exp, Ln, Sqrt, Tanh };

const char* function_name(Function f);
std::optional<Function> function_from_name(std::string_view name);

namespace detail {
struct Node;
}

/// Immutable scalar expression. Nodes are shared, so an Expr is a DAG and
/// copying is cheap. All constructors normalize: constants fold exactly,
/// additive/multiplicative identities vanish, double negation cancels and
/// associative chains are flattened.
class Expr {
 public:
  Expr();  // the constant 0

  static Expr constant(const Rational& q);
  static Expr integer(long long v);
  static Expr symbol(std::size_t id, const std::string& name);

  static Expr sum(std::vector<Expr> terms);
  static Expr product(std::vector<Expr> factors);
  static Expr quotient(const Expr& num, const Expr& den);
  static Expr power(const Expr& base, int exponent);
  static Expr apply(Function f, const Expr& arg);
  static Expr negate(const Expr& e);

  ExprKind kind() const;
  bool is_constant() const { return kind() == ExprKind::Constant; }
  bool is_zero_constant() const;
  bool is_one_constant() const;
  const Rational& constant_value() const;  // Constant only
  std::size_t symbol_id() const;           // Symbol only
  const std::string& symbol_name() const;  // Symbol only
  int exponent() const;                    // Power only
  Function function() const;               // Function only
  std::span<const Expr> operands() const;

  /// Size of the unfolded tree, saturating at SIZE_MAX / 2.
  std::size_t tree_size() const;
  std::uint64_t hash() const;
  const void* identity() const { return node_.get(); }

  bool structurally_equal(const Expr& other) const;

  /// Infix text in the grammar accepted by parse_expr; reparsing yields a
  /// structurally equal expression.
  std::string str() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);

 private:
  explicit Expr(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}
  const detail::Node& node() const { return *node_; }

  std::shared_ptr<const detail::Node> node_;
};

Expr pow(const Expr& base, int exponent);
Expr sin(const Expr& e);
Expr cos(const Expr& e);
Expr exp(const Expr& e);
Expr ln(const Expr& e);
Expr sqrt(const Expr& e);
Expr tanh(const Expr& e);

/// Rebuilds e bottom-up through the normalizing constructors.
Expr normalize(const Expr& e);

/// Ids of all symbols occurring in e, ascending.
std::vector<std::size_t> free_symbols(const Expr& e);

/// Parses text per the expression grammar. Throws Error(Syntax) carrying the
/// byte offset, or Error(UnknownSymbol) naming the symbol.
Expr parse_expr(std::string_view text, const SymbolTable& symbols);

/// Recursive IEEE evaluation; point is indexed by symbol id.
double eval_expr(const Expr& e, std::span<const double> point);

/// Exact evaluation at a rational point. Empty when e contains a function
/// call or divides by zero there.
std::optional<Rational> eval_exact(const Expr& e, std::span<const Rational> point);

/// Symbolic partial derivative with respect to symbol id.
Expr diff_expr(const Expr& e, std::size_t symbol);

/// Probabilistic zero test: |e| <= 1e-10 at `trials` random points.
bool is_zero(const Expr& e, const SymbolTable& symbols, int trials,
             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Compiled evaluation
// ---------------------------------------------------------------------------

/// Straight-line program evaluating several expressions at once. Shared
/// subexpressions are computed a single time, which keeps evaluation linear
/// in the DAG size.
class Program {
 public:
  Program() = default;
  explicit Program(std::span<const Expr> roots);

  std::size_t root_count() const { return roots_.size(); }

  /// Throws EvalError on division by zero or a domain violation.
  void run(std::span<const double> point, std::span<double> out) const;
  std::vector<double> run(std::span<const double> point) const;

  /// Also produces, per root, the value obtained when every sum is replaced
  /// by the sum of magnitudes. Used as the scale for cancellation tests.
  void run_with_magnitude(std::span<const double> point, std::span<double> out,
                          std::span<double> magnitude) const;

 private:
  struct Instr {
    ExprKind kind;
    Function fn = Function::Sin;
    int exponent = 0;
    double constant = 0.0;
    std::size_t symbol = 0;
    std::uint32_t first = 0;  // index into args_
    std::uint32_t count = 0;
  };
  std::vector<Instr> code_;
  std::vector<std::uint32_t> args_;
  std::vector<std::uint32_t> roots_;
  mutable std::vector<double> scratch_;
  mutable std::vector<double> scratch_mag_;
};

}  // namespace bg2phs
