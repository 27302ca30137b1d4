#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bg2phs/expr.hpp"
#include "bg2phs/symmat.hpp"

namespace bg2phs {

enum class ElementKind : std::uint8_t { C, R, Sf, Se, Zero, One, TF, GY };

const char* kind_name(ElementKind k);  // "C", "R", "Sf", "Se", "0", "1", "TF", "GY"
std::optional<ElementKind> kind_from_name(std::string_view name);
bool is_exterior(ElementKind k);

struct Element {
  std::string id;
  ElementKind kind = ElementKind::Zero;
  Expr hamiltonian;                 // C only
  SymMatrix matrix;                 // R: D, TF: U, GY: V
  std::vector<std::size_t> states;  // symbol ids owned by a C element
};

struct Bond {
  long long id = 0;
  std::size_t tail = 0;  // element index
  std::size_t head = 0;
};

struct Parameter {
  std::string name;
  std::optional<double> value;
};

struct Partition {
  std::vector<std::size_t> exterior_elements;
  std::vector<std::size_t> interior_elements;
  std::vector<std::size_t> exterior_bonds;
  std::vector<std::size_t> interior_bonds;
};

struct ValidationOptions {
  std::uint64_t seed = 0;
  int trials = 20;
};

/// Unvalidated description, as read from or written to the JSON format.
struct ElementSpec {
  std::string id;
  ElementKind kind = ElementKind::Zero;
  std::optional<std::string> hamiltonian;
  std::optional<std::vector<std::vector<std::string>>> matrix;
};

struct BondSpec {
  long long id = 0;
  std::string tail;
  std::string head;
};

struct GraphSpec {
  long long dimension = 1;
  std::vector<Parameter> parameters;
  std::vector<ElementSpec> elements;
  std::vector<BondSpec> bonds;
};

/// Validated multi-bond graph. Element and bond vectors keep declaration
/// order, which fixes every derived ordering downstream.
class BondGraph {
 public:
  std::size_t dimension() const { return dimension_; }
  const SymbolTable& symbols() const { return symbols_; }
  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<Parameter>& parameters() const { return parameters_; }
  const Partition& partition() const { return partition_; }

  const Element& element(std::size_t index) const { return elements_.at(index); }
  std::optional<std::size_t> find_element(std::string_view id) const;
  std::optional<std::size_t> find_bond(long long id) const;

  /// Bond indices incident to an element, declaration order.
  const std::vector<std::size_t>& incident(std::size_t element) const { return incident_.at(element); }

  /// For an exterior bond, the index of its exterior endpoint.
  std::size_t exterior_end(std::size_t bond) const;
  /// For an exterior bond, the index of its interior endpoint.
  std::size_t interior_end(std::size_t bond) const;
  bool is_interior_bond(std::size_t bond) const;

  std::vector<std::size_t> elements_of_kind(ElementKind k) const;

  /// Sum of the per-storage Hamiltonian summands.
  Expr hamiltonian() const;
  /// State symbol ids in storage declaration order.
  std::vector<std::size_t> state_ids() const;

  friend BondGraph build_bondgraph(const GraphSpec& spec, const ValidationOptions& options);

 private:
  std::size_t dimension_ = 1;
  SymbolTable symbols_;
  std::vector<Parameter> parameters_;
  std::vector<Element> elements_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<std::size_t>> incident_;
  Partition partition_;
};

/// Reads the JSON graph format without semantic validation.
GraphSpec parse_graph_spec(std::string_view json_text);
std::string graph_spec_to_json(const GraphSpec& spec);

/// Validates a description. Throws Error with a distinct code per violated
/// rule; messages name the offending element or bond.
BondGraph build_bondgraph(const GraphSpec& spec, const ValidationOptions& options = {});

BondGraph parse_bondgraph(std::string_view json_text, const ValidationOptions& options = {});

/// Description of a validated graph; payloads are printed from their
/// expressions, so parse(serialize(g)) reproduces g.
GraphSpec to_spec(const BondGraph& bg);
std::string serialize_bondgraph(const BondGraph& bg);

/// State symbol name for component k (0-based) of storage `id`.
std::string state_name(const std::string& id, std::size_t k);

}  // namespace bg2phs
