#include "bg2phs/bondgraph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

#include <json.hpp>

namespace bg2phs {

using json = nlohmann::ordered_json;

namespace {

const char* kKindNames[] = {"C", "R", "Sf", "Se", "0", "1", "TF", "GY"};

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

bool is_id_tail(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

}  // namespace

const char* kind_name(ElementKind k) { return kKindNames[static_cast<int>(k)]; }

std::optional<ElementKind> kind_from_name(std::string_view name) {
  for (int i = 0; i < 8; ++i)
    if (name == kKindNames[i]) return static_cast<ElementKind>(i);
  if (name == "Zero") return ElementKind::Zero;
  if (name == "One") return ElementKind::One;
  return std::nullopt;
}

bool is_exterior(ElementKind k) {
  return k == ElementKind::C || k == ElementKind::R || k == ElementKind::Sf || k == ElementKind::Se;
}

std::string state_name(const std::string& id, std::size_t k) {
  return "x_" + id + "_" + std::to_string(k + 1);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

GraphSpec parse_graph_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Json, std::string("malformed JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) fail(ErrorCode::Json, "top level must be an object");
    GraphSpec spec;
    if (!doc.contains("dimension") || !doc["dimension"].is_number_integer())
      fail(ErrorCode::Json, "'dimension' must be an integer");
    spec.dimension = doc["dimension"].get<long long>();
    if (doc.contains("parameters")) {
      for (const auto& p : doc.at("parameters")) {
        if (!p.is_object() || !p.contains("name") || !p["name"].is_string())
          fail(ErrorCode::Json, "every parameter needs a string 'name'");
        Parameter par{p["name"].get<std::string>(), std::nullopt};
        if (p.contains("value") && !p["value"].is_null()) {
          if (!p["value"].is_number())
            fail(ErrorCode::Json, "parameter '" + par.name + "' has a non-numeric value");
          par.value = p["value"].get<double>();
        }
        spec.parameters.push_back(std::move(par));
      }
    }
    if (!doc.contains("elements") || !doc["elements"].is_array())
      fail(ErrorCode::Json, "'elements' must be an array");
    for (const auto& e : doc["elements"]) {
      if (!e.is_object() || !e.contains("id") || !e["id"].is_string())
        fail(ErrorCode::Json, "every element needs a string 'id'");
      ElementSpec es;
      es.id = e["id"].get<std::string>();
      if (!e.contains("kind") || !e["kind"].is_string())
        fail(ErrorCode::Json, "element '" + es.id + "' needs a string 'kind'");
      auto k = kind_from_name(e["kind"].get<std::string>());
      if (!k) fail(ErrorCode::Json, "element '" + es.id + "' has unknown kind '" + e["kind"].get<std::string>() + "'");
      es.kind = *k;
      if (e.contains("hamiltonian")) {
        if (!e["hamiltonian"].is_string())
          fail(ErrorCode::Json, "element '" + es.id + "': 'hamiltonian' must be a string");
        es.hamiltonian = e["hamiltonian"].get<std::string>();
      }
      if (e.contains("matrix")) {
        std::vector<std::vector<std::string>> rows;
        if (!e["matrix"].is_array())
          fail(ErrorCode::Json, "element '" + es.id + "': 'matrix' must be an array of rows");
        for (const auto& row : e["matrix"]) {
          if (!row.is_array()) fail(ErrorCode::Json, "element '" + es.id + "': matrix rows must be arrays");
          std::vector<std::string> r;
          for (const auto& cell : row) {
            if (cell.is_string()) {
              r.push_back(cell.get<std::string>());
            } else if (cell.is_number_integer()) {
              r.push_back(std::to_string(cell.get<long long>()));
            } else {
              fail(ErrorCode::Json, "element '" + es.id + "': matrix entries must be expression strings");
            }
          }
          rows.push_back(std::move(r));
        }
        es.matrix = std::move(rows);
      }
      spec.elements.push_back(std::move(es));
    }
    if (!doc.contains("bonds") || !doc["bonds"].is_array())
      fail(ErrorCode::Json, "'bonds' must be an array");
    for (const auto& b : doc["bonds"]) {
      if (!b.is_object() || !b.contains("id") || !b["id"].is_number_integer())
        fail(ErrorCode::Json, "every bond needs an integer 'id'");
      BondSpec bs;
      bs.id = b["id"].get<long long>();
      if (!b.contains("tail") || !b["tail"].is_string() || !b.contains("head") || !b["head"].is_string())
        fail(ErrorCode::Json, "bond " + std::to_string(bs.id) + " needs string 'tail' and 'head'");
      bs.tail = b["tail"].get<std::string>();
      bs.head = b["head"].get<std::string>();
      spec.bonds.push_back(std::move(bs));
    }
    return spec;
  } catch (const json::exception& e) {
    fail(ErrorCode::Json, std::string("invalid graph document: ") + e.what());
  }
}

std::string graph_spec_to_json(const GraphSpec& spec) {
  json doc;
  doc["dimension"] = spec.dimension;
  json params = json::array();
  for (const Parameter& p : spec.parameters) {
    json j;
    j["name"] = p.name;
    if (p.value) j["value"] = *p.value;
    params.push_back(std::move(j));
  }
  doc["parameters"] = std::move(params);
  json elems = json::array();
  for (const ElementSpec& e : spec.elements) {
    json j;
    j["id"] = e.id;
    j["kind"] = kind_name(e.kind);
    if (e.hamiltonian) j["hamiltonian"] = *e.hamiltonian;
    if (e.matrix) j["matrix"] = *e.matrix;
    elems.push_back(std::move(j));
  }
  doc["elements"] = std::move(elems);
  json bonds = json::array();
  for (const BondSpec& b : spec.bonds) {
    json j;
    j["id"] = b.id;
    j["tail"] = b.tail;
    j["head"] = b.head;
    bonds.push_back(std::move(j));
  }
  doc["bonds"] = std::move(bonds);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

BondGraph build_bondgraph(const GraphSpec& spec, const ValidationOptions& options) {
  BondGraph g;
  if (spec.dimension < 1 || spec.dimension > 64)
    fail(ErrorCode::Payload, "dimension must be between 1 and 64, got " + std::to_string(spec.dimension));
  const auto n = static_cast<std::size_t>(spec.dimension);
  g.dimension_ = n;
  if (spec.elements.empty()) fail(ErrorCode::Payload, "graph has no elements");

  // Elements and state symbols.
  std::unordered_map<std::string, std::size_t> by_id;
  for (const ElementSpec& es : spec.elements) {
    if (es.id.empty()) fail(ErrorCode::Payload, "element with empty id");
    if (!by_id.emplace(es.id, g.elements_.size()).second)
      fail(ErrorCode::DuplicateId, "element id '" + es.id + "' declared twice");
    Element el;
    el.id = es.id;
    el.kind = es.kind;
    g.elements_.push_back(std::move(el));
  }
  for (Element& el : g.elements_) {
    if (el.kind != ElementKind::C) continue;
    if (!is_id_tail(el.id))
      fail(ErrorCode::Payload, "storage id '" + el.id + "' must consist of letters, digits and '_'");
    for (std::size_t k = 0; k < n; ++k) {
      const std::string name = state_name(el.id, k);
      if (g.symbols_.find(name))
        fail(ErrorCode::DuplicateId, "state symbol '" + name + "' generated twice (element '" + el.id + "')");
      el.states.push_back(g.symbols_.add_state(name));
    }
  }
  for (const Parameter& p : spec.parameters) {
    if (!is_identifier(p.name) || function_from_name(p.name))
      fail(ErrorCode::Payload, "parameter name '" + p.name + "' is not a valid symbol");
    if (p.value && !std::isfinite(*p.value))
      fail(ErrorCode::Payload, "parameter '" + p.name + "' has a non-finite value");
    if (g.symbols_.find(p.name))
      fail(ErrorCode::DuplicateId, "parameter '" + p.name + "' collides with another symbol");
    g.symbols_.add_parameter(p.name, p.value);
    g.parameters_.push_back(p);
  }

  // Payloads.
  for (std::size_t i = 0; i < spec.elements.size(); ++i) {
    const ElementSpec& es = spec.elements[i];
    Element& el = g.elements_[i];
    const bool wants_h = el.kind == ElementKind::C;
    const bool wants_m = el.kind == ElementKind::R || el.kind == ElementKind::TF || el.kind == ElementKind::GY;
    if (wants_h != es.hamiltonian.has_value())
      fail(ErrorCode::Payload, "element '" + el.id + "' (" + kind_name(el.kind) + ") " +
                                   (wants_h ? "requires" : "must not carry") + " a 'hamiltonian'");
    if (wants_m != es.matrix.has_value())
      fail(ErrorCode::Payload, "element '" + el.id + "' (" + kind_name(el.kind) + ") " +
                                   (wants_m ? "requires" : "must not carry") + " a 'matrix'");
    if (wants_h) {
      try {
        el.hamiltonian = parse_expr(*es.hamiltonian, g.symbols_);
      } catch (const Error& e) {
        fail(e.code(), "element '" + el.id + "' hamiltonian: " + e.what());
      }
      for (std::size_t s : free_symbols(el.hamiltonian)) {
        if (g.symbols_[s].kind == SymbolKind::Parameter) continue;
        if (std::find(el.states.begin(), el.states.end(), s) == el.states.end())
          fail(ErrorCode::CrossStorageCoupling, "element '" + el.id + "' hamiltonian uses foreign state '" +
                                                    g.symbols_[s].name + "'");
      }
    }
    if (wants_m) {
      const auto& rows = *es.matrix;
      if (rows.size() != n || std::any_of(rows.begin(), rows.end(), [&](const auto& r) { return r.size() != n; }))
        fail(ErrorCode::Payload, "element '" + el.id + "' matrix must be " + std::to_string(n) + "x" +
                                     std::to_string(n));
      el.matrix = SymMatrix(n, n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          try {
            el.matrix(r, c) = parse_expr(rows[r][c], g.symbols_);
          } catch (const Error& e) {
            const ErrorCode code = e.code() == ErrorCode::UnknownSymbol ? ErrorCode::ModulationSymbol : e.code();
            fail(code, "element '" + el.id + "' matrix entry (" + std::to_string(r + 1) + "," +
                           std::to_string(c + 1) + "): " + e.what());
          }
        }
    }
  }

  // Bonds.
  std::set<long long> bond_ids;
  g.incident_.assign(g.elements_.size(), {});
  for (const BondSpec& bs : spec.bonds) {
    if (!bond_ids.insert(bs.id).second) fail(ErrorCode::DuplicateId, "bond id " + std::to_string(bs.id) + " declared twice");
    auto t = by_id.find(bs.tail);
    auto h = by_id.find(bs.head);
    if (t == by_id.end())
      fail(ErrorCode::UnknownElement, "bond " + std::to_string(bs.id) + " has unknown tail '" + bs.tail + "'");
    if (h == by_id.end())
      fail(ErrorCode::UnknownElement, "bond " + std::to_string(bs.id) + " has unknown head '" + bs.head + "'");
    if (t->second == h->second)
      fail(ErrorCode::SelfLoop, "bond " + std::to_string(bs.id) + " connects '" + bs.tail + "' to itself");
    g.incident_[t->second].push_back(g.bonds_.size());
    g.incident_[h->second].push_back(g.bonds_.size());
    g.bonds_.push_back({bs.id, t->second, h->second});
  }

  // Weak connectivity.
  {
    std::vector<bool> seen(g.elements_.size(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t b : g.incident_[v]) {
        const std::size_t w = g.bonds_[b].tail == v ? g.bonds_[b].head : g.bonds_[b].tail;
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i])
        fail(ErrorCode::NotConnected, "element '" + g.elements_[i].id + "' is not connected to '" +
                                          g.elements_[0].id + "'");
  }

  // Exterior elements: one bond to an interior element, oriented correctly.
  bool any_exterior = false;
  for (std::size_t i = 0; i < g.elements_.size(); ++i) {
    const Element& el = g.elements_[i];
    if (!is_exterior(el.kind)) continue;
    any_exterior = true;
    const auto& inc = g.incident_[i];
    if (inc.size() != 1)
      fail(ErrorCode::ExteriorAdjacency, "exterior element '" + el.id + "' has " + std::to_string(inc.size()) +
                                             " bonds; exactly one is required");
    const Bond& b = g.bonds_[inc[0]];
    const std::size_t other = b.tail == i ? b.head : b.tail;
    if (is_exterior(g.elements_[other].kind))
      fail(ErrorCode::ExteriorAdjacency, "exterior element '" + el.id + "' is bonded to exterior element '" +
                                             g.elements_[other].id + "' (bond " + std::to_string(b.id) + ")");
    const bool into = b.head == i;
    const bool sink = el.kind == ElementKind::C || el.kind == ElementKind::R;
    if (into != sink)
      fail(ErrorCode::Orientation, "bond " + std::to_string(b.id) + " must point " +
                                       (sink ? "into " : "away from ") + std::string(kind_name(el.kind)) +
                                       " element '" + el.id + "'");
  }
  if (!any_exterior) fail(ErrorCode::ExteriorAdjacency, "graph has no exterior elements");

  // Two-ports.
  for (std::size_t i = 0; i < g.elements_.size(); ++i) {
    const Element& el = g.elements_[i];
    if (el.kind != ElementKind::TF && el.kind != ElementKind::GY) continue;
    std::size_t in = 0, out = 0;
    for (std::size_t b : g.incident_[i]) (g.bonds_[b].head == i ? in : out)++;
    if (in != 1 || out != 1)
      fail(ErrorCode::TwoPortArity, std::string(kind_name(el.kind)) + " element '" + el.id + "' has " +
                                        std::to_string(in) + " incoming and " + std::to_string(out) +
                                        " outgoing bonds; exactly one of each is required");
  }

  // Modulated payload checks.
  Sampler sampler(g.symbols_, options.seed);
  for (const Element& el : g.elements_) {
    if (el.kind == ElementKind::R) {
      if (!vanishes(subtract(el.matrix, transpose(el.matrix)), sampler, options.trials))
        fail(ErrorCode::NonSymmetricResistor, "resistor '" + el.id + "' has a non-symmetric matrix");
    }
    if (el.kind == ElementKind::TF || el.kind == ElementKind::GY) {
      const std::size_t r = generic_rank(el.matrix, sampler, options.trials);
      if (r != n)
        fail(ErrorCode::RankDeficientModulation, std::string(kind_name(el.kind)) + " element '" + el.id +
                                                     "' has generic rank " + std::to_string(r) + " < " +
                                                     std::to_string(n));
    }
  }

  // Partition.
  for (std::size_t i = 0; i < g.elements_.size(); ++i)
    (is_exterior(g.elements_[i].kind) ? g.partition_.exterior_elements : g.partition_.interior_elements)
        .push_back(i);
  for (std::size_t b = 0; b < g.bonds_.size(); ++b)
    (g.is_interior_bond(b) ? g.partition_.interior_bonds : g.partition_.exterior_bonds).push_back(b);
  return g;
}

BondGraph parse_bondgraph(std::string_view json_text, const ValidationOptions& options) {
  return build_bondgraph(parse_graph_spec(json_text), options);
}

GraphSpec to_spec(const BondGraph& bg) {
  GraphSpec spec;
  spec.dimension = static_cast<long long>(bg.dimension());
  spec.parameters = bg.parameters();
  for (const Element& el : bg.elements()) {
    ElementSpec es;
    es.id = el.id;
    es.kind = el.kind;
    if (el.kind == ElementKind::C) es.hamiltonian = el.hamiltonian.str();
    if (el.kind == ElementKind::R || el.kind == ElementKind::TF || el.kind == ElementKind::GY) {
      std::vector<std::vector<std::string>> rows(el.matrix.rows());
      for (std::size_t r = 0; r < el.matrix.rows(); ++r)
        for (std::size_t c = 0; c < el.matrix.cols(); ++c) rows[r].push_back(el.matrix(r, c).str());
      es.matrix = std::move(rows);
    }
    spec.elements.push_back(std::move(es));
  }
  for (const Bond& b : bg.bonds())
    spec.bonds.push_back({b.id, bg.element(b.tail).id, bg.element(b.head).id});
  return spec;
}

std::string serialize_bondgraph(const BondGraph& bg) { return graph_spec_to_json(to_spec(bg)); }

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

std::optional<std::size_t> BondGraph::find_element(std::string_view id) const {
  for (std::size_t i = 0; i < elements_.size(); ++i)
    if (elements_[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> BondGraph::find_bond(long long id) const {
  for (std::size_t i = 0; i < bonds_.size(); ++i)
    if (bonds_[i].id == id) return i;
  return std::nullopt;
}

bool BondGraph::is_interior_bond(std::size_t bond) const {
  const Bond& b = bonds_.at(bond);
  return !is_exterior(elements_[b.tail].kind) && !is_exterior(elements_[b.head].kind);
}

std::size_t BondGraph::exterior_end(std::size_t bond) const {
  const Bond& b = bonds_.at(bond);
  return is_exterior(elements_[b.tail].kind) ? b.tail : b.head;
}

std::size_t BondGraph::interior_end(std::size_t bond) const {
  const Bond& b = bonds_.at(bond);
  return is_exterior(elements_[b.tail].kind) ? b.head : b.tail;
}

std::vector<std::size_t> BondGraph::elements_of_kind(ElementKind k) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < elements_.size(); ++i)
    if (elements_[i].kind == k) out.push_back(i);
  return out;
}

Expr BondGraph::hamiltonian() const {
  std::vector<Expr> terms;
  for (const Element& el : elements_)
    if (el.kind == ElementKind::C) terms.push_back(el.hamiltonian);
  return Expr::sum(std::move(terms));
}

std::vector<std::size_t> BondGraph::state_ids() const {
  std::vector<std::size_t> ids;
  for (const Element& el : elements_) ids.insert(ids.end(), el.states.begin(), el.states.end());
  return ids;
}

}  // namespace bg2phs
