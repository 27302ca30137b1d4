#include "bg2phs/model_io.hpp"

namespace bg2phs {

ojson matrix_to_json(const SymMatrix& m) {
  ojson rows = ojson::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j).str());
    rows.push_back(std::move(row));
  }
  return rows;
}

SymMatrix matrix_from_json(const ojson& j, const SymbolTable& symbols, std::size_t rows, std::size_t cols,
                           const std::string& what) {
  auto shape_fail = [&]() {
    throw Error(ErrorCode::ShapeMismatch,
                what + " must be " + std::to_string(rows) + "x" + std::to_string(cols));
  };
  if (!j.is_array() || j.size() != rows) shape_fail();
  SymMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) shape_fail();
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_string()) throw Error(ErrorCode::Json, what + " entries must be expression strings");
      m(i, c) = parse_expr(j[i][c].get<std::string>(), symbols);
    }
  }
  return m;
}

ojson model_to_json(const PhsModel& m, const ojson* report) {
  ojson doc;
  doc["states"] = m.state_names();
  doc["inputs"] = m.inputs;
  doc["outputs"] = m.outputs;
  ojson params = ojson::array();
  for (std::size_t id : m.symbols.parameter_ids()) {
    ojson p;
    p["name"] = m.symbols[id].name;
    if (m.symbols[id].value) p["value"] = *m.symbols[id].value;
    params.push_back(std::move(p));
  }
  doc["parameters"] = std::move(params);
  doc["hamiltonian"] = m.hamiltonian.str();
  doc["J"] = matrix_to_json(m.J);
  doc["R"] = matrix_to_json(m.R);
  doc["G"] = matrix_to_json(m.G);
  doc["P"] = matrix_to_json(m.P);
  doc["M"] = matrix_to_json(m.M);
  doc["S"] = matrix_to_json(m.S);
  if (report) doc["report"] = *report;
  return doc;
}

std::string model_to_string(const PhsModel& m, const ojson* report) {
  return model_to_json(m, report).dump(2) + "\n";
}

PhsModel parse_model(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text.begin(), text.end());
  } catch (const ojson::parse_error& e) {
    throw Error(ErrorCode::Json, std::string("malformed model JSON: ") + e.what());
  }
  try {
    PhsModel m;
    for (const auto& s : doc.at("states")) m.states.push_back(m.symbols.add_state(s.get<std::string>()));
    if (doc.contains("parameters"))
      for (const auto& p : doc["parameters"]) {
        std::optional<double> v;
        if (p.contains("value") && !p["value"].is_null()) v = p["value"].get<double>();
        m.symbols.add_parameter(p.at("name").get<std::string>(), v);
      }
    m.inputs = doc.at("inputs").get<std::vector<std::string>>();
    m.outputs = doc.at("outputs").get<std::vector<std::string>>();
    if (m.inputs.size() != m.outputs.size())
      throw Error(ErrorCode::ShapeMismatch, "model has different numbers of inputs and outputs");
    m.hamiltonian = parse_expr(doc.at("hamiltonian").get<std::string>(), m.symbols);
    const std::size_t n = m.states.size(), p = m.inputs.size();
    m.J = matrix_from_json(doc.at("J"), m.symbols, n, n, "J");
    m.R = matrix_from_json(doc.at("R"), m.symbols, n, n, "R");
    m.G = matrix_from_json(doc.at("G"), m.symbols, n, p, "G");
    m.P = matrix_from_json(doc.at("P"), m.symbols, n, p, "P");
    m.M = matrix_from_json(doc.at("M"), m.symbols, p, p, "M");
    m.S = matrix_from_json(doc.at("S"), m.symbols, p, p, "S");
    return m;
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::Json, std::string("invalid model document: ") + e.what());
  }
}

}  // namespace bg2phs
