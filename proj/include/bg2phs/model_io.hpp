#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "bg2phs/phs.hpp"

namespace bg2phs {

using ojson = nlohmann::ordered_json;

ojson matrix_to_json(const SymMatrix& m);
SymMatrix matrix_from_json(const ojson& j, const SymbolTable& symbols, std::size_t rows, std::size_t cols,
                           const std::string& what);

/// Model document; `report` is embedded verbatim when given.
ojson model_to_json(const PhsModel& m, const ojson* report = nullptr);
std::string model_to_string(const PhsModel& m, const ojson* report = nullptr);

/// Reads a model document. Parameters listed in it become symbols; `report`
/// is ignored.
PhsModel parse_model(std::string_view text);

}  // namespace bg2phs
