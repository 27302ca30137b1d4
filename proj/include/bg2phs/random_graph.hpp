#pragma once

#include <cstdint>

#include "bg2phs/bondgraph.hpp"

namespace bg2phs {

struct RandomGraphOptions {
  int max_interior = 6;
  int max_exterior = 8;
  int min_dimension = 1;
  int max_dimension = 3;
  bool two_ports = true;
  bool resistors = true;
};

/// Seeded random graph that passes validation. Junction/two-port tree with
/// exterior elements attached so every leaf is closed off. Storages get
/// H = 1/2 x^T Q x and resistors D with Q, D = L L^T; transformer and gyrator
/// matrices are lower triangular. All entries are multiples of 1/4 in
/// [0.5, 2] before the products.
GraphSpec random_graph_spec(std::uint64_t seed, const RandomGraphOptions& options = {});

}  // namespace bg2phs
