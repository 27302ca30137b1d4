#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bg2phs/bondgraph.hpp"
#include "bg2phs/pipeline.hpp"
#include "bg2phs/random_graph.hpp"

namespace bg2phs::testing {

inline std::string data_path(const std::string& name) { return std::string(BG2PHS_DATA_DIR) + "/" + name; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline BondGraph load_graph(const std::string& name) { return parse_bondgraph(read_text(data_path(name))); }

inline BondGraph example_graph(int n) {
  return load_graph("academic_example_n" + std::to_string(n) + ".json");
}

struct Compiled {
  std::uint64_t seed;
  BondGraph graph;
  CompileResult result;
};

/// Random graphs that pass both existence checks, compiled with the default
/// options. Seeds are tried in order starting at `first_seed`.
inline std::vector<Compiled> compiled_random_graphs(std::size_t count, std::uint64_t first_seed,
                                                   const RandomGraphOptions& opt = {},
                                                   std::size_t max_seeds = 5000) {
  std::vector<Compiled> out;
  for (std::uint64_t s = first_seed; out.size() < count && s < first_seed + max_seeds; ++s) {
    BondGraph bg = build_bondgraph(random_graph_spec(s, opt));
    CompileOptions co;
    co.seed = s;
    CompileResult res = run_pipeline(bg, co);
    if (res.outcome == Outcome::DependentSources || res.outcome == Outcome::DependentStorages) continue;
    out.push_back({s, std::move(bg), std::move(res)});
  }
  return out;
}

}  // namespace bg2phs::testing
