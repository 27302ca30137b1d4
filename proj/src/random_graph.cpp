#include "bg2phs/random_graph.hpp"

#include <random>
#include <string>
#include <vector>

namespace bg2phs {

namespace {

using RMat = std::vector<std::vector<Rational>>;

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  int between(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  Rational quarter() { return Rational(between(2, 8), 4); }  // [0.5, 2] in steps of 1/4

  RMat lower(std::size_t n) {
    RMat l(n, std::vector<Rational>(n, Rational(0)));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) l[i][j] = quarter();
    return l;
  }

  RMat gram(std::size_t n) {
    const RMat l = lower(n);
    RMat q(n, std::vector<Rational>(n, Rational(0)));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) q[i][j] += l[i][k] * l[j][k];
    return q;
  }

 private:
  std::mt19937_64 rng_;
};

std::vector<std::vector<std::string>> to_strings(const RMat& m) {
  std::vector<std::vector<std::string>> out;
  for (const auto& row : m) {
    out.emplace_back();
    for (const Rational& v : row) out.back().push_back(v.str());
  }
  return out;
}

std::string quadratic_form(const RMat& q, const std::string& id) {
  std::string h;
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = i; j < q.size(); ++j) {
      const Rational c = i == j ? q[i][i] / 2 : q[i][j];
      if (!h.empty()) h += " + ";
      h += "(" + c.str() + ")*" + state_name(id, i);
      h += i == j ? "^2" : "*" + state_name(id, j);
    }
  }
  return h;
}

bool two_port(ElementKind k) { return k == ElementKind::TF || k == ElementKind::GY; }

struct Node {
  ElementKind kind;
  int in = 0, out = 0;
  int degree() const { return in + out; }
};

struct Attachment {
  ElementKind kind;
  std::size_t node;
};

}  // namespace

GraphSpec random_graph_spec(std::uint64_t seed, const RandomGraphOptions& opt) {
  Draw draw(seed);
  for (;;) {
    const auto n = static_cast<std::size_t>(draw.between(opt.min_dimension, opt.max_dimension));
    const int count = draw.between(1, opt.max_interior);

    std::vector<Node> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> links;  // tail, head
    nodes.push_back({draw.between(0, 1) ? ElementKind::One : ElementKind::Zero});
    for (int i = 1; i < count; ++i) {
      const int r = draw.between(0, 9);
      ElementKind kind = r < 4 ? ElementKind::Zero : r < 8 ? ElementKind::One : r == 8 ? ElementKind::TF : ElementKind::GY;
      if (!opt.two_ports && two_port(kind)) kind = r % 2 ? ElementKind::One : ElementKind::Zero;
      std::vector<std::size_t> parents;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (!two_port(nodes[j].kind)) parents.push_back(j);
        else if (!two_port(kind) && nodes[j].degree() < 2) parents.push_back(j);
      }
      const std::size_t parent = parents[static_cast<std::size_t>(draw.between(0, static_cast<int>(parents.size()) - 1))];
      const std::size_t self = nodes.size();
      nodes.push_back({kind});
      bool from_parent = draw.between(0, 1) == 1;
      if (two_port(nodes[parent].kind) && nodes[parent].degree() == 1) from_parent = nodes[parent].in == 1;
      const auto [t, h] = from_parent ? std::pair{parent, self} : std::pair{self, parent};
      links.emplace_back(t, h);
      ++nodes[t].out;
      ++nodes[h].in;
    }

    std::vector<Attachment> ext;
    std::vector<std::size_t> junctions;
    auto free_kind = [&](bool sink) {
      const int r = draw.between(0, 19);
      if (sink) return r < 11 || !opt.resistors ? ElementKind::C : ElementKind::R;
      return r < 9 ? ElementKind::Sf : ElementKind::Se;
    };
    auto any_kind = [&]() {
      const int r = draw.between(0, 19);
      if (!opt.resistors && r >= 7 && r < 13) return ElementKind::C;
      return r < 7 ? ElementKind::C : r < 13 ? ElementKind::R : r < 16 ? ElementKind::Sf : ElementKind::Se;
    };
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (two_port(nodes[j].kind)) {
        if (nodes[j].degree() == 1) ext.push_back({free_kind(nodes[j].in == 1), j});
      } else {
        junctions.push_back(j);
        if (nodes[j].degree() <= 1) ext.push_back({any_kind(), j});
      }
    }
    const int extras = draw.between(nodes.size() == 1 ? 1 : 0, 3);
    for (int i = 0; i < extras; ++i)
      ext.push_back({any_kind(), junctions[static_cast<std::size_t>(draw.between(0, static_cast<int>(junctions.size()) - 1))]});
    if (static_cast<int>(ext.size()) > opt.max_exterior) continue;

    GraphSpec spec;
    spec.dimension = static_cast<long long>(n);
    std::vector<std::string> names;
    int tf = 0, gy = 0, junction = 0;
    for (const Node& node : nodes) {
      ElementSpec e;
      e.kind = node.kind;
      if (node.kind == ElementKind::TF || node.kind == ElementKind::GY) {
        e.id = (node.kind == ElementKind::TF ? "TF" + std::to_string(++tf) : "GY" + std::to_string(++gy));
        e.matrix = to_strings(draw.lower(n));
      } else {
        e.id = "J" + std::to_string(++junction);
      }
      names.push_back(e.id);
      spec.elements.push_back(std::move(e));
    }
    int counters[4] = {0, 0, 0, 0};
    std::vector<std::string> ext_names;
    for (const Attachment& a : ext) {
      ElementSpec e;
      e.kind = a.kind;
      const int slot = a.kind == ElementKind::C ? 0 : a.kind == ElementKind::R ? 1 : a.kind == ElementKind::Sf ? 2 : 3;
      e.id = std::string(kind_name(a.kind)) + std::to_string(++counters[slot]);
      if (a.kind == ElementKind::C) e.hamiltonian = quadratic_form(draw.gram(n), e.id);
      if (a.kind == ElementKind::R) e.matrix = to_strings(draw.gram(n));
      ext_names.push_back(e.id);
      spec.elements.push_back(std::move(e));
    }
    long long bond = 0;
    for (const auto& [t, h] : links) spec.bonds.push_back({++bond, names[t], names[h]});
    for (std::size_t i = 0; i < ext.size(); ++i) {
      const bool sink = ext[i].kind == ElementKind::C || ext[i].kind == ElementKind::R;
      const std::string& inner = names[ext[i].node];
      if (sink) spec.bonds.push_back({++bond, inner, ext_names[i]});
      else spec.bonds.push_back({++bond, ext_names[i], inner});
    }
    return spec;
  }
}

}  // namespace bg2phs
