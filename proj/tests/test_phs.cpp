#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "bg2phs/phs.hpp"
#include "bg2phs/pipeline.hpp"
#include "support.hpp"

namespace bg2phs {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::compiled_random_graphs;
using testing::data_path;
using testing::example_graph;
using testing::read_text;

ElementSpec el(const std::string& id, ElementKind kind) { return {id, kind, std::nullopt, std::nullopt}; }
ElementSpec storage(const std::string& id, const std::string& h) { return {id, ElementKind::C, h, std::nullopt}; }
ElementSpec resistor(const std::string& id, std::vector<std::vector<std::string>> d) {
  return {id, ElementKind::R, std::nullopt, std::move(d)};
}

GraphSpec spec_of(long long n, std::vector<ElementSpec> elements, std::vector<BondSpec> bonds) {
  GraphSpec g;
  g.dimension = n;
  g.elements = std::move(elements);
  g.bonds = std::move(bonds);
  return g;
}

CompileResult compile(const BondGraph& bg, std::uint64_t seed = 0, Stage stop = Stage::Model) {
  CompileOptions o;
  o.seed = seed;
  return run_pipeline(bg, o, stop);
}

MatrixXd blocks(Eigen::Index n, const std::vector<std::vector<MatrixXd>>& rows) {
  MatrixXd out(n * static_cast<Eigen::Index>(rows.size()), n * static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out.block(static_cast<Eigen::Index>(r) * n, static_cast<Eigen::Index>(c) * n, n, n) = rows[r][c];
  return out;
}

double max_abs(const MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Numeric rank of columns of the composed kernel, maximised over points.
std::size_t sampled_rank(const BondGraph& bg, const SymMatrix& m, int points) {
  Sampler s(bg.symbols(), 4242);
  std::size_t r = 0;
  for (int i = 0; i < points; ++i) r = std::max(r, numeric_rank(evaluate(m, s.draw())));
  return r;
}

TEST(Checks, WorkedExamplePassesBothGates) {
  for (int n = 1; n <= 3; ++n) {
    const CompileResult r = compile(example_graph(n), 0, Stage::Checks);
    EXPECT_TRUE(r.necessary.passed);
    EXPECT_TRUE(r.sufficient.passed);
    EXPECT_EQ(r.sufficient.rank, static_cast<std::size_t>(3 * n));
  }
}

TEST(Checks, EqualEffortSourcesFailNecessaryCheck) {
  // Two Se on a 1-junction chain that forces their efforts to agree.
  const BondGraph bg = build_bondgraph(
      spec_of(2, {el("Se1", ElementKind::Se), el("A", ElementKind::One), el("B", ElementKind::One),
                  el("Se2", ElementKind::Se)},
              {{1, "Se1", "A"}, {2, "A", "B"}, {3, "Se2", "B"}}));
  const CompileResult r = compile(bg, 0, Stage::Checks);
  ASSERT_TRUE(r.composed);
  const PortCounts pc = port_counts(bg);
  const SymMatrix sources = hcat({r.composed->kernel.E.block(0, pc.c + pc.r, r.composed->kernel.E.rows(), pc.sf),
                                  r.composed->kernel.F.block(0, pc.c + pc.r + pc.sf, r.composed->kernel.F.rows(), pc.se)});
  const std::size_t oracle = sampled_rank(bg, sources, 5);
  EXPECT_LT(oracle, pc.sf + pc.se);
  EXPECT_FALSE(r.necessary.passed);
  EXPECT_EQ(r.necessary.rank, oracle);
  EXPECT_EQ(r.outcome, Outcome::DependentSources);
  EXPECT_EQ(r.message, kDependentSourcesMessage);
}

TEST(Checks, NoSourcesPassVacuously) {
  const BondGraph bg = build_bondgraph(spec_of(
      1, {el("J", ElementKind::One), storage("C", "x_C_1^2/2"), resistor("R", {{"2"}})}, {{1, "J", "C"}, {2, "J", "R"}}));
  const CompileResult r = compile(bg);
  EXPECT_TRUE(r.necessary.passed);
  EXPECT_EQ(r.necessary.required, 0u);
  EXPECT_EQ(r.outcome, Outcome::Ok);
}

TEST(Checks, ParallelCapacitorsFailSufficientCheck) {
  const BondGraph bg = build_bondgraph(spec_of(
      2, {el("J", ElementKind::Zero), storage("C1", "x_C1_1^2 + x_C1_2^2"), storage("C2", "x_C2_1^2 + x_C2_2^2")},
      {{1, "J", "C1"}, {2, "J", "C2"}}));
  const CompileResult r = compile(bg, 0, Stage::Checks);
  ASSERT_TRUE(r.composed);
  const PortCounts pc = port_counts(bg);
  const std::size_t oracle = sampled_rank(bg, r.composed->kernel.F.block(0, 0, r.composed->kernel.F.rows(), pc.c), 5);
  EXPECT_EQ(oracle, 2u);
  EXPECT_TRUE(r.necessary.passed);
  EXPECT_FALSE(r.sufficient.passed);
  EXPECT_EQ(r.sufficient.rank, oracle);
  EXPECT_EQ(r.outcome, Outcome::DependentStorages);
  EXPECT_EQ(r.message, kDependentStoragesMessage);
}

TEST(Checks, StorageAndResistorTreePasses) {
  const BondGraph bg = build_bondgraph(
      spec_of(1,
              {el("A", ElementKind::Zero), el("B", ElementKind::One), storage("C1", "x_C1_1^2/2"),
               storage("C2", "x_C2_1^2/2"), resistor("R1", {{"1"}}), resistor("R2", {{"3"}})},
              {{1, "A", "C1"}, {2, "A", "B"}, {3, "B", "C2"}, {4, "B", "R1"}, {5, "A", "R2"}}));
  const CompileResult r = compile(bg);
  EXPECT_TRUE(r.sufficient.passed);
  EXPECT_EQ(r.outcome, Outcome::Ok);
}

TEST(Checks, DependentSourcesHaltRegardlessOfParameterValues) {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> factor(0.5, 3.0);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(data_path("corpus"))) {
    if (entry.path().filename().string().rfind("sources_", 0) != 0) continue;
    ++files;
    const GraphSpec base = parse_graph_spec(read_text(entry.path().string()));
    for (int k = 0; k < 5; ++k) {
      GraphSpec g = base;
      for (ElementSpec& e : g.elements) {
        if (!e.matrix) continue;
        for (auto& row : *e.matrix)
          for (std::string& cell : row)
            if (cell != "0") cell = std::to_string(factor(rng)) + "*(" + cell + ")";
      }
      const BondGraph bg = build_bondgraph(g);
      EXPECT_EQ(compile(bg, static_cast<std::uint64_t>(k)).outcome, Outcome::DependentSources)
          << entry.path().filename();
    }
  }
  EXPECT_GE(files, 5);
}

TEST(Splitting, WorkedExampleUsesEffortsOfAllResistors) {
  const CompileResult r = compile(example_graph(2));
  ASSERT_TRUE(r.explicit_form);
  EXPECT_TRUE(r.explicit_form->splitting.group1.empty());
  EXPECT_EQ(r.explicit_form->splitting.group2, (std::vector<std::size_t>{0, 1}));
}

TEST(Splitting, ResistorInSeriesWithFlowSourceGoesToGroupOne) {
  const BondGraph bg = build_bondgraph(
      spec_of(1, {el("J", ElementKind::One), el("Sf", ElementKind::Sf), storage("C", "x_C_1^2/2"), resistor("R", {{"2"}})},
              {{1, "Sf", "J"}, {2, "J", "C"}, {3, "J", "R"}}));
  const CompileResult r = compile(bg, 0, Stage::Checks);
  ASSERT_TRUE(r.composed);
  Sampler s(bg.symbols(), 1);
  const PortCounts pc = port_counts(bg);
  const Splitting sp = split_resistor_columns(r.composed->kernel, pc, s, 20);
  EXPECT_EQ(sp.group1, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(sp.group2.empty());
  // Greedy oracle: the R column raises the rank of (F_C E_Sf F_Se).
  const SymMatrix& f = r.composed->kernel.F;
  const SymMatrix& e = r.composed->kernel.E;
  const SymMatrix base = hcat({f.block(0, 0, f.rows(), pc.c), e.block(0, pc.c + pc.r, e.rows(), pc.sf)});
  const SymMatrix with_r = hcat({base, f.block(0, pc.c, f.rows(), 1)});
  EXPECT_EQ(sampled_rank(bg, with_r, 5), sampled_rank(bg, base, 5) + 1);
}

TEST(Splitting, NoResistorsGiveEmptySplitting) {
  const BondGraph bg = build_bondgraph(spec_of(
      1, {el("J", ElementKind::One), el("Sf", ElementKind::Sf), storage("C", "x_C_1^2/2")}, {{1, "Sf", "J"}, {2, "J", "C"}}));
  const CompileResult r = compile(bg);
  ASSERT_TRUE(r.explicit_form);
  EXPECT_TRUE(r.explicit_form->splitting.group1.empty());
  EXPECT_TRUE(r.explicit_form->splitting.group2.empty());
  ASSERT_TRUE(r.resistive);
  EXPECT_TRUE(r.resistive->Rt.empty());
}

TEST(ComputeZ, WorkedExampleMatchesReference) {
  for (int n = 1; n <= 3; ++n) {
    const BondGraph bg = example_graph(n);
    const CompileResult r = compile(bg);
    ASSERT_TRUE(r.explicit_form);
    const auto nn = static_cast<Eigen::Index>(n);
    const MatrixXd o = MatrixXd::Zero(nn, nn), i = MatrixXd::Identity(nn, nn);
    Sampler s(bg.symbols(), 8);
    for (int t = 0; t < 20; ++t) {
      const std::vector<double> pt = s.draw();
      const MatrixXd v = evaluate(bg.element(*bg.find_element("TF")).matrix, pt).inverse();
      const MatrixXd expected = blocks(nn, {{o, o, i, o}, {o, o, v, -i}, {-i, -v, o, o}, {o, i, o, o}});
      EXPECT_LE(max_abs(evaluate(r.explicit_form->Z, pt) - expected), 1e-10);
    }
  }
}

TEST(ComputeZ, KernelAlreadyInExplicitForm) {
  SymbolTable none;
  Sampler s(none, 1);
  const SymMatrix zt = SymMatrix::from_rows({{Expr(), Expr::integer(2), Expr::integer(-1)},
                                             {Expr::integer(-2), Expr(), Expr::constant(Rational(1, 3))},
                                             {Expr::integer(1), Expr::constant(Rational(-1, 3)), Expr()}});
  DiracKernel d{negate(SymMatrix::identity(3)), zt, {}, {}};
  PortCounts pc;
  pc.c = 3;
  const ExplicitDirac ed = compute_Z(d, pc, {}, s, 5);
  for (std::size_t k = 0; k < 9; ++k)
    EXPECT_TRUE((ed.Z.entries()[k] - zt.entries()[k]).is_zero_constant()) << k;
}

// Flow and effort columns of the composed kernel for an input u and the
// output y = Z u.
void port_values(const PortCounts& pc, const Splitting& sp, const VectorXd& u, const VectorXd& y, VectorXd& f,
                 VectorXd& e) {
  const auto total = static_cast<Eigen::Index>(pc.c + pc.r + pc.sf + pc.se);
  f = VectorXd::Zero(total);
  e = VectorXd::Zero(total);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < pc.c; ++i, ++k) f(k) = y(k), e(k) = u(k);
  for (std::size_t col : sp.group1) {
    const auto c = static_cast<Eigen::Index>(pc.c + col);
    f(c) = y(k), e(c) = u(k);
    ++k;
  }
  for (std::size_t col : sp.group2) {
    const auto c = static_cast<Eigen::Index>(pc.c + col);
    f(c) = u(k), e(c) = y(k);
    ++k;
  }
  for (std::size_t i = 0; i < pc.sf; ++i, ++k) {
    const auto c = static_cast<Eigen::Index>(pc.c + pc.r + i);
    f(c) = u(k), e(c) = y(k);
  }
  for (std::size_t i = 0; i < pc.se; ++i, ++k) {
    const auto c = static_cast<Eigen::Index>(pc.c + pc.r + pc.sf + i);
    f(c) = y(k), e(c) = u(k);
  }
}

TEST(ComputeZ, ExplicitPairsSatisfyTheKernelEquations) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (const auto& c : compiled_random_graphs(10, 1)) {
    if (!c.result.explicit_form) continue;
    const ExplicitDirac& ed = *c.result.explicit_form;
    const PortCounts pc = port_counts(c.graph);
    Sampler s(c.graph.symbols(), 3);
    const std::vector<double> pt = s.draw();
    const MatrixXd z = evaluate(ed.Z, pt);
    EXPECT_LE(max_abs(z + z.transpose()), 1e-10);
    const MatrixXd f = evaluate(c.result.composed->kernel.F, pt);
    const MatrixXd e = evaluate(c.result.composed->kernel.E, pt);
    for (int t = 0; t < 50; ++t) {
      VectorXd u(z.cols());
      for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = g(rng);
      VectorXd fv, ev;
      port_values(pc, ed.splitting, u, z * u, fv, ev);
      EXPECT_LE((f * fv + e * ev).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + u.norm())) << "seed " << c.seed;
    }
  }
}

TEST(ResistiveForm, AllEffortsGivesD) {
  const BondGraph bg = example_graph(2);
  Sampler s(bg.symbols(), 1);
  const ResistiveForm rf = resistive_io_form(bg, {{}, {0, 1}}, s, 20, 20);
  const SymMatrix& d = bg.element(*bg.find_element("R")).matrix;
  for (std::size_t k = 0; k < 4; ++k) EXPECT_TRUE((rf.Rt.entries()[k] - d.entries()[k]).is_zero_constant());
}

TEST(ResistiveForm, AllFlowsInvertsDiagonalD) {
  const BondGraph bg = build_bondgraph(
      spec_of(2,
              {el("J", ElementKind::One), el("Sf", ElementKind::Sf), storage("C", "x_C_1^2 + x_C_2^2"),
               resistor("R", {{"2", "0"}, {"0", "5"}})},
              {{1, "Sf", "J"}, {2, "J", "C"}, {3, "J", "R"}}));
  Sampler s(bg.symbols(), 1);
  const ResistiveForm rf = resistive_io_form(bg, {{0, 1}, {}}, s, 20, 20);
  EXPECT_EQ(rf.Rt(0, 0).constant_value(), Rational(1, 2));
  EXPECT_EQ(rf.Rt(1, 1).constant_value(), Rational(1, 5));
  EXPECT_TRUE(rf.Rt(0, 1).is_zero_constant());
}

TEST(ResistiveForm, SingularBlockHasNoSplitting) {
  const BondGraph bg = build_bondgraph(
      spec_of(2,
              {el("J", ElementKind::One), el("Sf", ElementKind::Sf), storage("C", "x_C_1^2 + x_C_2^2"),
               resistor("R", {{"1", "1"}, {"1", "1"}})},
              {{1, "Sf", "J"}, {2, "J", "C"}, {3, "J", "R"}}));
  Sampler s(bg.symbols(), 1);
  try {
    resistive_io_form(bg, {{0, 1}, {}}, s, 20, 20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResistiveSplitting);
  }
  const CompileResult r = compile(bg);
  EXPECT_EQ(r.outcome, Outcome::NoResistiveSplitting);
  EXPECT_EQ(r.message, kNoResistiveSplittingMessage);
}

TEST(ResistiveForm, NoResistorsGiveEmptyMap) {
  const BondGraph bg = build_bondgraph(spec_of(
      1, {el("J", ElementKind::One), el("Se", ElementKind::Se), storage("C", "x_C_1^2/2")}, {{1, "Se", "J"}, {2, "J", "C"}}));
  Sampler s(bg.symbols(), 1);
  EXPECT_TRUE(resistive_io_form(bg, {}, s, 20, 20).Rt.empty());
}

TEST(Assemble, WorkedExampleModel) {
  for (int n = 1; n <= 3; ++n) {
    const BondGraph bg = example_graph(n);
    const CompileResult r = compile(bg);
    ASSERT_TRUE(r.model);
    const PhsModel& m = *r.model;
    for (const SymMatrix* z : {&m.J, &m.P, &m.M, &m.S}) EXPECT_TRUE(z->structurally_zero());
    const auto nn = static_cast<Eigen::Index>(n);
    Sampler s(bg.symbols(), 9);
    for (int t = 0; t < 20; ++t) {
      const std::vector<double> pt = s.draw();
      const MatrixXd v = evaluate(bg.element(*bg.find_element("TF")).matrix, pt).inverse();
      const MatrixXd d = evaluate(bg.element(*bg.find_element("R")).matrix, pt);
      MatrixXd rr(2 * nn, 2 * nn), gg(2 * nn, nn);
      rr << d, d * v, v * d, v * d * v;
      gg << MatrixXd::Zero(nn, nn), MatrixXd::Identity(nn, nn);
      EXPECT_LE(max_abs(evaluate(m.R, pt) - rr), 1e-10);
      EXPECT_LE(max_abs(evaluate(m.G, pt) - gg), 1e-12);
    }
    EXPECT_EQ(m.inputs.size(), static_cast<std::size_t>(n));
  }
}

TEST(Assemble, VanishingResistiveCouplingDoublesResistiveForm) {
  // In the worked example Z_RR = 0, so K = I and R = Z_CR Rt Z_CR^T, J = -Z_CC.
  const BondGraph bg = example_graph(2);
  const CompileResult r = compile(bg);
  const ExplicitDirac& ed = *r.explicit_form;
  Sampler s(bg.symbols(), 4);
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> pt = s.draw();
    const MatrixXd z = evaluate(ed.Z, pt);
    const auto nc = static_cast<Eigen::Index>(ed.nc), nr = static_cast<Eigen::Index>(ed.nr);
    ASSERT_LE(max_abs(z.block(nc, nc, nr, nr)), 1e-14);
    const MatrixXd zcr = z.block(0, nc, nc, nr);
    const MatrixXd rt = evaluate(r.resistive->Rt, pt);
    EXPECT_LE(max_abs(evaluate(r.model->R, pt) - zcr * rt * zcr.transpose()), 1e-10);
    EXPECT_LE(max_abs(evaluate(r.model->J, pt) + z.block(0, 0, nc, nc)), 1e-12);
  }
}

TEST(Assemble, LosslessModelsReadOffZ) {
  RandomGraphOptions lossless;
  lossless.resistors = false;
  for (const auto& c : compiled_random_graphs(8, 100, lossless)) {
    if (!c.result.model) continue;
    const ExplicitDirac& ed = *c.result.explicit_form;
    const PhsModel& m = *c.result.model;
    EXPECT_TRUE(m.R.structurally_zero());
    EXPECT_TRUE(m.P.structurally_zero());
    EXPECT_TRUE(m.S.structurally_zero());
    Sampler s(c.graph.symbols(), 2);
    const std::vector<double> pt = s.draw();
    const MatrixXd z = evaluate(ed.Z, pt);
    const auto nc = static_cast<Eigen::Index>(ed.nc), np = static_cast<Eigen::Index>(ed.np);
    if (nc > 0) EXPECT_LE(max_abs(evaluate(m.J, pt) + z.block(0, 0, nc, nc)), 1e-12);
    if (nc > 0 && np > 0) EXPECT_LE(max_abs(evaluate(m.G, pt) + z.block(0, nc, nc, np)), 1e-12);
    if (np > 0) EXPECT_LE(max_abs(evaluate(m.M, pt) - z.block(nc, nc, np, np)), 1e-12);
  }
}

TEST(Assemble, DissipationInequalityHolds) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  int checked = 0;
  for (const auto& c : compiled_random_graphs(20, 1)) {
    if (!c.result.model) continue;
    const PhsModel& m = *c.result.model;
    Sampler s(m.symbols, c.seed);
    for (int t = 0; t < 5; ++t) {
      const std::vector<double> pt = s.draw();
      const std::size_t n = m.states.size(), p = m.inputs.size();
      VectorXd grad(static_cast<Eigen::Index>(n)), u(static_cast<Eigen::Index>(p));
      for (std::size_t i = 0; i < n; ++i) grad(static_cast<Eigen::Index>(i)) = eval_expr(diff_expr(m.hamiltonian, m.states[i]), pt);
      for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = g(rng);
      const MatrixXd jm = evaluate(m.J, pt), rm = evaluate(m.R, pt), gm = evaluate(m.G, pt), pm = evaluate(m.P, pt),
                     mm = evaluate(m.M, pt), sm = evaluate(m.S, pt);
      const VectorXd xdot = (jm - rm) * grad + (gm - pm) * u;
      const VectorXd y = (gm + pm).transpose() * grad + (mm + sm) * u;
      EXPECT_LE(grad.dot(xdot), u.dot(y) + 1e-8) << "seed " << c.seed;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 100);
}

TEST(Assemble, PortLabelsFollowSourceKinds) {
  const BondGraph bg = build_bondgraph(
      spec_of(1,
              {el("J", ElementKind::Zero), el("K", ElementKind::One), el("Sf", ElementKind::Sf),
               el("Se", ElementKind::Se), storage("C1", "x_C1_1^2/2"), storage("C2", "x_C2_1^2/2")},
              {{1, "Sf", "J"}, {2, "J", "C1"}, {3, "J", "K"}, {4, "Se", "K"}, {5, "K", "C2"}}));
  std::vector<std::string> in, out;
  port_labels(bg, in, out);
  ASSERT_EQ(in.size(), 2u);
  EXPECT_NE(in[0].find("f"), std::string::npos);
  EXPECT_NE(in[0].find("Sf"), std::string::npos);
  EXPECT_NE(in[1].find("e"), std::string::npos);
  EXPECT_NE(out[0].find("e"), std::string::npos);
  EXPECT_NE(out[1].find("f"), std::string::npos);
}

}  // namespace
}  // namespace bg2phs
