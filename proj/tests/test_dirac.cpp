#include <gtest/gtest.h>

#include <random>

#include "bg2phs/dirac.hpp"
#include "bg2phs/verify.hpp"
#include "support.hpp"

namespace bg2phs {
namespace {

using Eigen::MatrixXd;
using testing::example_graph;

MatrixXd blocks(Eigen::Index n, const std::vector<std::vector<MatrixXd>>& rows) {
  MatrixXd out(n * static_cast<Eigen::Index>(rows.size()), n * static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out.block(static_cast<Eigen::Index>(r) * n, static_cast<Eigen::Index>(c) * n, n, n) = rows[r][c];
  return out;
}

double max_diff(const MatrixXd& a, const MatrixXd& b) {
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.cols(), b.cols());
  if (a.rows() != b.rows() || a.cols() != b.cols()) return 1e300;
  return a.rows() * a.cols() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

std::size_t index_of(const BondGraph& bg, const std::string& id) { return *bg.find_element(id); }

std::vector<long long> bond_ids(const BondGraph& bg, const DiracKernel& d) {
  std::vector<long long> ids;
  for (std::size_t b : d.ports) ids.push_back(bg.bonds()[b].id);
  return ids;
}

class WorkedExample : public ::testing::TestWithParam<int> {
 protected:
  WorkedExample() : bg(example_graph(GetParam())), n(GetParam()), sampler(bg.symbols(), 17) {
    o = MatrixXd::Zero(n, n);
    i = MatrixXd::Identity(n, n);
  }

  BondGraph bg;
  Eigen::Index n;
  Sampler sampler;
  MatrixXd o, i;
};

TEST_P(WorkedExample, ZeroJunctionPattern) {
  const DiracKernel d = elementary_dirac(bg, index_of(bg, "J0"));
  EXPECT_EQ(bond_ids(bg, d), (std::vector<long long>{5, 2, 4}));
  EXPECT_EQ(d.signs, (std::vector<int>{1, 1, -1}));
  const std::vector<double> pt = sampler.draw();
  EXPECT_EQ(max_diff(evaluate(d.F, pt), blocks(n, {{i, i, i}, {o, o, o}, {o, o, o}})), 0.0);
  EXPECT_EQ(max_diff(evaluate(d.E, pt), blocks(n, {{o, o, o}, {i, -i, o}, {i, o, -i}})), 0.0);
}

TEST_P(WorkedExample, OneJunctionPattern) {
  const DiracKernel d = elementary_dirac(bg, index_of(bg, "J1"));
  EXPECT_EQ(bond_ids(bg, d), (std::vector<long long>{3, 6, 1}));
  EXPECT_EQ(d.signs, (std::vector<int>{-1, -1, -1}));
  const std::vector<double> pt = sampler.draw();
  EXPECT_EQ(max_diff(evaluate(d.F, pt), blocks(n, {{o, o, o}, {-i, i, o}, {-i, o, i}})), 0.0);
  EXPECT_EQ(max_diff(evaluate(d.E, pt), blocks(n, {{-i, -i, -i}, {o, o, o}, {o, o, o}})), 0.0);
}

TEST_P(WorkedExample, TransformerPattern) {
  const DiracKernel d = elementary_dirac(bg, index_of(bg, "TF"));
  EXPECT_EQ(bond_ids(bg, d), (std::vector<long long>{1, 2}));
  for (int t = 0; t < 5; ++t) {
    const std::vector<double> pt = sampler.draw();
    const MatrixXd u = evaluate(bg.element(index_of(bg, "TF")).matrix, pt);
    EXPECT_LE(max_diff(evaluate(d.F, pt), blocks(n, {{i, u}, {o, o}})), 1e-14);
    EXPECT_LE(max_diff(evaluate(d.E, pt), blocks(n, {{o, o}, {-u.transpose(), i}})), 1e-14);
  }
}

TEST_P(WorkedExample, ReorderedZeroJunction) {
  const DiracKernel d = reorder_interior_exterior(elementary_dirac(bg, index_of(bg, "J0")), bg);
  EXPECT_EQ(bond_ids(bg, d), (std::vector<long long>{4, 5, 2}));
  EXPECT_EQ(exterior_port_count(d, bg), 2u);
  const std::vector<double> pt = sampler.draw();
  // Columns act on (-f4, f5, f2) and (e4, e5, e2).
  EXPECT_EQ(max_diff(evaluate(d.F, pt), blocks(n, {{i, i, i}, {o, o, o}, {o, o, o}})), 0.0);
  EXPECT_EQ(max_diff(evaluate(d.E, pt), blocks(n, {{o, o, o}, {o, i, -i}, {-i, i, o}})), 0.0);
}

TEST_P(WorkedExample, InterconnectionBlocks) {
  const InterconnectionStructure ic = build_interconnection(bg);
  ASSERT_EQ(ic.elements.size(), 3u);
  const std::vector<double> pt = sampler.draw();
  EXPECT_EQ(max_diff(evaluate(ic.F[0], pt), blocks(n, {{o}, {i}, {o}, {o}})), 0.0);
  EXPECT_EQ(max_diff(evaluate(ic.F[1], pt), blocks(n, {{i}, {o}, {o}, {o}})), 0.0);
  EXPECT_EQ(max_diff(evaluate(ic.F[2], pt), blocks(n, {{i, o}, {o, i}, {o, o}, {o, o}})), 0.0);
  EXPECT_EQ(max_diff(evaluate(ic.E[0], pt), blocks(n, {{o}, {o}, {o}, {i}})), 0.0);
  EXPECT_EQ(max_diff(evaluate(ic.E[1], pt), blocks(n, {{o}, {o}, {-i}, {o}})), 0.0);
  EXPECT_EQ(max_diff(evaluate(ic.E[2], pt), blocks(n, {{o, o}, {o, o}, {i, o}, {o, -i}})), 0.0);
}

TEST_P(WorkedExample, GammaTransposeGolden) {
  const ComposedDirac c = compose(bg, sampler);
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> pt = sampler.draw();
    const MatrixXd u = evaluate(bg.element(index_of(bg, "TF")).matrix, pt);
    const MatrixXd expected = blocks(n, {{o, o, o, -i, o, o, o, -u},
                                         {o, -i, o, o, o, o, o, i},
                                         {o, o, o, o, o, -i, i, o},
                                         {i, o, o, o, o, o, -u, o}});
    EXPECT_LE(max_diff(evaluate(c.gamma_t, pt), expected), 1e-14);
  }
}

TEST_P(WorkedExample, ComposedKernelMatchesReferenceSubspace) {
  const ComposedDirac c = compose(bg, sampler);
  ASSERT_EQ(c.kernel.F.rows(), static_cast<std::size_t>(4 * n));
  ASSERT_EQ(c.kernel.F.cols(), static_cast<std::size_t>(4 * n));
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> pt = sampler.draw();
    const MatrixXd u = evaluate(bg.element(index_of(bg, "TF")).matrix, pt);
    // Ports (-f3, -f4, -f6, f5) and (e3, e4, e6, e5).
    const MatrixXd f = blocks(n, {{o, o, o, o}, {-i, u, o, u}, {-i, o, i, o}, {o, o, o, o}});
    const MatrixXd e = blocks(n, {{u, o, u, i}, {o, o, o, o}, {o, o, o, o}, {o, -i, o, i}});
    MatrixXd fe(f.rows(), 2 * f.cols());
    fe << f, e;
    const NumericSubspace ref = null_space(fe);
    const NumericSubspace got = kernel_subspace(c.kernel, pt);
    ASSERT_EQ(got.dimension(), ref.dimension());
    const auto angles = principal_angles(ref, got);
    EXPECT_LE(angles.back(), 1e-10);
  }
}

TEST_P(WorkedExample, LambdaSpansLeftKernelOfGamma) {
  const ComposedDirac c = compose(bg, sampler);
  EXPECT_EQ(c.lambda.rows(), static_cast<std::size_t>(4 * n));
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> pt = sampler.draw();
    const MatrixXd l = evaluate(c.lambda, pt);
    EXPECT_LE((l * evaluate(c.gamma_t, pt).transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(numeric_rank(l), static_cast<std::size_t>(4 * n));
  }
}

INSTANTIATE_TEST_SUITE_P(Dimensions, WorkedExample, ::testing::Values(1, 2, 3));

GraphSpec spec_of(long long n, std::vector<ElementSpec> elements, std::vector<BondSpec> bonds) {
  GraphSpec g;
  g.dimension = n;
  g.elements = std::move(elements);
  g.bonds = std::move(bonds);
  return g;
}

ElementSpec el(const std::string& id, ElementKind kind) { return {id, kind, std::nullopt, std::nullopt}; }

// Random values for the bond variables of an element, then the kernel
// residual F (sign * f) + E e.
MatrixXd residual_for(const DiracKernel& d, const std::vector<double>& pt, const std::vector<MatrixXd>& f,
                      const std::vector<MatrixXd>& e) {
  const Eigen::Index n = f[0].rows();
  MatrixXd fv(static_cast<Eigen::Index>(f.size()) * n, 1), ev(fv.rows(), 1);
  for (std::size_t p = 0; p < f.size(); ++p) {
    fv.block(static_cast<Eigen::Index>(p) * n, 0, n, 1) = d.signs[p] * f[p];
    ev.block(static_cast<Eigen::Index>(p) * n, 0, n, 1) = e[p];
  }
  return evaluate(d.F, pt) * fv + evaluate(d.E, pt) * ev;
}

TEST(ElementaryDirac, GyratorRelations) {
  for (long long n : {1, 2}) {
    std::vector<std::vector<std::string>> v(static_cast<std::size_t>(n), std::vector<std::string>(n, "0"));
    for (long long r = 0; r < n; ++r)
      for (long long c = 0; c < n; ++c) v[r][c] = std::to_string(r + 2 * c + 1) + (r == c ? " + x_C_1^2" : "");
    const BondGraph bg = build_bondgraph(
        spec_of(n,
                {el("Sf", ElementKind::Sf), el("A", ElementKind::One), {"GY", ElementKind::GY, std::nullopt, v},
                 el("B", ElementKind::Zero), {"C", ElementKind::C, "x_C_1^2/2", std::nullopt},
                 el("Se", ElementKind::Se)},
                {{1, "Sf", "A"}, {2, "A", "GY"}, {3, "GY", "B"}, {4, "B", "C"}, {5, "Se", "A"}}));
    const DiracKernel d = elementary_dirac(bg, *bg.find_element("GY"));
    Sampler s(bg.symbols(), 5);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int t = 0; t < 5; ++t) {
      const std::vector<double> pt = s.draw();
      const MatrixXd vm = evaluate(bg.element(*bg.find_element("GY")).matrix, pt);
      MatrixXd fj(n, 1), fk(n, 1);
      for (long long k = 0; k < n; ++k) fj(k) = g(rng), fk(k) = g(rng);
      // e_in = V f_out, e_out = V^T f_in
      const MatrixXd ej = vm * fk, ek = vm.transpose() * fj;
      EXPECT_LE(residual_for(d, pt, {fj, fk}, {ej, ek}).cwiseAbs().maxCoeff(), 1e-12);
      MatrixXd fe(2 * n, 4 * n);
      fe << evaluate(d.F, pt), evaluate(d.E, pt);
      EXPECT_EQ(numeric_rank(fe), static_cast<std::size_t>(2 * n));
    }
  }
}

TEST(ElementaryDirac, JunctionRelationsAtHigherDegree) {
  const BondGraph bg = build_bondgraph(
      spec_of(2,
              {el("J", ElementKind::Zero), el("K", ElementKind::One), el("Sf", ElementKind::Sf),
               el("Se", ElementKind::Se), {"C1", ElementKind::C, "x_C1_1^2 + x_C1_2^2", std::nullopt},
               {"C2", ElementKind::C, "x_C2_1^2 + x_C2_2^2", std::nullopt},
               {"R", ElementKind::R, std::nullopt, std::vector<std::vector<std::string>>{{"1", "0"}, {"0", "1"}}}},
              {{1, "Sf", "J"}, {2, "J", "C1"}, {3, "J", "K"}, {4, "Se", "K"}, {5, "K", "C2"}, {6, "K", "R"}}));
  Sampler s(bg.symbols(), 5);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  auto vec = [&] {
    MatrixXd v(2, 1);
    v << g(rng), g(rng);
    return v;
  };
  const std::vector<double> pt = s.draw();
  {
    // 0-junction: equal efforts, inflow equals outflow. Ports: 1 in, 2 and 3 out.
    const DiracKernel d = elementary_dirac(bg, *bg.find_element("J"));
    const MatrixXd e = vec(), f2 = vec(), f3 = vec();
    EXPECT_LE(residual_for(d, pt, {f2 + f3, f2, f3}, {e, e, e}).cwiseAbs().maxCoeff(), 1e-12);
  }
  {
    // 1-junction: equal flows, incoming effort sum equals outgoing. Ports: 3, 4 in; 5, 6 out.
    const DiracKernel d = elementary_dirac(bg, *bg.find_element("K"));
    const MatrixXd f = vec(), e3 = vec(), e4 = vec(), e5 = vec();
    EXPECT_LE(residual_for(d, pt, {f, f, f, f}, {e3, e4, e5, e3 + e4 - e5}).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ElementaryDirac, PowerConservingAtSamples) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const BondGraph bg = build_bondgraph(random_graph_spec(seed));
    Sampler s(bg.symbols(), seed);
    for (std::size_t el : bg.partition().interior_elements) {
      const DiracKernel d = elementary_dirac(bg, el);
      EXPECT_NO_THROW(verify_dirac(d, s, 20, bg.element(el).id));
    }
  }
}

TEST(OrthogonalTransform, IdentityAndPermutation) {
  const BondGraph bg = example_graph(1);
  Sampler s(bg.symbols(), 1);
  const DiracKernel d = elementary_dirac(bg, *bg.find_element("J0"));
  const DiracKernel same = apply_orthogonal_transform(d, SymMatrix::identity(3), s);
  const std::vector<double> pt = s.draw();
  EXPECT_EQ(evaluate(same.F, pt), evaluate(d.F, pt));
  EXPECT_EQ(evaluate(same.E, pt), evaluate(d.E, pt));

  MatrixXd p = MatrixXd::Zero(3, 3);
  p(0, 1) = p(1, 0) = p(2, 2) = 1;
  const DiracKernel swapped = apply_orthogonal_transform(d, SymMatrix::from_numeric(p), s);
  const MatrixXd f = evaluate(d.F, pt), fs = evaluate(swapped.F, pt);
  const MatrixXd e = evaluate(d.E, pt), es = evaluate(swapped.E, pt);
  EXPECT_EQ(fs.col(0), f.col(1));
  EXPECT_EQ(fs.col(1), f.col(0));
  EXPECT_EQ(es.col(0), e.col(1));
  EXPECT_EQ(es.col(2), e.col(2));
}

TEST(OrthogonalTransform, SignFlipTurnsZeroPatternIntoOnePattern) {
  // Swapping the roles of F and E in the 0-junction pattern and flipping the
  // sign of the outgoing ports yields the 1-junction pattern.
  const BondGraph bg = example_graph(1);
  Sampler s(bg.symbols(), 2);
  const DiracKernel zero = elementary_dirac(bg, *bg.find_element("J0"));
  DiracKernel dual{zero.E, zero.F, zero.ports, zero.signs};
  MatrixXd t = MatrixXd::Identity(3, 3);
  t(2, 2) = -1;
  const DiracKernel flipped = apply_orthogonal_transform(dual, SymMatrix::from_numeric(t), s);
  const std::vector<double> pt = s.draw();
  MatrixXd theta(3, 3), psi(3, 3);
  theta << 0, 0, 0, 1, -1, 0, 1, 0, -1;
  psi << 1, 1, 1, 0, 0, 0, 0, 0, 0;
  EXPECT_EQ(evaluate(flipped.F, pt), theta * t);
  EXPECT_EQ(evaluate(flipped.E, pt), psi * t);
}

TEST(OrthogonalTransform, RejectsNonOrthogonal) {
  const BondGraph bg = example_graph(1);
  Sampler s(bg.symbols(), 2);
  const DiracKernel d = elementary_dirac(bg, *bg.find_element("J0"));
  try {
    apply_orthogonal_transform(d, scale(SymMatrix::identity(3), Expr::integer(2)), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonOrthogonal);
  }
}

TEST(Compose, SingleJunctionIsItsOwnComposition) {
  const BondGraph bg = build_bondgraph(
      spec_of(1,
              {el("J", ElementKind::Zero), {"C", ElementKind::C, "x_C_1^2/2", std::nullopt},
               {"R", ElementKind::R, std::nullopt, std::vector<std::vector<std::string>>{{"2"}}},
               el("Se", ElementKind::Se)},
              {{1, "J", "C"}, {2, "J", "R"}, {3, "Se", "J"}}));
  Sampler s(bg.symbols(), 3);
  const ComposedDirac c = compose(bg, s);
  EXPECT_EQ(c.gamma_t.rows(), 0u);
  const std::vector<double> pt = s.draw();
  const DiracKernel el0 = reorder_interior_exterior(elementary_dirac(bg, 0), bg);
  // Same subspace after mapping the elementary ports onto C | R | Se order.
  EXPECT_EQ(c.kernel.F.cols(), 3u);
  const auto angles = principal_angles(kernel_subspace(c.kernel, pt), oracle_compose(bg, pt));
  EXPECT_LE(angles.back(), 1e-12);
  EXPECT_EQ(numeric_rank(evaluate(c.lambda, pt)), el0.F.rows());
}

TEST(Compose, EffortSourceOneJunctionStorage) {
  const BondGraph bg = build_bondgraph(spec_of(
      1, {el("Se", ElementKind::Se), el("J", ElementKind::One), {"C", ElementKind::C, "x_C_1^2/2", std::nullopt}},
      {{1, "Se", "J"}, {2, "J", "C"}}));
  Sampler s(bg.symbols(), 3);
  const ComposedDirac c = compose(bg, s);
  const std::vector<double> pt = s.draw();
  const NumericSubspace got = kernel_subspace(c.kernel, pt);
  EXPECT_EQ(got.dimension(), 2);
  EXPECT_LE(principal_angles(got, oracle_compose(bg, pt)).back(), 1e-12);
}

TEST(Compose, InvariantUnderLeftMultiplicationOfElementaryKernels) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const BondGraph bg = build_bondgraph(random_graph_spec(seed));
    Sampler s(bg.symbols(), seed);
    const ComposedDirac plain = compose(bg, s);
    std::vector<DiracKernel> mixed;
    for (const DiracKernel& d : plain.elementary) {
      const auto r = static_cast<Eigen::Index>(d.F.rows());
      MatrixXd t;
      do {
        t = MatrixXd::Identity(r, r);
        for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] += unit(rng);
      } while (std::abs(t.determinant()) < 0.1);
      const SymMatrix ts = SymMatrix::from_numeric(t);
      mixed.push_back({matmul(ts, d.F), matmul(ts, d.E), d.ports, d.signs});
    }
    const ComposedDirac other = compose(bg, mixed, build_interconnection(bg), s);
    for (int p = 0; p < 5; ++p) {
      const std::vector<double> pt = s.draw();
      EXPECT_LE(principal_angles(kernel_subspace(plain.kernel, pt), kernel_subspace(other.kernel, pt)).back(), 1e-8)
          << "seed " << seed;
    }
  }
}

TEST(Compose, PowerIsConservedOnRandomElements) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 100; ++seed) {
    const BondGraph bg = build_bondgraph(random_graph_spec(seed));
    Sampler s(bg.symbols(), seed);
    const ComposedDirac c = compose(bg, s);
    for (int p = 0; p < 10 && checked < 100; ++p, ++checked) {
      const std::vector<double> pt = s.draw();
      const NumericSubspace k = kernel_subspace(c.kernel, pt);
      Eigen::VectorXd coeff(k.dimension());
      for (Eigen::Index j = 0; j < coeff.size(); ++j) coeff(j) = g(rng);
      const Eigen::VectorXd v = k.basis * coeff;
      const Eigen::Index half = v.size() / 2;
      // Flow columns are sign * f, so the pairing of the ports is plain e . f.
      EXPECT_LE(std::abs(v.head(half).dot(v.tail(half))), 1e-8 * (1.0 + v.squaredNorm()));
    }
  }
}

TEST(Compose, DegenerateInterconnectionIsReported) {
  // A unit transformer looping back onto its own junction: the two bond
  // equations coincide and Gamma^T loses rank.
  const BondGraph bg = build_bondgraph(
      spec_of(1,
              {el("J", ElementKind::Zero), {"TF", ElementKind::TF, std::nullopt,
                                             std::vector<std::vector<std::string>>{{"1"}}},
               el("Sf", ElementKind::Sf), {"C", ElementKind::C, "x_C_1^2/2", std::nullopt}},
              {{1, "J", "TF"}, {2, "TF", "J"}, {3, "Sf", "J"}, {4, "J", "C"}}));
  Sampler s(bg.symbols(), 3);
  try {
    compose(bg, s);
    FAIL() << "expected a degenerate interconnection";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateInterconnection) << e.what();
    EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
  }
}

}  // namespace
}  // namespace bg2phs
