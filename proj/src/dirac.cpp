#include "bg2phs/dirac.hpp"

#include <algorithm>
#include <cmath>

namespace bg2phs {

namespace {

SymMatrix eye(std::size_t n) { return SymMatrix::identity(n); }

void put(SymMatrix& m, std::size_t r0, std::size_t c0, const SymMatrix& b) {
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) m(r0 + i, c0 + j) = b(i, j);
}

void put_scaled_identity(SymMatrix& m, std::size_t r0, std::size_t c0, std::size_t n, long long s) {
  for (std::size_t i = 0; i < n; ++i) m(r0 + i, c0 + i) = Expr::integer(s);
}

}  // namespace

void verify_dirac(const DiracKernel& d, Sampler& sampler, int trials, const std::string& what) {
  if (d.F.rows() != d.E.rows() || d.F.cols() != d.E.cols())
    throw Error(ErrorCode::InternalConsistency, what + ": F is " + d.F.shape() + " but E is " + d.E.shape());
  if (d.F.rows() == 0) return;
  MatrixProgram pf(d.F), pe(d.E);
  std::vector<Expr> all(d.F.entries());
  all.insert(all.end(), d.E.entries().begin(), d.E.entries().end());
  const Program joint(all);
  for (int t = 0; t < trials; ++t) {
    const std::vector<double> x = sampler.valid_point(joint);
    const Eigen::MatrixXd f = pf(x), e = pe(x);
    const Eigen::MatrixXd s = e * f.transpose() + f * e.transpose();
    const double scale = 1.0 + (e.cwiseAbs() * f.cwiseAbs().transpose()).maxCoeff();
    if (s.cwiseAbs().maxCoeff() > 1e-8 * scale)
      throw Error(ErrorCode::InternalConsistency, what + ": E F^T + F E^T does not vanish");
    Eigen::MatrixXd fe(f.rows(), f.cols() + e.cols());
    fe << f, e;
    if (numeric_rank(fe) != static_cast<std::size_t>(f.rows()))
      throw Error(ErrorCode::InternalConsistency, what + ": (F E) is not of full row rank");
  }
}

DiracKernel elementary_dirac(const BondGraph& bg, std::size_t element) {
  const Element& el = bg.element(element);
  if (is_exterior(el.kind))
    throw Error(ErrorCode::InvalidArgument, "element '" + el.id + "' is not a junction-structure element");
  const std::size_t n = bg.dimension();

  DiracKernel d;
  for (int pass = 0; pass < 2; ++pass) {
    const bool incoming = pass == 0;
    for (int interior = 0; interior < 2; ++interior)
      for (std::size_t b : bg.incident(element)) {
        if ((bg.bonds()[b].head == element) != incoming) continue;
        if (bg.is_interior_bond(b) != (interior == 1)) continue;
        d.ports.push_back(b);
        d.signs.push_back(incoming ? 1 : -1);
      }
  }
  const std::size_t deg = d.ports.size();
  const std::size_t w = n * deg;
  d.F = SymMatrix(w, w);
  d.E = SymMatrix(w, w);

  switch (el.kind) {
    case ElementKind::Zero:
    case ElementKind::One: {
      // psi: first block row sums all ports; theta: differences to port 0.
      SymMatrix psi(w, w), theta(w, w);
      for (std::size_t k = 0; k < deg; ++k) put_scaled_identity(psi, 0, k * n, n, 1);
      for (std::size_t k = 1; k < deg; ++k) {
        put_scaled_identity(theta, k * n, 0, n, 1);
        put_scaled_identity(theta, k * n, k * n, n, -1);
      }
      if (el.kind == ElementKind::Zero) {
        d.F = psi;
        d.E = theta;
      } else {
        SymMatrix t(w, w);
        for (std::size_t k = 0; k < deg; ++k) put_scaled_identity(t, k * n, k * n, n, d.signs[k]);
        d.F = matmul(theta, t);
        d.E = matmul(psi, t);
      }
      break;
    }
    case ElementKind::TF:
      put_scaled_identity(d.F, 0, 0, n, 1);
      put(d.F, 0, n, el.matrix);
      put(d.E, n, 0, negate(transpose(el.matrix)));
      put_scaled_identity(d.E, n, n, n, 1);
      break;
    case ElementKind::GY:
      put(d.F, 0, n, el.matrix);
      put(d.F, n, 0, negate(transpose(el.matrix)));
      d.E = eye(w);
      break;
    default:
      break;
  }
  return d;
}

DiracKernel apply_orthogonal_transform(const DiracKernel& d, const SymMatrix& t, Sampler& sampler, int trials) {
  if (t.rows() != d.F.cols() || t.cols() != d.F.cols())
    throw Error(ErrorCode::ShapeMismatch, "transform " + t.shape() + " does not match kernel width " +
                                              std::to_string(d.F.cols()));
  const SymMatrix gram = subtract(matmul(transpose(t), t), SymMatrix::identity(t.rows()));
  if (!vanishes(gram, sampler, trials, 1e-10))
    throw Error(ErrorCode::NonOrthogonal, "transform is not orthogonal at the sample points");
  DiracKernel out = d;
  const SymMatrix tt = transpose(t);
  out.F = matmul(d.F, tt);
  out.E = matmul(d.E, tt);
  return out;
}

std::size_t exterior_port_count(const DiracKernel& d, const BondGraph& bg) {
  return static_cast<std::size_t>(
      std::count_if(d.ports.begin(), d.ports.end(), [&](std::size_t b) { return !bg.is_interior_bond(b); }));
}

DiracKernel reorder_interior_exterior(const DiracKernel& d, const BondGraph& bg) {
  std::vector<std::size_t> order(d.ports.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool ia = bg.is_interior_bond(d.ports[a]);
    const bool ib = bg.is_interior_bond(d.ports[b]);
    if (ia != ib) return !ia;
    return d.ports[a] < d.ports[b];
  });
  const std::size_t n = bg.dimension();
  std::vector<std::size_t> cols;
  DiracKernel out;
  for (std::size_t k : order) {
    for (std::size_t c = 0; c < n; ++c) cols.push_back(k * n + c);
    out.ports.push_back(d.ports[k]);
    out.signs.push_back(d.signs[k]);
  }
  out.F = d.F.select_columns(cols);
  out.E = d.E.select_columns(cols);
  return out;
}

InterconnectionStructure build_interconnection(const BondGraph& bg) {
  const std::size_t n = bg.dimension();
  const auto& ib = bg.partition().interior_bonds;
  const std::size_t m = ib.size();
  InterconnectionStructure ic;
  for (std::size_t el : bg.partition().interior_elements) {
    std::vector<std::size_t> bonds;
    for (std::size_t b : bg.incident(el))
      if (bg.is_interior_bond(b)) bonds.push_back(b);
    std::sort(bonds.begin(), bonds.end());
    SymMatrix f(2 * n * m, n * bonds.size()), e(2 * n * m, n * bonds.size());
    for (std::size_t c = 0; c < bonds.size(); ++c) {
      const std::size_t k = static_cast<std::size_t>(std::find(ib.begin(), ib.end(), bonds[c]) - ib.begin());
      const bool head = bg.bonds()[bonds[c]].head == el;
      put_scaled_identity(f, k * n, c * n, n, 1);
      put_scaled_identity(e, n * m + k * n, c * n, n, head ? 1 : -1);
    }
    ic.elements.push_back(el);
    ic.F.push_back(std::move(f));
    ic.E.push_back(std::move(e));
    ic.bonds.push_back(std::move(bonds));
  }
  return ic;
}

ComposedDirac compose(const BondGraph& bg, Sampler& sampler, int trials) {
  std::vector<DiracKernel> elementary;
  for (std::size_t el : bg.partition().interior_elements) {
    DiracKernel d = reorder_interior_exterior(elementary_dirac(bg, el), bg);
    verify_dirac(d, sampler, trials, "elementary structure of '" + bg.element(el).id + "'");
    elementary.push_back(std::move(d));
  }
  return compose(bg, std::move(elementary), build_interconnection(bg), sampler, trials);
}

ComposedDirac compose(const BondGraph& bg, std::vector<DiracKernel> elementary,
                      const InterconnectionStructure& ic, Sampler& sampler, int trials) {
  const std::size_t n = bg.dimension();
  const std::size_t m_i = bg.partition().interior_bonds.size();
  const std::size_t m_e = bg.partition().exterior_bonds.size();
  if (elementary.size() != ic.elements.size())
    throw Error(ErrorCode::InvalidArgument, "one elementary kernel per interior element is required");

  ComposedDirac out;
  std::vector<std::size_t> row_offset;
  std::vector<SymMatrix> gamma_blocks;
  std::size_t total_rows = 0;
  for (std::size_t i = 0; i < elementary.size(); ++i) {
    const DiracKernel& d = elementary[i];
    const std::size_t ext = exterior_port_count(d, bg) * n;
    const SymMatrix f_int = d.F.block(0, ext, d.F.rows(), d.F.cols() - ext);
    const SymMatrix e_int = d.E.block(0, ext, d.E.rows(), d.E.cols() - ext);
    gamma_blocks.push_back(add(matmul(ic.F[i], transpose(e_int)), matmul(ic.E[i], transpose(f_int))));
    row_offset.push_back(total_rows);
    total_rows += d.F.rows();
  }
  out.gamma_t = gamma_blocks.empty() ? SymMatrix(2 * n * m_i, 0) : hcat(gamma_blocks);

  const std::size_t rank = out.gamma_t.empty() ? 0 : generic_rank(out.gamma_t, sampler, trials);
  if (rank != 2 * n * m_i)
    throw Error(ErrorCode::DegenerateInterconnection,
                "Gamma^T has rank " + std::to_string(rank) + ", expected " + std::to_string(2 * n * m_i));
  const SymMatrix lambda_t = symbolic_nullspace(out.gamma_t, sampler, trials);
  if (lambda_t.cols() != n * m_e)
    throw Error(ErrorCode::DegenerateInterconnection,
                "left kernel of Gamma has dimension " + std::to_string(lambda_t.cols()) + ", expected " +
                    std::to_string(n * m_e));
  out.lambda = transpose(lambda_t);

  // Exterior ports in C | R | Sf | Se order.
  std::vector<std::size_t> ext_elements;
  for (ElementKind k : {ElementKind::C, ElementKind::R, ElementKind::Sf, ElementKind::Se})
    for (std::size_t el : bg.elements_of_kind(k)) ext_elements.push_back(el);

  std::vector<SymMatrix> f_blocks, e_blocks;
  for (std::size_t el : ext_elements) {
    const std::size_t bond = bg.incident(el).front();
    const std::size_t owner = bg.interior_end(bond);
    const std::size_t i = static_cast<std::size_t>(
        std::find(ic.elements.begin(), ic.elements.end(), owner) - ic.elements.begin());
    const DiracKernel& d = elementary[i];
    const std::size_t port = static_cast<std::size_t>(std::find(d.ports.begin(), d.ports.end(), bond) - d.ports.begin());
    const SymMatrix li = out.lambda.block(0, row_offset[i], out.lambda.rows(), d.F.rows());
    f_blocks.push_back(matmul(li, d.F.block(0, port * n, d.F.rows(), n)));
    e_blocks.push_back(matmul(li, d.E.block(0, port * n, d.E.rows(), n)));
    out.kernel.ports.push_back(bond);
    out.kernel.signs.push_back(d.signs[port]);
    out.layout.add(bg.element(el).id, n);
  }
  out.kernel.F = settle(hcat(f_blocks), sampler, trials);
  out.kernel.E = settle(hcat(e_blocks), sampler, trials);
  verify_dirac(out.kernel, sampler, trials, "composed junction structure");
  out.elementary = std::move(elementary);
  return out;
}

}  // namespace bg2phs
