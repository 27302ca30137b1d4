#include "bg2phs/verify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "bg2phs/sim.hpp"

namespace bg2phs {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double tolerance(const VectorXd& sv, double rel_tol) {
  return rel_tol * (sv.size() > 0 ? sv(0) : 0.0);
}

Index ix(std::size_t i) { return static_cast<Index>(i); }

// Exterior bonds in C | R | Sf | Se order, with the flow sign seen from the
// junction side.
std::vector<std::pair<std::size_t, int>> exterior_ports(const BondGraph& bg) {
  std::vector<std::pair<std::size_t, int>> out;
  for (ElementKind k : {ElementKind::C, ElementKind::R, ElementKind::Sf, ElementKind::Se}) {
    const int sign = (k == ElementKind::C || k == ElementKind::R) ? -1 : 1;
    for (std::size_t el : bg.elements_of_kind(k)) out.emplace_back(bg.incident(el).front(), sign);
  }
  return out;
}

}  // namespace

NumericSubspace column_space(const MatrixXd& m, double rel_tol) {
  if (m.cols() == 0 || m.rows() == 0) return {MatrixXd(m.rows(), 0)};
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU);
  const VectorXd& sv = svd.singularValues();
  const double tol = tolerance(sv, rel_tol);
  Index r = 0;
  while (r < sv.size() && sv(r) > tol) ++r;
  return {svd.matrixU().leftCols(r)};
}

NumericSubspace null_space(const MatrixXd& m, double rel_tol) {
  if (m.cols() == 0) return {MatrixXd(0, 0)};
  if (m.rows() == 0) return {MatrixXd::Identity(m.cols(), m.cols())};
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  const double tol = tolerance(sv, rel_tol);
  Index r = 0;
  while (r < sv.size() && sv(r) > tol) ++r;
  return {svd.matrixV().rightCols(m.cols() - r)};
}

NumericSubspace kernel_subspace(const DiracKernel& d, std::span<const double> point) {
  const MatrixXd f = evaluate(d.F, point);
  const MatrixXd e = evaluate(d.E, point);
  MatrixXd fe(f.rows(), f.cols() + e.cols());
  fe << f, e;
  return null_space(fe);
}

NumericSubspace oracle_compose(const BondGraph& bg, std::span<const double> point) {
  const std::size_t n = bg.dimension();
  const std::size_t m = bg.bonds().size();
  const Index width = ix(2 * n * m);
  auto fcol = [&](std::size_t b) { return ix(b * n); };
  auto ecol = [&](std::size_t b) { return ix((m + b) * n); };
  const MatrixXd id = MatrixXd::Identity(ix(n), ix(n));

  std::deque<MatrixXd> blocks;
  auto new_rows = [&]() -> MatrixXd& {
    blocks.push_back(MatrixXd::Zero(ix(n), width));
    return blocks.back();
  };

  for (std::size_t el : bg.partition().interior_elements) {
    const Element& e = bg.element(el);
    const auto& inc = bg.incident(el);
    auto incoming = [&](std::size_t b) { return bg.bonds()[b].head == el; };
    switch (e.kind) {
      case ElementKind::Zero:
      case ElementKind::One: {
        const bool zero = e.kind == ElementKind::Zero;
        // Shared variable: effort at a 0-junction, flow at a 1-junction.
        auto shared = [&](std::size_t b) { return zero ? ecol(b) : fcol(b); };
        auto summed = [&](std::size_t b) { return zero ? fcol(b) : ecol(b); };
        for (std::size_t k = 1; k < inc.size(); ++k) {
          MatrixXd& r = new_rows();
          r.block(0, shared(inc[0]), ix(n), ix(n)) += id;
          r.block(0, shared(inc[k]), ix(n), ix(n)) -= id;
        }
        MatrixXd& r = new_rows();
        for (std::size_t b : inc) r.block(0, summed(b), ix(n), ix(n)) += incoming(b) ? id : MatrixXd(-id);
        break;
      }
      case ElementKind::TF:
      case ElementKind::GY: {
        const std::size_t j = incoming(inc[0]) ? inc[0] : inc[1];
        const std::size_t k = incoming(inc[0]) ? inc[1] : inc[0];
        const MatrixXd u = evaluate(e.matrix, point);
        MatrixXd& r1 = new_rows();
        MatrixXd& r2 = new_rows();
        if (e.kind == ElementKind::TF) {
          // f_j = U f_k, e_k = U^T e_j
          r1.block(0, fcol(j), ix(n), ix(n)) = id;
          r1.block(0, fcol(k), ix(n), ix(n)) = -u;
          r2.block(0, ecol(k), ix(n), ix(n)) = id;
          r2.block(0, ecol(j), ix(n), ix(n)) = -u.transpose();
        } else {
          // e_j = V f_k, e_k = V^T f_j
          r1.block(0, ecol(j), ix(n), ix(n)) = id;
          r1.block(0, fcol(k), ix(n), ix(n)) = -u;
          r2.block(0, ecol(k), ix(n), ix(n)) = id;
          r2.block(0, fcol(j), ix(n), ix(n)) = -u.transpose();
        }
        break;
      }
      default:
        break;
    }
  }

  MatrixXd eqs(ix(blocks.size() * n), width);
  for (std::size_t i = 0; i < blocks.size(); ++i) eqs.middleRows(ix(i * n), ix(n)) = blocks[i];
  const NumericSubspace sol = null_space(eqs);

  const auto ports = exterior_ports(bg);
  const std::size_t ne = ports.size();
  MatrixXd proj = MatrixXd::Zero(ix(2 * n * ne), width);
  for (std::size_t p = 0; p < ne; ++p) {
    const auto [b, sign] = ports[p];
    proj.block(ix(p * n), fcol(b), ix(n), ix(n)) = static_cast<double>(sign) * id;
    proj.block(ix((ne + p) * n), ecol(b), ix(n), ix(n)) = id;
  }
  return column_space(proj * sol.basis);
}

std::vector<double> principal_angles(const NumericSubspace& a, const NumericSubspace& b) {
  if (a.ambient() != b.ambient() || a.dimension() != b.dimension())
    throw Error(ErrorCode::ShapeMismatch,
                "subspaces of dimension " + std::to_string(a.dimension()) + " in R^" + std::to_string(a.ambient()) +
                    " and " + std::to_string(b.dimension()) + " in R^" + std::to_string(b.ambient()));
  if (a.dimension() == 0) return {};
  // Sines come from the residual of b after projecting onto a, which keeps
  // tiny angles accurate.
  const MatrixXd c = a.basis.transpose() * b.basis;
  const MatrixXd rest = b.basis - a.basis * c;
  Eigen::JacobiSVD<MatrixXd> sc(c);
  Eigen::JacobiSVD<MatrixXd> ss(rest);
  const Index k = a.dimension();
  std::vector<double> angles(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    const double cosv = sc.singularValues()(i);
    const double sinv = i < ss.singularValues().size() ? ss.singularValues()(ss.singularValues().size() - 1 - i) : 0.0;
    angles[static_cast<std::size_t>(i)] = std::atan2(sinv, cosv);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

bool subspace_equal(const NumericSubspace& a, const NumericSubspace& b, double tol) {
  if (a.ambient() != b.ambient() || a.dimension() != b.dimension()) return false;
  const auto angles = principal_angles(a, b);
  return angles.empty() || angles.back() <= tol;
}

MembershipResult phs_membership_check(const PhsModel& model, const BondGraph& bg, std::span<const double> point,
                                      std::span<const double> u, double tol) {
  const std::size_t n = bg.dimension();
  if (u.size() != model.inputs.size())
    throw Error(ErrorCode::ShapeMismatch, "input vector has " + std::to_string(u.size()) + " entries, expected " +
                                              std::to_string(model.inputs.size()));
  const ModelEvaluator ev(model);
  const ModelEvaluator::Values vals = ev.values(point);
  VectorXd uv(ix(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) uv(ix(i)) = u[i];
  const VectorXd xdot = (vals.J - vals.R) * vals.grad + (vals.G - vals.P) * uv;
  const VectorXd y = (vals.G + vals.P).transpose() * vals.grad + (vals.M + vals.S) * uv;

  const auto cs = bg.elements_of_kind(ElementKind::C);
  const auto rs = bg.elements_of_kind(ElementKind::R);
  const auto sfs = bg.elements_of_kind(ElementKind::Sf);
  const auto ses = bg.elements_of_kind(ElementKind::Se);
  const std::size_t ne = cs.size() + rs.size() + sfs.size() + ses.size();
  const Index half = ix(n * ne);

  VectorXd v0 = VectorXd::Zero(2 * half);
  MatrixXd l = MatrixXd::Zero(2 * half, ix(n * rs.size()));
  std::size_t port = 0;
  for (std::size_t i = 0; i < cs.size(); ++i, ++port) {
    v0.segment(ix(port * n), ix(n)) = -xdot.segment(ix(i * n), ix(n));
    v0.segment(half + ix(port * n), ix(n)) = vals.grad.segment(ix(i * n), ix(n));
  }
  for (std::size_t i = 0; i < rs.size(); ++i, ++port) {
    const MatrixXd d = evaluate(bg.element(rs[i]).matrix, point);
    l.block(ix(port * n), ix(i * n), ix(n), ix(n)) = -d;
    l.block(half + ix(port * n), ix(i * n), ix(n), ix(n)) = MatrixXd::Identity(ix(n), ix(n));
  }
  std::size_t input = 0;
  for (std::size_t i = 0; i < sfs.size(); ++i, ++port, ++input) {
    v0.segment(ix(port * n), ix(n)) = uv.segment(ix(input * n), ix(n));
    v0.segment(half + ix(port * n), ix(n)) = y.segment(ix(input * n), ix(n));
  }
  for (std::size_t i = 0; i < ses.size(); ++i, ++port, ++input) {
    v0.segment(ix(port * n), ix(n)) = y.segment(ix(input * n), ix(n));
    v0.segment(half + ix(port * n), ix(n)) = uv.segment(ix(input * n), ix(n));
  }

  const NumericSubspace q = oracle_compose(bg, point);
  const MatrixXd reject = MatrixXd::Identity(2 * half, 2 * half) - q.basis * q.basis.transpose();
  const VectorXd b = reject * v0;
  VectorXd r = b;
  if (l.cols() > 0) {
    const MatrixXd a = reject * l;
    const VectorXd er = a.completeOrthogonalDecomposition().solve(-b);
    r = a * er + b;
  }
  MembershipResult res;
  res.residual = r.norm() / (1.0 + v0.norm());
  res.member = res.residual <= tol;
  return res;
}

}  // namespace bg2phs
