#include "bg2phs/phs.hpp"

#include <algorithm>
#include <cmath>

namespace bg2phs {

PortCounts port_counts(const BondGraph& bg) {
  const std::size_t n = bg.dimension();
  PortCounts pc;
  pc.c = n * bg.elements_of_kind(ElementKind::C).size();
  pc.r = n * bg.elements_of_kind(ElementKind::R).size();
  pc.sf = n * bg.elements_of_kind(ElementKind::Sf).size();
  pc.se = n * bg.elements_of_kind(ElementKind::Se).size();
  return pc;
}

namespace {

enum class Side { F, E };

struct Col {
  Side side;
  std::size_t index;
};

// Kernel evaluated once at a batch of points; rank queries over column
// subsets reuse the values.
class NumericKernel {
 public:
  NumericKernel(const DiracKernel& d, Sampler& sampler, int trials) {
    std::vector<Expr> all(d.F.entries());
    all.insert(all.end(), d.E.entries().begin(), d.E.entries().end());
    const Program joint(all);
    MatrixProgram pf(d.F), pe(d.E);
    for (int t = 0; t < trials; ++t) {
      const std::vector<double> x = sampler.valid_point(joint);
      f_.push_back(pf(x));
      e_.push_back(pe(x));
    }
  }

  std::size_t rank(const std::vector<Col>& cols) const {
    if (cols.empty()) return 0;
    std::size_t best = 0;
    for (std::size_t t = 0; t < f_.size(); ++t) {
      Eigen::MatrixXd m(f_[t].rows(), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k)
        m.col(static_cast<Eigen::Index>(k)) =
            (cols[k].side == Side::F ? f_[t] : e_[t]).col(static_cast<Eigen::Index>(cols[k].index));
      best = std::max(best, numeric_rank(m));
    }
    return best;
  }

 private:
  std::vector<Eigen::MatrixXd> f_, e_;
};

void append(std::vector<Col>& cols, Side side, std::size_t start, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) cols.push_back({side, start + k});
}

std::vector<Col> base_columns(const PortCounts& pc) {
  std::vector<Col> cols;
  append(cols, Side::F, 0, pc.c);
  append(cols, Side::E, pc.c + pc.r, pc.sf);
  append(cols, Side::F, pc.c + pc.r + pc.sf, pc.se);
  return cols;
}

SymMatrix columns(const SymMatrix& m, std::size_t start, std::size_t count) {
  return m.block(0, start, m.rows(), count);
}

SymMatrix columns(const SymMatrix& m, std::size_t offset, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> c;
  for (std::size_t i : idx) c.push_back(offset + i);
  return m.select_columns(c);
}

}  // namespace

CheckReport check_necessary(const DiracKernel& d, const PortCounts& pc, Sampler& sampler, int trials) {
  CheckReport r;
  r.required = pc.sf + pc.se;
  if (r.required > 0) {
    std::vector<Col> cols;
    append(cols, Side::E, pc.c + pc.r, pc.sf);
    append(cols, Side::F, pc.c + pc.r + pc.sf, pc.se);
    r.rank = NumericKernel(d, sampler, trials).rank(cols);
  }
  r.passed = r.rank == r.required;
  if (!r.passed) r.message = kDependentSourcesMessage;
  return r;
}

CheckReport check_sufficient(const DiracKernel& d, const PortCounts& pc, Sampler& sampler, int trials) {
  CheckReport r;
  r.required = pc.c + pc.sf + pc.se;
  if (r.required > 0) r.rank = NumericKernel(d, sampler, trials).rank(base_columns(pc));
  r.passed = r.rank == r.required;
  if (!r.passed) r.message = kDependentStoragesMessage;
  return r;
}

Splitting split_resistor_columns(const DiracKernel& d, const PortCounts& pc, Sampler& sampler, int trials) {
  Splitting s;
  if (pc.r == 0) return s;
  const NumericKernel nk(d, sampler, trials);
  std::vector<Col> cols = base_columns(pc);
  std::size_t rank = nk.rank(cols);
  for (std::size_t j = 0; j < pc.r; ++j) {
    cols.push_back({Side::F, pc.c + j});
    const std::size_t r = nk.rank(cols);
    if (r > rank) {
      rank = r;
      s.group1.push_back(j);
    } else {
      cols.pop_back();
      s.group2.push_back(j);
    }
  }
  return s;
}

std::vector<Splitting> alternative_splittings(const DiracKernel& d, const PortCounts& pc, const Splitting& first,
                                              std::size_t limit, Sampler& sampler, int trials) {
  std::vector<Splitting> out;
  if (pc.r == 0 || limit == 0) return out;
  const NumericKernel nk(d, sampler, trials);
  const std::vector<Col> base = base_columns(pc);
  const std::size_t k = first.group1.size();
  const std::size_t target = base.size() + k;

  // Lexicographic k-subsets of the R columns, with a bound on the work.
  std::vector<std::size_t> pick(k);
  for (std::size_t i = 0; i < k; ++i) pick[i] = i;
  std::size_t examined = 0;
  for (;;) {
    if (++examined > 20000) break;
    if (pick != first.group1) {
      std::vector<Col> cols = base;
      for (std::size_t j : pick) cols.push_back({Side::F, pc.c + j});
      if (nk.rank(cols) == target) {
        Splitting s;
        s.group1 = pick;
        for (std::size_t j = 0; j < pc.r; ++j)
          if (!std::binary_search(pick.begin(), pick.end(), j)) s.group2.push_back(j);
        out.push_back(std::move(s));
        if (out.size() >= limit) break;
      }
    }
    if (k == 0) break;
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == pc.r - k + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

ExplicitDirac compute_Z(const DiracKernel& d, const PortCounts& pc, const Splitting& s, Sampler& sampler,
                        int trials) {
  const SymMatrix& F = d.F;
  const SymMatrix& E = d.E;
  const std::size_t r0 = pc.c, sf0 = pc.c + pc.r, se0 = sf0 + pc.sf;
  const SymMatrix x = hcat({columns(F, 0, pc.c), columns(F, r0, s.group1), columns(E, r0, s.group2),
                            columns(E, sf0, pc.sf), columns(F, se0, pc.se)});
  const SymMatrix y = hcat({columns(E, 0, pc.c), columns(E, r0, s.group1), columns(F, r0, s.group2),
                            columns(F, sf0, pc.sf), columns(E, se0, pc.se)});
  SymMatrix inv;
  try {
    inv = symbolic_inverse(x, sampler, trials);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Singular) throw;
    throw Error(ErrorCode::InternalConsistency,
                std::string("explicit form: left factor is singular despite passing the rank checks (") + e.what() + ")");
  }
  ExplicitDirac ed;
  ed.Z = settle(negate(matmul(inv, y)), sampler, trials);
  ed.splitting = s;
  ed.nc = pc.c;
  ed.nr = pc.r;
  ed.np = pc.sf + pc.se;
  if (!vanishes(add(ed.Z, transpose(ed.Z)), sampler, trials, 1e-8))
    throw Error(ErrorCode::InternalConsistency, "explicit form: Z is not skew-symmetric");
  return ed;
}

double min_symmetric_eigenvalue(const Eigen::MatrixXd& q) {
  if (q.rows() == 0) return 0.0;
  const Eigen::MatrixXd sym = 0.5 * (q + q.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

ResistiveForm resistive_io_form(const BondGraph& bg, const Splitting& s, Sampler& sampler, int trials,
                                int psd_points) {
  ResistiveForm rf;
  std::vector<SymMatrix> blocks;
  for (std::size_t el : bg.elements_of_kind(ElementKind::R)) blocks.push_back(bg.element(el).matrix);
  if (blocks.empty()) return rf;
  rf.order = s.group1;
  rf.order.insert(rf.order.end(), s.group2.begin(), s.group2.end());
  const SymMatrix d = block_diag(blocks).select_columns(rf.order).select_rows(rf.order);
  const std::size_t k = s.group1.size();
  const std::size_t m = d.rows() - k;
  if (k == 0) {
    rf.Rt = d;
  } else {
    const SymMatrix d11 = d.block(0, 0, k, k);
    const SymMatrix d12 = d.block(0, k, k, m);
    const SymMatrix d21 = d.block(k, 0, m, k);
    const SymMatrix d22 = d.block(k, k, m, m);
    SymMatrix inv;
    try {
      inv = symbolic_inverse(d11, sampler, trials);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Singular) throw;
      throw Error(ErrorCode::ResistiveSplitting, "resistive block of group 1 is singular");
    }
    const SymMatrix t12 = matmul(inv, d12);
    const SymMatrix t21 = negate(matmul(d21, inv));
    const SymMatrix t22 = subtract(d22, matmul(matmul(d21, inv), d12));
    rf.Rt = vcat({hcat({inv, t12}), hcat({t21, t22})});
  }
  rf.Rt = settle(rf.Rt, sampler, trials);
  if (!vanishes(subtract(rf.Rt, transpose(rf.Rt)), sampler, trials, 1e-8))
    throw Error(ErrorCode::ResistiveSplitting, "resistive input-output map is not symmetric");
  MatrixProgram prog(rf.Rt);
  for (int t = 0; t < psd_points; ++t) {
    const Eigen::MatrixXd v = prog(sampler.valid_point(prog.program()));
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    if (min_symmetric_eigenvalue(v) < -1e-8 * scale)
      throw Error(ErrorCode::ResistiveSplitting, "resistive input-output map is not positive semidefinite");
  }
  return rf;
}

void port_labels(const BondGraph& bg, std::vector<std::string>& inputs, std::vector<std::string>& outputs) {
  inputs.clear();
  outputs.clear();
  for (ElementKind kind : {ElementKind::Sf, ElementKind::Se}) {
    const bool flow_source = kind == ElementKind::Sf;
    for (std::size_t el : bg.elements_of_kind(kind))
      for (std::size_t k = 0; k < bg.dimension(); ++k) {
        const std::string suffix = "_" + bg.element(el).id + "_" + std::to_string(k + 1);
        inputs.push_back((flow_source ? "f" : "e") + suffix);
        outputs.push_back((flow_source ? "e" : "f") + suffix);
      }
  }
}

std::vector<std::string> PhsModel::state_names() const {
  std::vector<std::string> names;
  for (std::size_t id : states) names.push_back(symbols[id].name);
  return names;
}

SymMatrix dissipation_matrix(const PhsModel& m) {
  return vcat({hcat({m.R, m.P}), hcat({transpose(m.P), m.S})});
}

PhsModel assemble_phs(const ExplicitDirac& ed, const ResistiveForm& rf, const BondGraph& bg, Sampler& sampler,
                      int trials) {
  const std::size_t nc = ed.nc, nr = ed.nr, np = ed.np;
  const SymMatrix& z = ed.Z;
  const SymMatrix z_cc = z.block(0, 0, nc, nc);
  const SymMatrix z_cr = negate(z.block(0, nc, nc, nr));
  const SymMatrix z_cp = negate(z.block(0, nc + nr, nc, np));
  const SymMatrix z_rr = z.block(nc, nc, nr, nr);
  const SymMatrix z_rp = negate(z.block(nc, nc + nr, nr, np));
  const SymMatrix z_pp = z.block(nc + nr, nc + nr, np, np);

  PhsModel m;
  m.symbols = bg.symbols();
  m.states = bg.state_ids();
  m.hamiltonian = bg.hamiltonian();
  port_labels(bg, m.inputs, m.outputs);

  if (nr == 0) {
    m.J = negate(z_cc);
    m.R = SymMatrix(nc, nc);
    m.G = z_cp;
    m.P = SymMatrix(nc, np);
    m.M = z_pp;
    m.S = SymMatrix(np, np);
  } else {
    const SymMatrix& rt = rf.Rt;
    const SymMatrix k =
        settle(symbolic_inverse(add(SymMatrix::identity(nr), matmul(rt, z_rr)), sampler, trials), sampler, trials);
    const SymMatrix krt = matmul(k, rt);
    const SymMatrix rtkt = matmul(rt, transpose(k));
    const SymMatrix a = settle(subtract(krt, rtkt), sampler, trials);
    const SymMatrix b = settle(add(krt, rtkt), sampler, trials);
    const Expr half = Expr::constant(Rational(1, 2));
    const SymMatrix z_crt = transpose(z_cr);
    m.J = subtract(negate(z_cc), scale(matmul(matmul(z_cr, a), z_crt), half));
    m.R = scale(matmul(matmul(z_cr, b), z_crt), half);
    m.G = add(z_cp, scale(matmul(matmul(z_cr, a), z_rp), half));
    m.P = negate(scale(matmul(matmul(z_cr, b), z_rp), half));
    m.M = add(z_pp, scale(matmul(matmul(transpose(z_rp), a), z_rp), half));
    m.S = scale(matmul(matmul(transpose(z_rp), b), z_rp), half);
  }
  for (SymMatrix* mat : {&m.J, &m.R, &m.G, &m.P, &m.M, &m.S}) *mat = settle(*mat, sampler, trials);
  return m;
}

}  // namespace bg2phs
