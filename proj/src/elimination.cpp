// Gauss-Jordan elimination over expression matrices. Pivot rows are divided
// through by their pivot, except for a symbolic pivot that vanishes at one of
// the sample points, which is eliminated fraction-free.
// Every cell carries numeric shadows (value and magnitude) at a fixed batch of
// sample points, which decide zero tests without re-evaluating expressions.

#include <algorithm>
#include <cmath>
#include <optional>

#include "bg2phs/symmat.hpp"

namespace bg2phs {

namespace {

constexpr double kZeroRel = 1e-9;
constexpr double kUnclearLow = 1e-14;
constexpr double kUnclearHigh = 1e-6;
constexpr double kVerifyRel = 1e-8;
constexpr int kVerifyPoints = 20;

struct Cell {
  Expr e;
  std::vector<double> v;
  std::vector<double> m;
  bool zero = true;
};

std::optional<Rational> small_rational(double v) {
  for (long long den = 1; den <= 64; ++den) {
    const double num = std::round(v * static_cast<double>(den));
    if (std::abs(num) > 1e12) return std::nullopt;
    if (std::abs(num / static_cast<double>(den) - v) <= 1e-12 * std::max(1.0, std::abs(v)))
      return Rational(static_cast<long long>(num), den);
  }
  return std::nullopt;
}

class Eliminator {
 public:
  Eliminator(const SymMatrix& a, const std::vector<std::vector<double>>& points)
      : rows_(a.rows()), cols_(a.cols()), k_(points.size()), cells_(rows_ * cols_) {
    for (const auto& p : points) {
      std::vector<Rational> q(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) q[i] = Rational(p[i]);
      exact_points_.push_back(std::move(q));
    }
    MatrixProgram prog(a);
    for (auto& c : cells_) {
      c.v.resize(k_);
      c.m.resize(k_);
    }
    for (std::size_t t = 0; t < k_; ++t) {
      Eigen::MatrixXd v, m;
      prog.run(points[t], v, m);
      numeric_rank_ = std::max(numeric_rank_, numeric_rank(v));
      for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) {
          at(i, j).v[t] = v(i, j);
          at(i, j).m[t] = m(i, j);
        }
    }
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) {
        at(i, j).e = a(i, j);
        tidy(at(i, j));
      }
  }

  // Eliminates on columns [0, limit). Afterwards each pivot row holds the
  // only nonzero entry of its pivot column.
  void run(std::size_t limit) {
    std::vector<bool> used(rows_, false);
    for (std::size_t col = 0; col < limit; ++col) {
      std::vector<double> colmax(k_, 0.0);
      for (std::size_t r = 0; r < rows_; ++r) {
        if (used[r] || at(r, col).zero) continue;
        for (std::size_t t = 0; t < k_; ++t) colmax[t] = std::max(colmax[t], std::abs(at(r, col).v[t]));
      }
      std::optional<std::size_t> best;
      for (std::size_t r = 0; r < rows_; ++r) {
        if (used[r] || at(r, col).zero) continue;
        if (!best || better(at(r, col), at(*best, col), colmax)) best = r;
      }
      if (!best) continue;
      const std::size_t pr = *best;
      if (at(pr, col).e.is_constant()) normalize_row(pr, at(pr, col).e.constant_value());
      else if (nonvanishing(at(pr, col))) divide_row(pr, col);
      for (std::size_t r = 0; r < rows_; ++r) {
        if (r == pr || at(r, col).zero) continue;
        eliminate(r, pr, col);
      }
      used[pr] = true;
      pivots_.push_back({pr, col});
    }
  }

  struct Pivot {
    std::size_t row;
    std::size_t col;
  };

  const std::vector<Pivot>& pivots() const { return pivots_; }
  std::size_t numeric_rank_at_points() const { return numeric_rank_; }
  const Cell& cell(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j]; }

 private:
  Cell& at(std::size_t i, std::size_t j) { return cells_[i * cols_ + j]; }

  bool nonvanishing(const Cell& c) const {
    for (std::size_t t = 0; t < k_; ++t)
      if (!(std::abs(c.v[t]) > kZeroRel * c.m[t])) return false;
    return true;
  }

  // Within a factor 10 of the largest candidate at every sample.
  bool sizeable(const Cell& c, const std::vector<double>& colmax) const {
    for (std::size_t t = 0; t < k_; ++t)
      if (!(std::abs(c.v[t]) >= 0.1 * colmax[t])) return false;
    return true;
  }

  // Sizeable pivots first, then constants, then pivots nonzero at every
  // sample, then smaller trees; ties keep the lower row.
  bool better(const Cell& a, const Cell& b, const std::vector<double>& colmax) const {
    const bool sa = sizeable(a, colmax), sb = sizeable(b, colmax);
    if (sa != sb) return sa;
    if (a.e.is_constant() != b.e.is_constant()) return a.e.is_constant();
    const bool na = nonvanishing(a), nb = nonvanishing(b);
    if (na != nb) return na;
    return a.e.tree_size() < b.e.tree_size();
  }

  void tidy(Cell& c) {
    if (c.e.is_constant()) {
      c.zero = c.e.is_zero_constant();
      const double d = to_double(c.e.constant_value());
      std::fill(c.v.begin(), c.v.end(), d);
      std::fill(c.m.begin(), c.m.end(), std::abs(d));
      return;
    }
    bool zero = true, unclear = false;
    for (std::size_t t = 0; t < k_; ++t) {
      const double a = std::abs(c.v[t]);
      if (a > kZeroRel * c.m[t] && c.v[t] != 0.0) zero = false;
      if (a > kUnclearLow * c.m[t] && a <= kUnclearHigh * c.m[t]) unclear = true;
    }
    if (unclear) settle_exactly(c, zero);
    c.zero = zero;
    if (zero) {
      c.e = Expr();
      std::fill(c.v.begin(), c.v.end(), 0.0);
      std::fill(c.m.begin(), c.m.end(), 0.0);
      return;
    }
    if (c.e.is_constant() || k_ < 2) return;
    const double v0 = c.v[0];
    for (std::size_t t = 1; t < k_; ++t)
      if (std::abs(c.v[t] - v0) > 1e-11 * std::max({1.0, std::abs(v0), c.m[t]})) return;
    if (auto q = small_rational(v0)) {
      c.e = Expr::constant(*q);
      const double d = to_double(*q);
      std::fill(c.v.begin(), c.v.end(), d);
      std::fill(c.m.begin(), c.m.end(), std::abs(d));
    }
  }

  // Shadows lost too much accuracy to decide; evaluate exactly at the sample
  // points and restart the shadows from the exact values.
  void settle_exactly(Cell& c, bool& zero) {
    std::vector<double> v(k_);
    bool all_zero = true;
    for (std::size_t t = 0; t < k_; ++t) {
      const auto q = eval_exact(c.e, exact_points_[t]);
      if (!q) return;
      v[t] = to_double(*q);
      if (*q != 0) all_zero = false;
    }
    zero = all_zero;
    c.v = v;
    for (std::size_t t = 0; t < k_; ++t) c.m[t] = std::abs(v[t]);
  }

  void normalize_row(std::size_t r, const Rational& p) {
    if (p == 1) return;
    const Expr inv = Expr::constant(1 / p);
    const double pd = to_double(p);
    for (std::size_t j = 0; j < cols_; ++j) {
      Cell& c = at(r, j);
      if (c.zero) continue;
      c.e = inv * c.e;
      for (std::size_t t = 0; t < k_; ++t) {
        c.v[t] /= pd;
        c.m[t] /= std::abs(pd);
      }
    }
  }

  // Symbolic pivot: the row is divided through so shadows stay on the scale
  // of ordinary Gauss-Jordan instead of growing with every fraction-free step.
  void divide_row(std::size_t r, std::size_t col) {
    const Cell p = at(r, col);
    for (std::size_t j = 0; j < cols_; ++j) {
      Cell& c = at(r, j);
      if (j == col) {
        c.e = Expr::integer(1);
        std::fill(c.v.begin(), c.v.end(), 1.0);
        std::fill(c.m.begin(), c.m.end(), 1.0);
        continue;
      }
      if (c.zero) continue;
      c.e = c.e / p.e;
      for (std::size_t t = 0; t < k_; ++t) {
        const double q = c.v[t] / p.v[t];
        c.m[t] = (c.m[t] + std::abs(q) * p.m[t]) / std::abs(p.v[t]);
        c.v[t] = q;
      }
      tidy(c);
    }
  }

  // row r <- p * row r - a * row pr, with p the pivot and a = row r's entry.
  void eliminate(std::size_t r, std::size_t pr, std::size_t col) {
    const Cell p = at(pr, col);
    const Cell a = at(r, col);
    const bool unit = p.e.is_one_constant();
    for (std::size_t j = 0; j < cols_; ++j) {
      Cell& c = at(r, j);
      const Cell& s = at(pr, j);
      if (j == col) {
        c.e = Expr();
        c.zero = true;
        std::fill(c.v.begin(), c.v.end(), 0.0);
        std::fill(c.m.begin(), c.m.end(), 0.0);
        continue;
      }
      if (c.zero && s.zero) continue;
      if (unit && s.zero) continue;
      Expr lhs = c.zero ? Expr() : (unit ? c.e : p.e * c.e);
      Expr rhs = s.zero ? Expr() : a.e * s.e;
      c.e = lhs - rhs;
      for (std::size_t t = 0; t < k_; ++t) {
        const double pv = unit ? 1.0 : p.v[t];
        const double pm = unit ? 1.0 : p.m[t];
        c.v[t] = pv * c.v[t] - a.v[t] * s.v[t];
        c.m[t] = pm * c.m[t] + a.m[t] * s.m[t];
      }
      tidy(c);
    }
  }

  std::size_t rows_, cols_, k_;
  std::vector<Cell> cells_;
  std::vector<Pivot> pivots_;
  std::size_t numeric_rank_ = 0;
  std::vector<std::vector<Rational>> exact_points_;
};

std::vector<std::vector<double>> draw_points(const Program& p, Sampler& sampler, int count) {
  std::vector<std::vector<double>> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) pts.push_back(sampler.valid_point(p));
  return pts;
}

// |A B - target| <= rel * (sum_k |A_ik| |B_kj| + 1) entrywise.
bool product_close(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& target) {
  const Eigen::MatrixXd r = a * b - target;
  const Eigen::MatrixXd scale = a.cwiseAbs() * b.cwiseAbs();
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      if (std::abs(r(i, j)) > kVerifyRel * (scale(i, j) + 1.0)) return false;
  return true;
}

}  // namespace

SymMatrix symbolic_nullspace(const SymMatrix& a, Sampler& sampler, int trials) {
  const std::size_t n = a.cols();
  if (a.rows() == 0) return SymMatrix::identity(n);
  if (n == 0) return SymMatrix(0, 0);

  MatrixProgram prog(a);
  Eliminator el(a, draw_points(prog.program(), sampler, trials));
  el.run(n);
  const auto& piv = el.pivots();
  if (piv.size() != el.numeric_rank_at_points())
    throw Error(ErrorCode::PivotAmbiguity,
                "elimination rank " + std::to_string(piv.size()) + " differs from sampled rank " +
                    std::to_string(el.numeric_rank_at_points()) + " for a " + a.shape() + " matrix");

  std::vector<bool> is_pivot(n, false);
  for (const auto& p : piv) is_pivot[p.col] = true;
  std::vector<std::size_t> free_cols;
  for (std::size_t j = 0; j < n; ++j)
    if (!is_pivot[j]) free_cols.push_back(j);

  SymMatrix basis(n, free_cols.size());
  for (std::size_t f = 0; f < free_cols.size(); ++f) {
    const std::size_t fc = free_cols[f];
    std::vector<std::size_t> relevant;
    for (std::size_t k = 0; k < piv.size(); ++k)
      if (!el.cell(piv[k].row, fc).zero) relevant.push_back(k);
    auto pivot_product = [&](std::optional<std::size_t> skip) {
      std::vector<Expr> f;
      for (std::size_t k : relevant)
        if (k != skip) f.push_back(el.cell(piv[k].row, piv[k].col).e);
      return Expr::product(std::move(f));
    };
    basis(fc, f) = pivot_product(std::nullopt);
    for (std::size_t k : relevant)
      basis(piv[k].col, f) = -(el.cell(piv[k].row, fc).e * pivot_product(k));
  }

  if (!free_cols.empty()) {
    MatrixProgram check_a(a), check_b(basis);
    std::vector<Expr> all(a.entries());
    all.insert(all.end(), basis.entries().begin(), basis.entries().end());
    const Program joint(all);
    for (int t = 0; t < kVerifyPoints; ++t) {
      const std::vector<double> x = sampler.valid_point(joint);
      const Eigen::MatrixXd av = check_a(x);
      const Eigen::MatrixXd bv = check_b(x);
      if (!product_close(av, bv, Eigen::MatrixXd::Zero(av.rows(), bv.cols())))
        throw Error(ErrorCode::InternalConsistency,
                    "nullspace residual check failed for a " + a.shape() + " matrix");
      if (numeric_rank(bv) != free_cols.size())
        throw Error(ErrorCode::PivotAmbiguity,
                    "nullspace basis loses rank at a sample point for a " + a.shape() + " matrix");
    }
  }
  return basis;
}

SymMatrix symbolic_inverse(const SymMatrix& a, Sampler& sampler, int trials) {
  if (a.rows() != a.cols())
    throw Error(ErrorCode::ShapeMismatch, "inverse of non-square " + a.shape() + " matrix");
  const std::size_t n = a.rows();
  if (n == 0) return {};

  MatrixProgram prog(a);
  const SymMatrix aug = hcat({a, SymMatrix::identity(n)});
  Eliminator el(aug, draw_points(prog.program(), sampler, trials));
  el.run(n);
  const auto& piv = el.pivots();
  if (piv.size() != n)
    throw Error(ErrorCode::Singular, "matrix " + a.shape() + " has generic rank " +
                                         std::to_string(piv.size()) + " < " + std::to_string(n));

  SymMatrix inv(n, n);
  for (const auto& p : piv) {
    const Expr& pe = el.cell(p.row, p.col).e;
    for (std::size_t j = 0; j < n; ++j) {
      const Cell& c = el.cell(p.row, n + j);
      inv(p.col, j) = c.zero ? Expr() : c.e / pe;
    }
  }

  MatrixProgram check_a(a), check_x(inv);
  std::vector<Expr> all(a.entries());
  all.insert(all.end(), inv.entries().begin(), inv.entries().end());
  const Program joint(all);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  for (int t = 0; t < kVerifyPoints; ++t) {
    const std::vector<double> x = sampler.valid_point(joint);
    const Eigen::MatrixXd av = check_a(x);
    const Eigen::MatrixXd xv = check_x(x);
    if (!product_close(av, xv, eye) || !product_close(xv, av, eye))
      throw Error(ErrorCode::InternalConsistency,
                  "inverse residual check failed for a " + a.shape() + " matrix");
  }
  return inv;
}

}  // namespace bg2phs
