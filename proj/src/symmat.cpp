#include "bg2phs/symmat.hpp"

#include <algorithm>
#include <cmath>

namespace bg2phs {

SymMatrix::SymMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {}

SymMatrix SymMatrix::identity(std::size_t n) {
  SymMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = Expr::integer(1);
  return m;
}

SymMatrix SymMatrix::from_rows(const std::vector<std::vector<Expr>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.front().size() : 0;
  SymMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c)
      throw Error(ErrorCode::ShapeMismatch, "ragged rows: row 0 has " + std::to_string(c) +
                                                " entries, row " + std::to_string(i) + " has " +
                                                std::to_string(rows[i].size()));
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

namespace {

Rational exact_rational(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite matrix entry");
  int e = 0;
  const double mant = std::frexp(v, &e);
  const auto scaled = static_cast<long long>(std::ldexp(mant, 53));
  Rational q(scaled);
  const int shift = e - 53;
  using boost::multiprecision::cpp_int;
  if (shift >= 0) return q * Rational(cpp_int(1) << shift);
  return q / Rational(cpp_int(1) << -shift);
}

}  // namespace

SymMatrix SymMatrix::from_numeric(const Eigen::MatrixXd& m) {
  SymMatrix s(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      s(i, j) = Expr::constant(exact_rational(m(i, j)));
  return s;
}

std::string SymMatrix::shape() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

SymMatrix SymMatrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_)
    throw Error(ErrorCode::ShapeMismatch, "block " + std::to_string(nr) + "x" + std::to_string(nc) +
                                              " at (" + std::to_string(r0) + "," +
                                              std::to_string(c0) + ") exceeds " + shape());
  SymMatrix b(nr, nc);
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
  return b;
}

SymMatrix SymMatrix::select_columns(const std::vector<std::size_t>& cols) const {
  SymMatrix b(rows_, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= cols_) throw Error(ErrorCode::ShapeMismatch, "column index out of range for " + shape());
    for (std::size_t i = 0; i < rows_; ++i) b(i, j) = (*this)(i, cols[j]);
  }
  return b;
}

SymMatrix SymMatrix::select_rows(const std::vector<std::size_t>& rows) const {
  SymMatrix b(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= rows_) throw Error(ErrorCode::ShapeMismatch, "row index out of range for " + shape());
    for (std::size_t j = 0; j < cols_; ++j) b(i, j) = (*this)(rows[i], j);
  }
  return b;
}

bool SymMatrix::structurally_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](const Expr& e) { return e.is_zero_constant(); });
}

void BlockLayout::add(const std::string& label, std::size_t width) {
  if (contains(label)) throw Error(ErrorCode::DuplicateId, "block label '" + label + "' repeated");
  blocks_.push_back({label, width});
}

std::size_t BlockLayout::total() const {
  std::size_t t = 0;
  for (const Block& b : blocks_) t += b.width;
  return t;
}

bool BlockLayout::contains(const std::string& label) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const Block& b) { return b.label == label; });
}

std::size_t BlockLayout::offset(const std::string& label) const {
  std::size_t off = 0;
  for (const Block& b : blocks_) {
    if (b.label == label) return off;
    off += b.width;
  }
  throw Error(ErrorCode::InvalidArgument, "no block labelled '" + label + "'");
}

std::size_t BlockLayout::width(const std::string& label) const {
  for (const Block& b : blocks_)
    if (b.label == label) return b.width;
  throw Error(ErrorCode::InvalidArgument, "no block labelled '" + label + "'");
}

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void shape_error(const char* op, const SymMatrix& a, const SymMatrix& b) {
  throw Error(ErrorCode::ShapeMismatch,
              std::string(op) + ": incompatible shapes " + a.shape() + " and " + b.shape());
}

}  // namespace

SymMatrix matmul(const SymMatrix& a, const SymMatrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  SymMatrix c(a.rows(), b.cols());
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      terms.clear();
      for (std::size_t k = 0; k < a.cols(); ++k) {
        if (a(i, k).is_zero_constant() || b(k, j).is_zero_constant()) continue;
        terms.push_back(a(i, k) * b(k, j));
      }
      c(i, j) = Expr::sum(terms);
    }
  }
  return c;
}

SymMatrix transpose(const SymMatrix& a) {
  SymMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

SymMatrix hcat(const std::vector<SymMatrix>& parts) {
  if (parts.empty()) return {};
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  for (const SymMatrix& p : parts) {
    if (p.rows() != r) shape_error("hcat", parts.front(), p);
    c += p.cols();
  }
  SymMatrix m(r, c);
  std::size_t off = 0;
  for (const SymMatrix& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) m(i, off + j) = p(i, j);
    off += p.cols();
  }
  return m;
}

SymMatrix vcat(const std::vector<SymMatrix>& parts) {
  if (parts.empty()) return {};
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const SymMatrix& p : parts) {
    if (p.cols() != c) shape_error("vcat", parts.front(), p);
    r += p.rows();
  }
  SymMatrix m(r, c);
  std::size_t off = 0;
  for (const SymMatrix& p : parts) {
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < c; ++j) m(off + i, j) = p(i, j);
    off += p.rows();
  }
  return m;
}

SymMatrix block_diag(const std::vector<SymMatrix>& parts) {
  std::size_t r = 0, c = 0;
  for (const SymMatrix& p : parts) {
    r += p.rows();
    c += p.cols();
  }
  SymMatrix m(r, c);
  std::size_t ro = 0, co = 0;
  for (const SymMatrix& p : parts) {
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) m(ro + i, co + j) = p(i, j);
    ro += p.rows();
    co += p.cols();
  }
  return m;
}

SymMatrix scale(const SymMatrix& a, const Expr& c) {
  SymMatrix m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = c * a(i, j);
  return m;
}

SymMatrix add(const SymMatrix& a, const SymMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
  SymMatrix m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j) + b(i, j);
  return m;
}

SymMatrix subtract(const SymMatrix& a, const SymMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("subtract", a, b);
  SymMatrix m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j) - b(i, j);
  return m;
}

SymMatrix negate(const SymMatrix& a) {
  SymMatrix m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = -a(i, j);
  return m;
}

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

MatrixProgram::MatrixProgram(const SymMatrix& m)
    : rows_(m.rows()), cols_(m.cols()), program_(m.entries()) {}

Eigen::MatrixXd MatrixProgram::operator()(std::span<const double> point) const {
  std::vector<double> flat(rows_ * cols_);
  program_.run(point, flat);
  Eigen::MatrixXd out(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(i, j) = flat[i * cols_ + j];
  return out;
}

void MatrixProgram::run(std::span<const double> point, Eigen::MatrixXd& value,
                        Eigen::MatrixXd& magnitude) const {
  std::vector<double> flat(rows_ * cols_), mag(rows_ * cols_);
  program_.run_with_magnitude(point, flat, mag);
  value.resize(rows_, cols_);
  magnitude.resize(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) {
      value(i, j) = flat[i * cols_ + j];
      magnitude(i, j) = mag[i * cols_ + j];
    }
}

Eigen::MatrixXd evaluate(const SymMatrix& m, std::span<const double> point) {
  return MatrixProgram(m)(point);
}

std::size_t numeric_rank(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

std::size_t generic_rank(const SymMatrix& a, Sampler& sampler, int trials) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "generic_rank needs at least one trial");
  if (a.empty()) return 0;
  MatrixProgram prog(a);
  std::size_t best = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x = sampler.valid_point(prog.program());
    best = std::max(best, numeric_rank(prog(x)));
    if (best == std::min(a.rows(), a.cols())) break;
  }
  return best;
}

std::size_t generic_rank(const SymMatrix& a, const SymbolTable& symbols, int trials,
                         std::uint64_t seed) {
  Sampler s(symbols, seed);
  return generic_rank(a, s, trials);
}

double max_abs_at_samples(const SymMatrix& a, Sampler& sampler, int trials) {
  if (a.empty()) return 0.0;
  MatrixProgram prog(a);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x = sampler.valid_point(prog.program());
    worst = std::max(worst, prog(x).cwiseAbs().maxCoeff());
  }
  return worst;
}

bool vanishes(const SymMatrix& a, Sampler& sampler, int trials, double tol) {
  return max_abs_at_samples(a, sampler, trials) <= tol;
}

namespace {

// Small-denominator rational within 1e-12 relative of v, if any.
std::optional<Rational> snap_rational(double v) {
  for (long long den = 1; den <= 64; ++den) {
    const double num = std::round(v * static_cast<double>(den));
    if (std::abs(num) > 1e12) return std::nullopt;
    if (std::abs(num / static_cast<double>(den) - v) <= 1e-12 * std::max(1.0, std::abs(v)))
      return Rational(static_cast<long long>(num), den);
  }
  return std::nullopt;
}

}  // namespace

SymMatrix settle(const SymMatrix& a, Sampler& sampler, int trials) {
  if (a.empty()) return a;
  MatrixProgram prog(a);
  const std::size_t n = a.rows() * a.cols();
  std::vector<std::vector<double>> vals(n), mags(n);
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x = sampler.valid_point(prog.program());
    Eigen::MatrixXd v, m;
    prog.run(x, v, m);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) {
        vals[i * a.cols() + j].push_back(v(i, j));
        mags[i * a.cols() + j].push_back(m(i, j));
      }
  }
  SymMatrix out = a;
  for (std::size_t k = 0; k < n; ++k) {
    const Expr& e = a.entries()[k];
    if (e.is_constant()) continue;
    Expr& slot = out(k / a.cols(), k % a.cols());
    bool zero = true;
    for (std::size_t t = 0; t < vals[k].size(); ++t)
      if (std::abs(vals[k][t]) > 1e-9 * mags[k][t] && std::abs(vals[k][t]) > 1e-300) zero = false;
    if (zero) {
      slot = Expr();
      continue;
    }
    const double v0 = vals[k][0];
    bool constant = true;
    for (std::size_t t = 1; t < vals[k].size(); ++t)
      if (std::abs(vals[k][t] - v0) > 1e-11 * std::max({1.0, std::abs(v0), mags[k][t]}))
        constant = false;
    if (constant && vals[k].size() > 1) {
      if (auto q = snap_rational(v0)) slot = Expr::constant(*q);
    }
  }
  return out;
}

}  // namespace bg2phs
