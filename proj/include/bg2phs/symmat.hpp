#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "bg2phs/expr.hpp"
#include "bg2phs/sampling.hpp"

namespace bg2phs {

/// Dense row-major matrix of expressions. Zero-sized shapes are valid.
class SymMatrix {
 public:
  SymMatrix() = default;
  SymMatrix(std::size_t rows, std::size_t cols);

  static SymMatrix identity(std::size_t n);
  static SymMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  static SymMatrix from_rows(const std::vector<std::vector<Expr>>& rows);
  static SymMatrix from_numeric(const Eigen::MatrixXd& m);  // exact binary rationals

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }
  std::string shape() const;

  const Expr& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  Expr& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const std::vector<Expr>& entries() const { return data_; }

  SymMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  SymMatrix select_columns(const std::vector<std::size_t>& cols) const;
  SymMatrix select_rows(const std::vector<std::size_t>& rows) const;

  /// True when every entry is the constant 0.
  bool structurally_zero() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Expr> data_;
};

/// Ordered labelled partition of a matrix's columns.
class BlockLayout {
 public:
  struct Block {
    std::string label;
    std::size_t width;
  };

  void add(const std::string& label, std::size_t width);
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t total() const;
  std::size_t offset(const std::string& label) const;
  std::size_t width(const std::string& label) const;
  bool contains(const std::string& label) const;

 private:
  std::vector<Block> blocks_;
};

SymMatrix matmul(const SymMatrix& a, const SymMatrix& b);
SymMatrix transpose(const SymMatrix& a);
SymMatrix hcat(const std::vector<SymMatrix>& parts);
SymMatrix vcat(const std::vector<SymMatrix>& parts);
SymMatrix block_diag(const std::vector<SymMatrix>& parts);
SymMatrix scale(const SymMatrix& a, const Expr& c);
SymMatrix add(const SymMatrix& a, const SymMatrix& b);
SymMatrix subtract(const SymMatrix& a, const SymMatrix& b);
SymMatrix negate(const SymMatrix& a);

/// Compiled numeric evaluation of every entry.
class MatrixProgram {
 public:
  MatrixProgram() = default;
  explicit MatrixProgram(const SymMatrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const Program& program() const { return program_; }

  Eigen::MatrixXd operator()(std::span<const double> point) const;
  /// Entry values plus the magnitude bound used for cancellation tests.
  void run(std::span<const double> point, Eigen::MatrixXd& value, Eigen::MatrixXd& magnitude) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Program program_;
};

Eigen::MatrixXd evaluate(const SymMatrix& m, std::span<const double> point);

/// SVD rank with tolerance rel_tol * sigma_max.
std::size_t numeric_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-8);

std::size_t generic_rank(const SymMatrix& a, Sampler& sampler, int trials);
std::size_t generic_rank(const SymMatrix& a, const SymbolTable& symbols, int trials,
                         std::uint64_t seed);

/// Largest |entry| over `trials` sample points.
double max_abs_at_samples(const SymMatrix& a, Sampler& sampler, int trials);

/// Entrywise probabilistic zero test (|value| <= tol at every trial point).
bool vanishes(const SymMatrix& a, Sampler& sampler, int trials, double tol = 1e-10);

/// Columns spanning ker(a) at generic points; cols(a) - rank(a) of them.
/// Throws Error(PivotAmbiguity) when elimination and sampled rank disagree.
SymMatrix symbolic_nullspace(const SymMatrix& a, Sampler& sampler, int trials = 20);

/// Throws Error(Singular) when a is generically rank deficient.
SymMatrix symbolic_inverse(const SymMatrix& a, Sampler& sampler, int trials = 20);

/// Replaces entries that vanish at every sample point by 0 and entries that
/// are constant across the samples (a rational with a small denominator)
/// by that constant.
SymMatrix settle(const SymMatrix& a, Sampler& sampler, int trials = 20);

}  // namespace bg2phs
