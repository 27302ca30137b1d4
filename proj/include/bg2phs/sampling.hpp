#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bg2phs/expr.hpp"

namespace bg2phs {

/// Seeded source of evaluation points. States are drawn from U[-1, 1];
/// parameters take their bound value, or U[0.5, 2] when unbound. One sampler
/// is threaded through a whole compilation so a single seed reproduces every
/// sampled decision.
class Sampler {
 public:
  static constexpr int kMaxRedraws = 10;

  Sampler(const SymbolTable& symbols, std::uint64_t seed);

  const SymbolTable& symbols() const { return *symbols_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t points_drawn() const { return drawn_; }

  double uniform(double lo, double hi);
  std::uint64_t next();

  std::vector<double> draw();

  /// Draws points until p evaluates without a domain or division failure.
  /// Throws Error(SampleExhausted) after kMaxRedraws failed attempts.
  std::vector<double> evaluate_valid(const Program& p, std::vector<double>* point = nullptr);

  /// A point at which p evaluates; values are discarded.
  std::vector<double> valid_point(const Program& p);

 private:
  const SymbolTable* symbols_;
  std::uint64_t seed_;
  std::uint64_t drawn_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace bg2phs
