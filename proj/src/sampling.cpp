#include "bg2phs/sampling.hpp"

namespace bg2phs {

Sampler::Sampler(const SymbolTable& symbols, std::uint64_t seed)
    : symbols_(&symbols), seed_(seed), rng_(seed) {}

std::uint64_t Sampler::next() { return rng_(); }

// Fixed bit-to-double mapping instead of std::uniform_real_distribution so
// that streams agree across standard library implementations.
double Sampler::uniform(double lo, double hi) {
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::vector<double> Sampler::draw() {
  std::vector<double> p(symbols_->size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Symbol& s = (*symbols_)[i];
    if (s.kind == SymbolKind::State) {
      p[i] = uniform(-1.0, 1.0);
    } else if (s.value) {
      p[i] = *s.value;
    } else {
      p[i] = uniform(0.5, 2.0);
    }
  }
  ++drawn_;
  return p;
}

std::vector<double> Sampler::evaluate_valid(const Program& p, std::vector<double>* point) {
  std::vector<double> out(p.root_count());
  std::string last;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    std::vector<double> x = draw();
    try {
      p.run(x, out);
      if (point) *point = std::move(x);
      return out;
    } catch (const EvalError& e) {
      last = e.what();
    }
  }
  throw Error(ErrorCode::SampleExhausted,
              "no valid sample point after " + std::to_string(kMaxRedraws) +
                  " draws (last failure: " + last + ")");
}

std::vector<double> Sampler::valid_point(const Program& p) {
  std::vector<double> x;
  evaluate_valid(p, &x);
  return x;
}

}  // namespace bg2phs
