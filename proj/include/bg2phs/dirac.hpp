#pragma once

#include <vector>

#include "bg2phs/bondgraph.hpp"
#include "bg2phs/symmat.hpp"

namespace bg2phs {

/// Kernel representation F f + E e = 0 of a Dirac structure. Each port is a
/// bond contributing N consecutive columns; its flow variable is sign * f_b,
/// with sign = +1 for bonds entering the owning element and -1 for bonds
/// leaving it.
struct DiracKernel {
  SymMatrix F;
  SymMatrix E;
  std::vector<std::size_t> ports;  // bond indices
  std::vector<int> signs;
};

/// Checks E F^T + F E^T = 0 and rank(F E) = rows at sample points. Throws
/// Error(InternalConsistency) naming `what` on failure.
void verify_dirac(const DiracKernel& d, Sampler& sampler, int trials, const std::string& what);

/// Pattern for an interior element. Ports: incoming bonds then outgoing
/// bonds, exterior before interior inside each group, declaration order.
DiracKernel elementary_dirac(const BondGraph& bg, std::size_t element);

/// F T^T, E T^T. Throws Error(NonOrthogonal) unless T^T T = I at samples.
DiracKernel apply_orthogonal_transform(const DiracKernel& d, const SymMatrix& t, Sampler& sampler,
                                       int trials = 20);

/// Column permutation to [exterior ports | interior ports], each group in
/// bond declaration order.
DiracKernel reorder_interior_exterior(const DiracKernel& d, const BondGraph& bg);

/// Number of leading exterior ports in a reordered kernel.
std::size_t exterior_port_count(const DiracKernel& d, const BondGraph& bg);

/// Constraints equating the two appearances of every interior bond. Rows:
/// N flow equations per interior bond, then N effort equations per interior
/// bond, both in bond declaration order.
struct InterconnectionStructure {
  std::vector<std::size_t> elements;  // interior element indices
  std::vector<SymMatrix> F;           // per element, 2N m_I x N |B_I(i)|
  std::vector<SymMatrix> E;
  std::vector<std::vector<std::size_t>> bonds;  // interior bonds of each element
};

InterconnectionStructure build_interconnection(const BondGraph& bg);

struct ComposedDirac {
  DiracKernel kernel;  // exterior ports only, ordered C | R | Sf | Se
  BlockLayout layout;  // one block per exterior element
  SymMatrix gamma_t;   // 2N m_I x sum of elementary rows
  SymMatrix lambda;    // N m_E x sum of elementary rows
  std::vector<DiracKernel> elementary;  // reordered, per interior element
};

/// Eliminates the interior bond variables. Throws
/// Error(DegenerateInterconnection) if Gamma^T is rank deficient or its left
/// kernel has the wrong dimension.
ComposedDirac compose(const BondGraph& bg, Sampler& sampler, int trials = 20);

/// Same, from caller-supplied reordered elementary kernels (one per interior
/// element, declaration order) and interconnection.
ComposedDirac compose(const BondGraph& bg, std::vector<DiracKernel> elementary,
                      const InterconnectionStructure& ic, Sampler& sampler, int trials = 20);

}  // namespace bg2phs
