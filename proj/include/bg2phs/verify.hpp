#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "bg2phs/bondgraph.hpp"
#include "bg2phs/dirac.hpp"
#include "bg2phs/phs.hpp"

namespace bg2phs {

/// Orthonormal basis (columns) of a subspace at one evaluated state.
struct NumericSubspace {
  Eigen::MatrixXd basis;
  Eigen::Index ambient() const { return basis.rows(); }
  Eigen::Index dimension() const { return basis.cols(); }
};

NumericSubspace column_space(const Eigen::MatrixXd& m, double rel_tol = 1e-8);
NumericSubspace null_space(const Eigen::MatrixXd& m, double rel_tol = 1e-8);

/// Exterior coordinates used by both the oracle and kernels: for the
/// exterior bonds in C | R | Sf | Se order, first the signed flows (minus the
/// bond flow at storages and resistors, plus at sources), then the efforts.
NumericSubspace kernel_subspace(const DiracKernel& d, std::span<const double> point);

/// Solves every junction, transformer and gyrator relation on the raw bond
/// variables at once and projects the solution space onto the exterior
/// coordinates. Shares no code with the symbolic pipeline.
NumericSubspace oracle_compose(const BondGraph& bg, std::span<const double> point);

/// Principal angles in radians, ascending. Throws Error(ShapeMismatch) on
/// differing ambient or subspace dimensions.
std::vector<double> principal_angles(const NumericSubspace& a, const NumericSubspace& b);
bool subspace_equal(const NumericSubspace& a, const NumericSubspace& b, double tol = 1e-8);

struct MembershipResult {
  bool member = false;
  double residual = 0.0;
};

/// Evaluates x', y of the model at (point, u), rebuilds all exterior port
/// variables (resistor efforts by least squares under f_R = D e_R) and tests
/// the tuple against the oracle subspace.
MembershipResult phs_membership_check(const PhsModel& model, const BondGraph& bg, std::span<const double> point,
                                      std::span<const double> u, double tol = 1e-8);

}  // namespace bg2phs
