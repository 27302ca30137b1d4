#pragma once

#include <string>
#include <vector>

#include "bg2phs/bondgraph.hpp"
#include "bg2phs/dirac.hpp"
#include "bg2phs/symmat.hpp"

namespace bg2phs {

inline constexpr const char* kDependentSourcesMessage = "BG contains dependent sources";
inline constexpr const char* kDependentStoragesMessage =
    "BG contains dependent storages or storages determined by sources";
inline constexpr const char* kNoResistiveSplittingMessage =
    "no suitable input-output splitting of R-type elements exists";

struct CheckReport {
  bool passed = false;
  std::size_t rank = 0;
  std::size_t required = 0;
  std::string message;  // empty when passed
};

/// Column widths (N per element) of the composed kernel's C | R | Sf | Se
/// blocks.
struct PortCounts {
  std::size_t c = 0, r = 0, sf = 0, se = 0;
};
PortCounts port_counts(const BondGraph& bg);

/// rank(E_Sf F_Se) = N (n_Sf + n_Se).
CheckReport check_necessary(const DiracKernel& d, const PortCounts& pc, Sampler& sampler, int trials);
/// rank(F_C E_Sf F_Se) = N (n_C + n_Sf + n_Se).
CheckReport check_sufficient(const DiracKernel& d, const PortCounts& pc, Sampler& sampler, int trials);

/// Resistive columns (offsets inside the R block) assigned to each group.
/// Group 1 columns keep their flows as outputs, group 2 their efforts.
struct Splitting {
  std::vector<std::size_t> group1;
  std::vector<std::size_t> group2;
};

/// Greedy choice: start from the C, Sf and Se columns and accept an R column
/// exactly when it raises the generic rank.
Splitting split_resistor_columns(const DiracKernel& d, const PortCounts& pc, Sampler& sampler, int trials);

/// Valid splittings other than `first`, in lexicographic order of group 1,
/// at most `limit` of them.
std::vector<Splitting> alternative_splittings(const DiracKernel& d, const PortCounts& pc,
                                              const Splitting& first, std::size_t limit, Sampler& sampler,
                                              int trials);

/// y = Z u with u = (e_C, e_R1, -f_R2, f_Sf, e_Se) and
/// y = (-f_C, -f_R1, e_R2, e_Sf, f_Se).
struct ExplicitDirac {
  SymMatrix Z;
  Splitting splitting;
  std::size_t nc = 0, nr = 0, np = 0;  // scalar widths of the C, R, P blocks
};

/// Z = -(F_C F_R1 E_R2 E_Sf F_Se)^-1 (E_C E_R1 F_R2 F_Sf E_Se).
ExplicitDirac compute_Z(const DiracKernel& d, const PortCounts& pc, const Splitting& s, Sampler& sampler,
                        int trials);

/// u_R = -Rt y_R for the splitting, from f_R = D e_R.
struct ResistiveForm {
  SymMatrix Rt;
  std::vector<std::size_t> order;  // R-block columns in group 1 | group 2 order
};

/// Throws Error(ResistiveSplitting) when D11 is singular or Rt fails the
/// symmetry / semidefiniteness checks.
ResistiveForm resistive_io_form(const BondGraph& bg, const Splitting& s, Sampler& sampler, int trials,
                                int psd_points);

struct PhsModel {
  SymbolTable symbols;
  std::vector<std::size_t> states;  // symbol ids
  Expr hamiltonian;
  SymMatrix J, R, G, P, M, S;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  std::vector<std::string> state_names() const;
  std::size_t input_count() const { return inputs.size(); }
};

PhsModel assemble_phs(const ExplicitDirac& ed, const ResistiveForm& rf, const BondGraph& bg, Sampler& sampler,
                      int trials);

/// Port labels: inputs are Sf flows and Se efforts, outputs the conjugates.
void port_labels(const BondGraph& bg, std::vector<std::string>& inputs, std::vector<std::string>& outputs);

/// [[R, P], [P^T, S]]
SymMatrix dissipation_matrix(const PhsModel& m);

/// Smallest eigenvalue of the symmetric part of a square matrix.
double min_symmetric_eigenvalue(const Eigen::MatrixXd& q);

}  // namespace bg2phs
