#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "bg2phs/phs.hpp"

namespace bg2phs {

/// Numeric view of a model: H, its gradient and the six structure matrices
/// compiled into one program.
class ModelEvaluator {
 public:
  explicit ModelEvaluator(const PhsModel& m);

  std::size_t state_count() const { return n_; }
  std::size_t input_count() const { return p_; }

  struct Values {
    double H = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd J, R, G, P, M, S;
  };

  /// `point` is indexed by symbol id (states and parameters).
  Values values(std::span<const double> point) const;

  /// x' = (J - R) dH + (G - P) u and y = (G + P)^T dH + (M + S) u.
  void dynamics(std::span<const double> point, const Eigen::VectorXd& u, Eigen::VectorXd& xdot,
                Eigen::VectorXd& y, double* h = nullptr) const;

 private:
  std::size_t n_, p_;
  Program program_;
};

struct InputSegment {
  double start = 0.0;
  std::vector<double> u;
};

struct SimulationRequest {
  std::vector<double> x0;
  std::vector<InputSegment> schedule;  // piecewise constant; zero before the first segment
  double t_end = 1.0;
  double dt = 1e-3;
  std::map<std::string, double> parameters;  // overrides and values for unbound parameters
};

struct Trajectory {
  std::vector<std::string> state_names;
  std::vector<std::string> output_names;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> y;
  std::vector<double> H;
  std::vector<double> supplied_power;   // u^T y at each grid point
  std::vector<double> supplied_energy;  // integral of u^T y, integrated with the states
};

/// Classical fixed-step RK4. Throws Error(Simulation) on a non-finite state.
Trajectory simulate(const PhsModel& model, const SimulationRequest& req);

struct PassivityReport {
  std::vector<std::size_t> flagged_steps;
  double max_excess = 0.0;  // largest (dH - dE_supplied)/dt - tol seen
  double max_residual = 0.0;  // largest |dH - dE_supplied| / dt
};

/// Flags steps where the discrete dH/dt exceeds the supplied power by more
/// than 1e-6 + 10 dt^2 scale.
PassivityReport passivity_report(const Trajectory& tr);

std::string trajectory_csv(const Trajectory& tr);

}  // namespace bg2phs
