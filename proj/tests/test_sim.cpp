#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bg2phs/pipeline.hpp"
#include "bg2phs/sim.hpp"
#include "support.hpp"

namespace bg2phs {
namespace {

using testing::compiled_random_graphs;
using testing::example_graph;

PhsModel example_model() {
  CompileOptions o;
  const CompileResult r = run_pipeline(example_graph(2), o);
  if (!r.model) throw std::runtime_error("worked example did not compile");
  return *r.model;
}

SimulationRequest example_request(double dt = 1e-3) {
  SimulationRequest req;
  req.x0 = {1.0, -0.5, 0.3, 0.8};
  req.t_end = 2.0;
  req.dt = dt;
  req.parameters = {{"k", 1.5}};
  return req;
}

TEST(Simulate, GridAndNames) {
  const Trajectory tr = simulate(example_model(), example_request(0.01));
  ASSERT_EQ(tr.t.size(), 201u);
  EXPECT_DOUBLE_EQ(tr.t.front(), 0.0);
  EXPECT_DOUBLE_EQ(tr.t.back(), 2.0);
  EXPECT_EQ(tr.state_names, (std::vector<std::string>{"x_C1_1", "x_C1_2", "x_C2_1", "x_C2_2"}));
  EXPECT_EQ(tr.output_names.size(), 2u);
  EXPECT_EQ(tr.x.size(), tr.t.size());
  EXPECT_DOUBLE_EQ(tr.H.front(), 0.5 * (1.0 + 0.25 + 0.09 + 0.64));
}

TEST(Simulate, EnergyDecaysWithoutInput) {
  const Trajectory tr = simulate(example_model(), example_request());
  for (std::size_t i = 1; i < tr.H.size(); ++i) EXPECT_LE(tr.H[i], tr.H[i - 1] + 1e-12) << i;
  EXPECT_LT(tr.H.back(), tr.H.front());
  EXPECT_TRUE(passivity_report(tr).flagged_steps.empty());
}

TEST(Simulate, EquilibriumIsStationary) {
  SimulationRequest req = example_request();
  req.x0.assign(4, 0.0);
  const Trajectory tr = simulate(example_model(), req);
  for (const Eigen::VectorXd& x : tr.x) EXPECT_EQ(x.cwiseAbs().maxCoeff(), 0.0);
  for (double h : tr.H) EXPECT_EQ(h, 0.0);
}

TEST(Simulate, LosslessModelsConserveEnergy) {
  RandomGraphOptions lossless;
  lossless.resistors = false;
  int checked = 0;
  for (const auto& c : compiled_random_graphs(40, 100, lossless)) {
    if (!c.result.model || c.result.model->J.structurally_zero() || checked == 3) continue;
    const PhsModel& m = *c.result.model;
    SimulationRequest req;
    req.x0.assign(m.states.size(), 0.4);
    req.t_end = 1.0;
    req.dt = 1e-3;
    const Trajectory tr = simulate(m, req);
    const double drift = std::abs(tr.H.back() - tr.H.front());
    EXPECT_LE(drift, 1e-6 * std::max(1.0, std::abs(tr.H.front()))) << "seed " << c.seed;
    ++checked;
  }
  EXPECT_EQ(checked, 3);
}

TEST(Simulate, SupplyBalancesStorageUnderInput) {
  SimulationRequest req = example_request();
  req.schedule = {{0.0, {1.0, -0.5}}, {0.75, {0.0, 2.0}}};
  const Trajectory tr = simulate(example_model(), req);
  EXPECT_TRUE(passivity_report(tr).flagged_steps.empty());
  // H(T) - H(0) <= supplied energy.
  EXPECT_LE(tr.H.back() - tr.H.front(), tr.supplied_energy.back() + 1e-9);
}

TEST(Simulate, ActiveDissipationIsFlagged) {
  PhsModel m = example_model();
  m.R = negate(SymMatrix::identity(4));
  const Trajectory tr = simulate(m, example_request(0.01));
  const PassivityReport rep = passivity_report(tr);
  EXPECT_FALSE(rep.flagged_steps.empty());
  EXPECT_GT(rep.max_excess, 0.0);
  EXPECT_GT(tr.H.back(), tr.H.front());
}

TEST(Simulate, FourthOrderConvergence) {
  const PhsModel m = example_model();
  SimulationRequest req = example_request();
  req.t_end = 1.0;
  req.schedule = {{0.0, {0.5, 1.0}}};
  auto final_state = [&](double dt) {
    req.dt = dt;
    return simulate(m, req).x.back();
  };
  const Eigen::VectorXd ref = final_state(1e-4);
  const double e1 = (final_state(0.04) - ref).norm();
  const double e2 = (final_state(0.02) - ref).norm();
  ASSERT_GT(e1, 0.0);
  EXPECT_GE(e1 / e2, 8.0) << e1 << " " << e2;
}

TEST(Simulate, OverflowRaisesSimulationError) {
  PhsModel m = example_model();
  const Rational huge(boost::multiprecision::pow(boost::multiprecision::cpp_int(10), 300));
  m.R = scale(SymMatrix::identity(4), Expr::constant(-huge));
  try {
    simulate(m, example_request(0.1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Simulation);
  }
}

TEST(Simulate, RejectsMalformedRequests) {
  const PhsModel m = example_model();
  SimulationRequest req = example_request();
  req.x0.pop_back();
  EXPECT_THROW(simulate(m, req), Error);
  req = example_request();
  req.dt = 0.0;
  EXPECT_THROW(simulate(m, req), Error);
  req = example_request();
  req.schedule = {{0.0, {1.0}}};
  EXPECT_THROW(simulate(m, req), Error);
}

TEST(Simulate, CsvHasHeaderAndOneRowPerSample) {
  const Trajectory tr = simulate(example_model(), example_request(0.5));
  const std::string csv = trajectory_csv(tr);
  EXPECT_EQ(csv.rfind("t,", 0), 0u);
  EXPECT_NE(csv.find("x_C2_2"), std::string::npos);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), tr.t.size() + 1);
}

}  // namespace
}  // namespace bg2phs
