#include "bg2phs/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace bg2phs {

ModelEvaluator::ModelEvaluator(const PhsModel& m) : n_(m.states.size()), p_(m.inputs.size()) {
  std::vector<Expr> roots{m.hamiltonian};
  for (std::size_t s : m.states) roots.push_back(diff_expr(m.hamiltonian, s));
  for (const SymMatrix* mat : {&m.J, &m.R, &m.G, &m.P, &m.M, &m.S})
    roots.insert(roots.end(), mat->entries().begin(), mat->entries().end());
  program_ = Program(roots);
}

ModelEvaluator::Values ModelEvaluator::values(std::span<const double> point) const {
  const std::vector<double> out = program_.run(point);
  Values v;
  std::size_t k = 0;
  v.H = out[k++];
  v.grad.resize(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) v.grad(static_cast<Eigen::Index>(i)) = out[k++];
  auto take = [&](Eigen::MatrixXd& m, std::size_t r, std::size_t c) {
    m.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = out[k++];
  };
  take(v.J, n_, n_);
  take(v.R, n_, n_);
  take(v.G, n_, p_);
  take(v.P, n_, p_);
  take(v.M, p_, p_);
  take(v.S, p_, p_);
  return v;
}

void ModelEvaluator::dynamics(std::span<const double> point, const Eigen::VectorXd& u, Eigen::VectorXd& xdot,
                              Eigen::VectorXd& y, double* h) const {
  const Values v = values(point);
  xdot = (v.J - v.R) * v.grad + (v.G - v.P) * u;
  y = (v.G + v.P).transpose() * v.grad + (v.M + v.S) * u;
  if (h) *h = v.H;
}

namespace {

Eigen::VectorXd input_at(const std::vector<InputSegment>& schedule, double t, std::size_t p) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (const InputSegment& s : schedule) {
    if (s.start > t) break;
    for (std::size_t i = 0; i < p; ++i) u(static_cast<Eigen::Index>(i)) = s.u[i];
  }
  return u;
}

}  // namespace

Trajectory simulate(const PhsModel& model, const SimulationRequest& req) {
  const std::size_t n = model.states.size();
  const std::size_t p = model.inputs.size();
  if (req.x0.size() != n)
    throw Error(ErrorCode::InvalidArgument, "initial state has " + std::to_string(req.x0.size()) +
                                                " components, the model has " + std::to_string(n) + " states");
  if (!(req.dt > 0.0) || !std::isfinite(req.dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (!(req.t_end >= 0.0) || !std::isfinite(req.t_end))
    throw Error(ErrorCode::InvalidArgument, "t_end must be non-negative");
  for (std::size_t i = 0; i < req.schedule.size(); ++i) {
    if (req.schedule[i].u.size() != p)
      throw Error(ErrorCode::InvalidArgument, "input segment " + std::to_string(i) + " has " +
                                                  std::to_string(req.schedule[i].u.size()) + " values, expected " +
                                                  std::to_string(p));
    if (i > 0 && !(req.schedule[i].start > req.schedule[i - 1].start))
      throw Error(ErrorCode::InvalidArgument, "input segment start times must increase");
  }

  std::vector<double> point(model.symbols.size(), 0.0);
  for (std::size_t id : model.symbols.parameter_ids()) {
    const Symbol& s = model.symbols[id];
    auto it = req.parameters.find(s.name);
    if (it != req.parameters.end()) {
      point[id] = it->second;
    } else if (s.value) {
      point[id] = *s.value;
    } else {
      throw Error(ErrorCode::InvalidArgument, "parameter '" + s.name + "' has no value; supply one");
    }
  }
  for (const auto& [name, value] : req.parameters) {
    auto id = model.symbols.find(name);
    if (!id || model.symbols[*id].kind != SymbolKind::Parameter)
      throw Error(ErrorCode::InvalidArgument, "unknown parameter '" + name + "'");
  }

  const ModelEvaluator ev(model);
  Trajectory tr;
  tr.state_names = model.state_names();
  tr.output_names = model.outputs;

  // Augmented state: x followed by the supplied energy. The input is held
  // over each step; steps end at every segment start.
  auto rhs = [&](const Eigen::VectorXd& u, double t, const Eigen::VectorXd& z, Eigen::VectorXd& dz,
                 Eigen::VectorXd* y_out, double* h_out) {
    for (std::size_t i = 0; i < n; ++i) point[model.states[i]] = z(static_cast<Eigen::Index>(i));
    Eigen::VectorXd xdot, y;
    try {
      ev.dynamics(point, u, xdot, y, h_out);
    } catch (const EvalError& e) {
      throw Error(ErrorCode::Simulation, "model evaluation failed at t=" + std::to_string(t) + ": " + e.what());
    }
    dz.resize(static_cast<Eigen::Index>(n + 1));
    dz.head(static_cast<Eigen::Index>(n)) = xdot;
    dz(static_cast<Eigen::Index>(n)) = u.dot(y);
    if (y_out) *y_out = y;
  };

  Eigen::VectorXd z(static_cast<Eigen::Index>(n + 1));
  for (std::size_t i = 0; i < n; ++i) z(static_cast<Eigen::Index>(i)) = req.x0[i];
  z(static_cast<Eigen::Index>(n)) = 0.0;

  auto record = [&](double t) {
    Eigen::VectorXd dz, y;
    double h = 0.0;
    rhs(input_at(req.schedule, t, p), t, z, dz, &y, &h);
    tr.t.push_back(t);
    tr.x.push_back(z.head(static_cast<Eigen::Index>(n)));
    tr.y.push_back(y);
    tr.H.push_back(h);
    tr.supplied_power.push_back(dz(static_cast<Eigen::Index>(n)));
    tr.supplied_energy.push_back(z(static_cast<Eigen::Index>(n)));
  };

  const double eps = 1e-12 * std::max(1.0, req.t_end);
  std::vector<double> stops;
  for (const InputSegment& s : req.schedule)
    if (s.start > eps && s.start < req.t_end - eps) stops.push_back(s.start);
  const auto grid = static_cast<std::size_t>(std::llround(std::ceil(req.t_end / req.dt - 1e-9)));
  for (std::size_t s = 1; s <= grid; ++s) stops.push_back(s == grid ? req.t_end : static_cast<double>(s) * req.dt);
  std::sort(stops.begin(), stops.end());

  double t = 0.0;
  record(t);
  Eigen::VectorXd k1, k2, k3, k4;
  for (double next : stops) {
    if (next <= t + eps) continue;
    const double h = next - t;
    const Eigen::VectorXd u = input_at(req.schedule, t + eps, p);
    rhs(u, t, z, k1, nullptr, nullptr);
    rhs(u, t + h / 2, z + (h / 2) * k1, k2, nullptr, nullptr);
    rhs(u, t + h / 2, z + (h / 2) * k2, k3, nullptr, nullptr);
    rhs(u, next, z + h * k3, k4, nullptr, nullptr);
    z += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!z.allFinite()) throw Error(ErrorCode::Simulation, "state became non-finite at t=" + std::to_string(next));
    t = next;
    record(t);
  }
  return tr;
}

PassivityReport passivity_report(const Trajectory& tr) {
  PassivityReport rep;
  for (std::size_t k = 0; k + 1 < tr.t.size(); ++k) {
    const double dt = tr.t[k + 1] - tr.t[k];
    if (!(dt > 0.0)) continue;
    const double dh = (tr.H[k + 1] - tr.H[k]) / dt;
    const double supplied = (tr.supplied_energy[k + 1] - tr.supplied_energy[k]) / dt;
    const double scale = 1.0 + std::abs(tr.H[k]) + std::abs(tr.supplied_power[k]) + std::abs(tr.supplied_power[k + 1]);
    const double tol = 1e-6 + 10.0 * dt * dt * scale;
    rep.max_residual = std::max(rep.max_residual, std::abs(dh - supplied));
    const double excess = dh - supplied - tol;
    if (k == 0 || excess > rep.max_excess) rep.max_excess = excess;
    if (excess > 0.0) rep.flagged_steps.push_back(k);
  }
  return rep;
}

std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream out;
  out << "t";
  for (const auto& s : tr.state_names) out << ',' << s;
  for (const auto& s : tr.output_names) out << ',' << s;
  out << ",H,supplied_power\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    num(tr.t[k]);
    for (Eigen::Index i = 0; i < tr.x[k].size(); ++i) {
      out << ',';
      num(tr.x[k](i));
    }
    for (Eigen::Index i = 0; i < tr.y[k].size(); ++i) {
      out << ',';
      num(tr.y[k](i));
    }
    out << ',';
    num(tr.H[k]);
    out << ',';
    num(tr.supplied_power[k]);
    out << '\n';
  }
  return out.str();
}

}  // namespace bg2phs
