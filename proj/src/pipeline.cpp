#include "bg2phs/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace bg2phs {

namespace {

const char* kStageNames[] = {"graph", "elementary", "gamma", "lambda", "dirac", "checks", "explicit", "model"};

ojson check_json(const CheckReport& c) {
  ojson j;
  j["passed"] = c.passed;
  j["rank"] = c.rank;
  j["required"] = c.required;
  if (!c.passed) j["message"] = c.message;
  return j;
}

ojson labels_of(const std::vector<std::size_t>& cols, const std::vector<std::string>& names) {
  ojson a = ojson::array();
  for (std::size_t c : cols) a.push_back(names[c]);
  return a;
}

class Timer {
 public:
  explicit Timer(bool on) : on_(on), last_(std::chrono::steady_clock::now()) {}
  void lap(ojson& into, const char* name) {
    if (!on_) return;
    const auto now = std::chrono::steady_clock::now();
    into[name] = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point last_;
};

}  // namespace

const char* stage_name(Stage s) { return kStageNames[static_cast<int>(s)]; }

std::optional<Stage> stage_from_name(std::string_view name) {
  for (int i = 0; i < 8; ++i)
    if (name == kStageNames[i]) return static_cast<Stage>(i);
  return std::nullopt;
}

std::vector<std::string> resistive_column_labels(const BondGraph& bg) {
  std::vector<std::string> out;
  for (std::size_t el : bg.elements_of_kind(ElementKind::R))
    for (std::size_t k = 0; k < bg.dimension(); ++k) out.push_back(bg.element(el).id + "_" + std::to_string(k + 1));
  return out;
}

CompileResult run_pipeline(const BondGraph& bg, const CompileOptions& opt, Stage stop) {
  if (opt.rank_trials < 1) throw Error(ErrorCode::InvalidArgument, "rank trials must be at least 1");
  if (opt.sample_points < 1) throw Error(ErrorCode::InvalidArgument, "sample points must be at least 1");

  CompileResult res;
  Sampler sampler(bg.symbols(), opt.seed);
  ojson timings;
  Timer timer(opt.timings);
  ojson& rep = res.report;
  rep["options"] = {{"seed", opt.seed}, {"rank_trials", opt.rank_trials}, {"sample_points", opt.sample_points}};
  rep["checks"] = ojson::object();
  rep["warnings"] = ojson::array();

  auto finish = [&]() -> CompileResult& {
    rep["sampling"] = {{"seed", opt.seed}, {"points_drawn", sampler.points_drawn()}};
    if (opt.timings) rep["timings_ms"] = timings;
    rep["outcome"] = res.outcome == Outcome::Ok ? "ok" : res.message;
    return res;
  };

  if (stop == Stage::Graph) return finish();

  res.composed = compose(bg, sampler, opt.rank_trials);
  res.reached = Stage::Dirac;
  timer.lap(timings, "compose");
  if (stop <= Stage::Dirac) return finish();

  const DiracKernel& k = res.composed->kernel;
  const PortCounts pc = port_counts(bg);
  res.necessary = check_necessary(k, pc, sampler, opt.rank_trials);
  rep["checks"]["necessary"] = check_json(res.necessary);
  if (!res.necessary.passed) {
    res.outcome = Outcome::DependentSources;
    res.message = res.necessary.message;
    return finish();
  }
  res.sufficient = check_sufficient(k, pc, sampler, opt.rank_trials);
  rep["checks"]["sufficient"] = check_json(res.sufficient);
  if (!res.sufficient.passed) {
    res.outcome = Outcome::DependentStorages;
    res.message = res.sufficient.message;
    return finish();
  }
  res.reached = Stage::Checks;
  timer.lap(timings, "checks");
  if (stop <= Stage::Checks) return finish();

  const Splitting greedy = split_resistor_columns(k, pc, sampler, opt.rank_trials);
  res.explicit_form = compute_Z(k, pc, greedy, sampler, opt.rank_trials);
  res.reached = Stage::Explicit;
  timer.lap(timings, "explicit");
  if (stop <= Stage::Explicit) return finish();

  // Resistive reorganisation, retrying alternative splittings.
  const std::vector<std::string> rlabels = resistive_column_labels(bg);
  constexpr std::size_t kMaxCandidates = 64;
  ojson attempts = ojson::array();
  std::optional<Splitting> chosen;
  auto attempt = [&](const Splitting& cand) {
    try {
      res.resistive = resistive_io_form(bg, cand, sampler, opt.rank_trials, opt.sample_points);
      chosen = cand;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ResistiveSplitting) throw;
      attempts.push_back({{"group1", labels_of(cand.group1, rlabels)}, {"reason", e.what()}});
    }
  };
  attempt(greedy);
  if (!chosen) {
    for (const Splitting& alt : alternative_splittings(k, pc, greedy, kMaxCandidates - 1, sampler, opt.rank_trials)) {
      attempt(alt);
      if (chosen) break;
    }
  }
  ojson split;
  split["passed"] = chosen.has_value();
  split["candidates_tried"] = attempts.size() + (chosen ? 1 : 0);
  if (chosen) {
    split["group1"] = labels_of(chosen->group1, rlabels);
    split["group2"] = labels_of(chosen->group2, rlabels);
  } else {
    split["message"] = kNoResistiveSplittingMessage;
  }
  if (!attempts.empty()) split["rejected"] = attempts;
  rep["checks"]["resistive_splitting"] = split;
  if (!chosen) {
    res.outcome = Outcome::NoResistiveSplitting;
    res.message = kNoResistiveSplittingMessage;
    return finish();
  }
  if (chosen->group1 != greedy.group1) {
    res.explicit_form = compute_Z(k, pc, *chosen, sampler, opt.rank_trials);
    rep["warnings"].push_back("greedy resistive splitting rejected; used an alternative");
  }

  res.model = assemble_phs(*res.explicit_form, *res.resistive, bg, sampler, opt.rank_trials);
  timer.lap(timings, "assemble");

  // Structural guarantees of the result.
  PhsModel& m = *res.model;
  ojson structure;
  const bool j_skew = vanishes(add(m.J, transpose(m.J)), sampler, opt.rank_trials, 1e-8);
  const bool m_skew = vanishes(add(m.M, transpose(m.M)), sampler, opt.rank_trials, 1e-8);
  double worst = std::numeric_limits<double>::infinity();
  const SymMatrix q = dissipation_matrix(m);
  if (!q.empty()) {
    MatrixProgram qp(q);
    for (int t = 0; t < opt.sample_points; ++t) {
      const Eigen::MatrixXd v = qp(sampler.valid_point(qp.program()));
      const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
      worst = std::min(worst, min_symmetric_eigenvalue(v) / scale);
    }
  }
  structure["J_skew_symmetric"] = j_skew;
  structure["M_skew_symmetric"] = m_skew;
  structure["Q_min_scaled_eigenvalue"] = std::isfinite(worst) ? worst : 0.0;
  structure["Q_points"] = opt.sample_points;
  rep["structure"] = structure;
  if (!j_skew || !m_skew || (std::isfinite(worst) && worst < -1e-8))
    throw Error(ErrorCode::InternalConsistency, "assembled model violates the port-Hamiltonian structure");
  res.reached = Stage::Model;
  timer.lap(timings, "verify");
  return finish();
}

ojson emit_stage(const BondGraph& bg, const CompileOptions& options, Stage stage) {
  const std::size_t n = bg.dimension();
  ojson out;
  out["stage"] = stage_name(stage);
  if (stage == Stage::Graph) {
    out["graph"] = ojson::parse(serialize_bondgraph(bg));
    auto ids = [&](const std::vector<std::size_t>& els) {
      ojson a = ojson::array();
      for (std::size_t e : els) a.push_back(bg.element(e).id);
      return a;
    };
    auto bond_ids = [&](const std::vector<std::size_t>& bs) {
      ojson a = ojson::array();
      for (std::size_t b : bs) a.push_back(bg.bonds()[b].id);
      return a;
    };
    const Partition& p = bg.partition();
    out["exterior_elements"] = ids(p.exterior_elements);
    out["interior_elements"] = ids(p.interior_elements);
    out["exterior_bonds"] = bond_ids(p.exterior_bonds);
    out["interior_bonds"] = bond_ids(p.interior_bonds);
    out["states"] = ojson::array();
    for (std::size_t s : bg.state_ids()) out["states"].push_back(bg.symbols()[s].name);
    return out;
  }
  auto ports_json = [&](const DiracKernel& d) {
    ojson a = ojson::array();
    for (std::size_t i = 0; i < d.ports.size(); ++i)
      a.push_back({{"bond", bg.bonds()[d.ports[i]].id}, {"sign", d.signs[i]}});
    return a;
  };
  if (stage == Stage::Elementary) {
    ojson list = ojson::array();
    for (std::size_t el : bg.partition().interior_elements) {
      const DiracKernel d = elementary_dirac(bg, el);
      const DiracKernel r = reorder_interior_exterior(d, bg);
      ojson j;
      j["element"] = bg.element(el).id;
      j["kind"] = kind_name(bg.element(el).kind);
      j["ports"] = ports_json(d);
      j["F"] = matrix_to_json(d.F);
      j["E"] = matrix_to_json(d.E);
      j["reordered"] = {{"ports", ports_json(r)},
                        {"exterior_ports", exterior_port_count(r, bg)},
                        {"F", matrix_to_json(r.F)},
                        {"E", matrix_to_json(r.E)}};
      list.push_back(std::move(j));
    }
    out["elements"] = std::move(list);
    return out;
  }

  const Stage need = stage == Stage::Explicit ? Stage::Explicit : Stage::Dirac;
  const CompileResult res = run_pipeline(bg, options, need);
  if (stage == Stage::Explicit && !res.explicit_form)
    throw Error(ErrorCode::StageUnreachable, "stage 'explicit' unreachable: " + res.message);
  const ComposedDirac& c = *res.composed;

  auto row_blocks = [&]() {
    ojson a = ojson::array();
    std::size_t off = 0;
    for (std::size_t i = 0; i < c.elementary.size(); ++i) {
      const std::size_t rows = c.elementary[i].F.rows();
      a.push_back({{"element", bg.element(bg.partition().interior_elements[i]).id},
                   {"offset", off},
                   {"width", rows}});
      off += rows;
    }
    return a;
  };
  if (stage == Stage::Gamma) {
    out["interior_bonds"] = ojson::array();
    for (std::size_t b : bg.partition().interior_bonds) out["interior_bonds"].push_back(bg.bonds()[b].id);
    out["column_blocks"] = row_blocks();
    out["gamma_t"] = matrix_to_json(c.gamma_t);
    return out;
  }
  if (stage == Stage::Lambda) {
    out["column_blocks"] = row_blocks();
    out["lambda"] = matrix_to_json(c.lambda);
    return out;
  }
  if (stage == Stage::Dirac) {
    out["layout"] = ojson::array();
    for (const auto& b : c.layout.blocks()) out["layout"].push_back({{"label", b.label}, {"width", b.width}});
    out["ports"] = ports_json(c.kernel);
    out["F"] = matrix_to_json(c.kernel.F);
    out["E"] = matrix_to_json(c.kernel.E);
    return out;
  }
  if (stage == Stage::Explicit) {
    const ExplicitDirac& ed = *res.explicit_form;
    const std::vector<std::string> rl = resistive_column_labels(bg);
    std::vector<std::string> u, y;
    for (ElementKind kind : {ElementKind::C}) {
      for (std::size_t el : bg.elements_of_kind(kind))
        for (std::size_t k = 0; k < n; ++k) {
          u.push_back("e_" + bg.element(el).id + "_" + std::to_string(k + 1));
          y.push_back("-f_" + bg.element(el).id + "_" + std::to_string(k + 1));
        }
    }
    for (std::size_t j : ed.splitting.group1) {
      u.push_back("e_" + rl[j]);
      y.push_back("-f_" + rl[j]);
    }
    for (std::size_t j : ed.splitting.group2) {
      u.push_back("-f_" + rl[j]);
      y.push_back("e_" + rl[j]);
    }
    std::vector<std::string> pin, pout;
    port_labels(bg, pin, pout);
    u.insert(u.end(), pin.begin(), pin.end());
    y.insert(y.end(), pout.begin(), pout.end());
    out["inputs"] = u;
    out["outputs"] = y;
    out["group1"] = labels_of(ed.splitting.group1, rl);
    out["group2"] = labels_of(ed.splitting.group2, rl);
    out["Z"] = matrix_to_json(ed.Z);
    return out;
  }
  throw Error(ErrorCode::InvalidArgument, std::string("stage '") + stage_name(stage) + "' cannot be emitted");
}

}  // namespace bg2phs
