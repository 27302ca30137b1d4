#include "bg2phs/bg2phs.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "bg2phs/pipeline.hpp"
#include "bg2phs/sim.hpp"
#include "bg2phs/verify.hpp"

#define BG2PHS_EXPORT extern "C" __attribute__((visibility("default")))

struct bg2phs_graph {
  bg2phs::BondGraph graph;
};

struct bg2phs_model {
  bg2phs::PhsModel model;
  bg2phs::ojson report;
  bool has_report = false;
};

namespace {

thread_local std::string last_message;
thread_local std::string last_kind;

void set_error(std::string kind, std::string message) {
  last_kind = std::move(kind);
  last_message = std::move(message);
}

int status_of(bg2phs::ErrorCode c) {
  using bg2phs::ErrorCode;
  switch (c) {
    case ErrorCode::PivotAmbiguity:
    case ErrorCode::Singular:
    case ErrorCode::InternalConsistency:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::SampleExhausted:
      return BG2PHS_INTERNAL;
    case ErrorCode::ResistiveSplitting:
      return BG2PHS_NO_RESISTIVE_SPLITTING;
    case ErrorCode::Simulation:
      return BG2PHS_SIMULATION;
    case ErrorCode::InvalidArgument:
    case ErrorCode::StageUnreachable:
      return BG2PHS_ARGUMENT;
    default:
      return BG2PHS_INPUT;
  }
}

int status_of(bg2phs::Outcome o) {
  switch (o) {
    case bg2phs::Outcome::Ok:
      return BG2PHS_OK;
    case bg2phs::Outcome::DependentSources:
      return BG2PHS_DEPENDENT_SOURCES;
    case bg2phs::Outcome::DependentStorages:
      return BG2PHS_DEPENDENT_STORAGES;
    case bg2phs::Outcome::NoResistiveSplitting:
      return BG2PHS_NO_RESISTIVE_SPLITTING;
  }
  return BG2PHS_INTERNAL;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

bg2phs::CompileOptions to_options(const bg2phs_options* o) {
  bg2phs::CompileOptions opt;
  if (o) {
    opt.seed = o->seed;
    opt.rank_trials = o->rank_trials;
    opt.sample_points = o->sample_points;
    opt.timings = o->timings != 0;
  }
  return opt;
}

void require(bool ok, const char* what) {
  if (!ok) throw bg2phs::Error(bg2phs::ErrorCode::InvalidArgument, std::string(what));
}

int finish_outcome(const bg2phs::CompileResult& res) {
  const int st = status_of(res.outcome);
  if (st != BG2PHS_OK) set_error("gate", res.message);
  return st;
}

}  // namespace

#define API_BEGIN try {
#define API_END                                                      \
  }                                                                  \
  catch (const bg2phs::Error& e) {                                   \
    set_error(bg2phs::error_code_name(e.code()), e.what());          \
    return status_of(e.code());                                      \
  }                                                                  \
  catch (const std::bad_alloc&) {                                    \
    set_error("internal", "out of memory");                          \
    return BG2PHS_INTERNAL;                                          \
  }                                                                  \
  catch (const std::exception& e) {                                  \
    set_error("internal", e.what());                                 \
    return BG2PHS_INTERNAL;                                          \
  }                                                                  \
  catch (...) {                                                      \
    set_error("internal", "unknown error");                          \
    return BG2PHS_INTERNAL;                                          \
  }

BG2PHS_EXPORT void bg2phs_options_init(bg2phs_options* options) {
  if (!options) return;
  options->seed = 0;
  options->rank_trials = 20;
  options->sample_points = 100;
  options->timings = 0;
}

BG2PHS_EXPORT const char* bg2phs_last_error(void) { return last_message.c_str(); }
BG2PHS_EXPORT const char* bg2phs_last_error_kind(void) { return last_kind.c_str(); }

BG2PHS_EXPORT void bg2phs_string_free(char* s) { std::free(s); }

BG2PHS_EXPORT int bg2phs_graph_parse(const char* json, bg2phs_graph** out) {
  API_BEGIN
  require(json && out, "graph_parse: null argument");
  *out = nullptr;
  *out = new bg2phs_graph{bg2phs::parse_bondgraph(json)};
  return BG2PHS_OK;
  API_END
}

BG2PHS_EXPORT void bg2phs_graph_free(bg2phs_graph* graph) { delete graph; }

BG2PHS_EXPORT int bg2phs_compile(const bg2phs_graph* graph, const bg2phs_options* options, bg2phs_model** out_model,
                                 char** out_report) {
  API_BEGIN
  require(graph, "compile: null graph");
  if (out_model) *out_model = nullptr;
  if (out_report) *out_report = nullptr;
  bg2phs::CompileResult res = bg2phs::run_pipeline(graph->graph, to_options(options));
  if (out_report) *out_report = copy_string(res.report.dump(2) + "\n");
  if (res.model && out_model) *out_model = new bg2phs_model{std::move(*res.model), res.report, true};
  return finish_outcome(res);
  API_END
}

BG2PHS_EXPORT int bg2phs_check(const bg2phs_graph* graph, const bg2phs_options* options, char** out_report) {
  API_BEGIN
  require(graph, "check: null graph");
  if (out_report) *out_report = nullptr;
  const bg2phs::CompileResult res = bg2phs::run_pipeline(graph->graph, to_options(options), bg2phs::Stage::Checks);
  if (out_report) *out_report = copy_string(res.report.dump(2) + "\n");
  return finish_outcome(res);
  API_END
}

BG2PHS_EXPORT int bg2phs_emit(const bg2phs_graph* graph, const bg2phs_options* options, const char* stage,
                              char** out_json) {
  API_BEGIN
  require(graph && stage && out_json, "emit: null argument");
  *out_json = nullptr;
  const auto st = bg2phs::stage_from_name(stage);
  if (!st || *st == bg2phs::Stage::Checks || *st == bg2phs::Stage::Model)
    throw bg2phs::Error(bg2phs::ErrorCode::InvalidArgument,
                        std::string("unknown stage '") + stage +
                            "' (expected graph, elementary, gamma, lambda, dirac or explicit)");
  const bg2phs::CompileOptions opt = to_options(options);
  if (*st == bg2phs::Stage::Explicit) {
    const bg2phs::CompileResult res = bg2phs::run_pipeline(graph->graph, opt, bg2phs::Stage::Checks);
    if (res.outcome != bg2phs::Outcome::Ok) {
      const int code = finish_outcome(res);
      set_error("stage-unreachable", "stage 'explicit' unreachable: " + res.message);
      return code;
    }
  }
  *out_json = copy_string(bg2phs::emit_stage(graph->graph, opt, *st).dump(2) + "\n");
  return BG2PHS_OK;
  API_END
}

BG2PHS_EXPORT int bg2phs_model_parse(const char* json, bg2phs_model** out) {
  API_BEGIN
  require(json && out, "model_parse: null argument");
  *out = nullptr;
  *out = new bg2phs_model{bg2phs::parse_model(json), {}, false};
  return BG2PHS_OK;
  API_END
}

BG2PHS_EXPORT int bg2phs_model_to_json(const bg2phs_model* model, char** out_json) {
  API_BEGIN
  require(model && out_json, "model_to_json: null argument");
  *out_json = nullptr;
  *out_json = copy_string(bg2phs::model_to_string(model->model, model->has_report ? &model->report : nullptr));
  return BG2PHS_OK;
  API_END
}

BG2PHS_EXPORT size_t bg2phs_model_state_count(const bg2phs_model* model) {
  return model ? model->model.states.size() : 0;
}

BG2PHS_EXPORT size_t bg2phs_model_input_count(const bg2phs_model* model) {
  return model ? model->model.inputs.size() : 0;
}

BG2PHS_EXPORT void bg2phs_model_free(bg2phs_model* model) { delete model; }

BG2PHS_EXPORT int bg2phs_simulate(const bg2phs_model* model, const bg2phs_sim_request* request, char** out_csv,
                                  size_t* out_flagged) {
  API_BEGIN
  require(model && request, "simulate: null argument");
  if (out_csv) *out_csv = nullptr;
  require(request->x0 || request->x0_len == 0, "simulate: null x0");
  require((request->seg_start && request->seg_values) || request->seg_count == 0, "simulate: null schedule");
  require((request->param_names && request->param_values) || request->param_count == 0,
          "simulate: null parameters");
  const std::size_t p = model->model.inputs.size();
  bg2phs::SimulationRequest req;
  req.x0.assign(request->x0, request->x0 + request->x0_len);
  for (std::size_t k = 0; k < request->seg_count; ++k)
    req.schedule.push_back({request->seg_start[k], std::vector<double>(request->seg_values + k * p,
                                                                       request->seg_values + (k + 1) * p)});
  req.t_end = request->t_end;
  req.dt = request->dt;
  for (std::size_t k = 0; k < request->param_count; ++k) {
    require(request->param_names[k], "simulate: null parameter name");
    req.parameters[request->param_names[k]] = request->param_values[k];
  }
  const bg2phs::Trajectory tr = bg2phs::simulate(model->model, req);
  if (out_flagged) *out_flagged = bg2phs::passivity_report(tr).flagged_steps.size();
  if (out_csv) *out_csv = copy_string(bg2phs::trajectory_csv(tr));
  return BG2PHS_OK;
  API_END
}

BG2PHS_EXPORT int bg2phs_oracle_compare(const bg2phs_graph* graph, const bg2phs_options* options, int points,
                                        char** out_json) {
  API_BEGIN
  require(graph, "oracle_compare: null graph");
  require(points >= 1, "oracle_compare: points must be at least 1");
  if (out_json) *out_json = nullptr;
  const bg2phs::BondGraph& bg = graph->graph;
  const bg2phs::CompileOptions opt = to_options(options);
  const bg2phs::CompileResult res = bg2phs::run_pipeline(bg, opt, bg2phs::Stage::Checks);
  if (res.outcome != bg2phs::Outcome::Ok) return finish_outcome(res);

  const bg2phs::DiracKernel& k = res.composed->kernel;
  bg2phs::MatrixProgram prog(bg2phs::hcat({k.F, k.E}));
  bg2phs::Sampler sampler(bg.symbols(), opt.seed + 1);
  bg2phs::ojson out;
  out["tolerance"] = 1e-8;
  out["points"] = bg2phs::ojson::array();
  bool all = true;
  for (int i = 0; i < points; ++i) {
    const std::vector<double> pt = sampler.valid_point(prog.program());
    const bg2phs::NumericSubspace a = bg2phs::kernel_subspace(k, pt);
    const bg2phs::NumericSubspace b = bg2phs::oracle_compose(bg, pt);
    bg2phs::ojson entry;
    entry["dimension"] = {a.dimension(), b.dimension()};
    if (a.dimension() != b.dimension() || a.ambient() != b.ambient()) {
      entry["max_angle"] = nullptr;
      entry["equal"] = false;
      all = false;
    } else {
      const auto angles = bg2phs::principal_angles(a, b);
      const double worst = angles.empty() ? 0.0 : angles.back();
      entry["max_angle"] = worst;
      entry["equal"] = worst <= 1e-8;
      all = all && worst <= 1e-8;
    }
    out["points"].push_back(std::move(entry));
  }
  out["equal"] = all;
  if (out_json) *out_json = copy_string(out.dump(2) + "\n");
  if (!all) {
    set_error("oracle-mismatch", "composed Dirac structure differs from the oracle");
    return BG2PHS_ORACLE_MISMATCH;
  }
  return BG2PHS_OK;
  API_END
}
