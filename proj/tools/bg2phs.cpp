#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "bg2phs/bg2phs.h"

namespace {

struct GraphDeleter {
  void operator()(bg2phs_graph* g) const { bg2phs_graph_free(g); }
};
struct ModelDeleter {
  void operator()(bg2phs_model* m) const { bg2phs_model_free(m); }
};
struct StringDeleter {
  void operator()(char* s) const { bg2phs_string_free(s); }
};
using GraphPtr = std::unique_ptr<bg2phs_graph, GraphDeleter>;
using ModelPtr = std::unique_ptr<bg2phs_model, ModelDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

class Failure : public std::runtime_error {
 public:
  Failure(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure(BG2PHS_INPUT, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure(BG2PHS_INPUT, "cannot write '" + path + "'");
  out << text;
}

int report_error(int status) {
  std::cerr << "bg2phs: " << bg2phs_last_error() << "\n";
  return status;
}

GraphPtr load_graph(const std::string& path) {
  const std::string text = read_file(path);
  bg2phs_graph* g = nullptr;
  const int st = bg2phs_graph_parse(text.c_str(), &g);
  if (st != BG2PHS_OK) throw Failure(st, bg2phs_last_error());
  return GraphPtr(g);
}

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text.find_first_not_of(" \t") == std::string::npos) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    try {
      out.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
      throw Failure(BG2PHS_ARGUMENT, what + ": not a number: '" + item + "'");
  }
  return out;
}

struct CommonFlags {
  bg2phs_options options{};
  std::string input;
  std::string output;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("input", f.input, "bond graph JSON file")->required();
  cmd->add_option("--seed", f.options.seed, "sampling seed")->capture_default_str();
  cmd->add_option("--rank-trials", f.options.rank_trials, "sample points per rank decision")->capture_default_str();
  cmd->add_option("--sample-points", f.options.sample_points, "sample points for definiteness checks")
      ->capture_default_str();
  cmd->add_option("--output,-o", f.output, "output path (default: standard output)");
}

int emit(const CommonFlags& f, const std::string& stage) {
  GraphPtr g = load_graph(f.input);
  char* raw = nullptr;
  const int st = bg2phs_emit(g.get(), &f.options, stage.c_str(), &raw);
  StringPtr out(raw);
  if (st != BG2PHS_OK) return report_error(st);
  write_output(f.output, out.get());
  return 0;
}

int compile(const CommonFlags& f, const std::string& stage, const std::string& report_path) {
  if (!stage.empty()) return emit(f, stage);
  GraphPtr g = load_graph(f.input);
  bg2phs_model* raw_model = nullptr;
  char* raw_report = nullptr;
  const int st = bg2phs_compile(g.get(), &f.options, &raw_model, &raw_report);
  ModelPtr model(raw_model);
  StringPtr report(raw_report);
  if (report && !report_path.empty()) write_output(report_path, report.get());
  if (st != BG2PHS_OK) return report_error(st);
  char* raw_json = nullptr;
  const int js = bg2phs_model_to_json(model.get(), &raw_json);
  StringPtr json(raw_json);
  if (js != BG2PHS_OK) return report_error(js);
  write_output(f.output, json.get());
  return 0;
}

int check(const CommonFlags& f) {
  GraphPtr g = load_graph(f.input);
  char* raw = nullptr;
  const int st = bg2phs_check(g.get(), &f.options, &raw);
  StringPtr report(raw);
  if (report) write_output(f.output, report.get());
  if (st != BG2PHS_OK) return report_error(st);
  return 0;
}

int oracle_compare(const CommonFlags& f, int points) {
  GraphPtr g = load_graph(f.input);
  char* raw = nullptr;
  const int st = bg2phs_oracle_compare(g.get(), &f.options, points, &raw);
  StringPtr out(raw);
  if (out) write_output(f.output, out.get());
  if (st != BG2PHS_OK) return report_error(st);
  return 0;
}

struct SimFlags {
  std::string model;
  std::string x0;
  std::string u;
  double t_end = 1.0;
  double dt = 1e-3;
  std::string out;
  std::vector<std::string> params;
};

int simulate(const SimFlags& f) {
  const std::string text = read_file(f.model);
  bg2phs_model* raw = nullptr;
  int st = bg2phs_model_parse(text.c_str(), &raw);
  ModelPtr model(raw);
  if (st != BG2PHS_OK) return report_error(st);
  const std::size_t p = bg2phs_model_input_count(model.get());

  const std::vector<double> x0 = parse_numbers(f.x0, "--x0");
  std::vector<double> starts, values;
  std::stringstream ss(f.u);
  std::string seg;
  while (std::getline(ss, seg, ';')) {
    if (seg.find_first_not_of(" \t") == std::string::npos) continue;
    const auto colon = seg.find(':');
    if (colon == std::string::npos) throw Failure(BG2PHS_ARGUMENT, "--u: segment '" + seg + "' is not 'time:values'");
    const auto t = parse_numbers(seg.substr(0, colon), "--u");
    const auto v = parse_numbers(seg.substr(colon + 1), "--u");
    if (t.size() != 1) throw Failure(BG2PHS_ARGUMENT, "--u: bad start time in '" + seg + "'");
    if (v.size() != p)
      throw Failure(BG2PHS_ARGUMENT, "--u: segment '" + seg + "' has " + std::to_string(v.size()) +
                                         " values, the model has " + std::to_string(p) + " inputs");
    starts.push_back(t[0]);
    values.insert(values.end(), v.begin(), v.end());
  }
  std::vector<std::string> names;
  std::vector<double> pvalues;
  for (const std::string& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure(BG2PHS_ARGUMENT, "--param expects name=value, got '" + kv + "'");
    names.push_back(kv.substr(0, eq));
    const auto v = parse_numbers(kv.substr(eq + 1), "--param");
    if (v.size() != 1) throw Failure(BG2PHS_ARGUMENT, "--param expects one value in '" + kv + "'");
    pvalues.push_back(v[0]);
  }
  std::vector<const char*> cnames;
  for (const auto& n : names) cnames.push_back(n.c_str());

  bg2phs_sim_request req{};
  req.x0 = x0.data();
  req.x0_len = x0.size();
  req.seg_start = starts.data();
  req.seg_values = values.data();
  req.seg_count = starts.size();
  req.t_end = f.t_end;
  req.dt = f.dt;
  req.param_names = cnames.data();
  req.param_values = pvalues.data();
  req.param_count = cnames.size();
  char* raw_csv = nullptr;
  std::size_t flagged = 0;
  st = bg2phs_simulate(model.get(), &req, &raw_csv, &flagged);
  StringPtr csv(raw_csv);
  if (st != BG2PHS_OK) return report_error(st);
  write_output(f.out, csv.get());
  if (flagged > 0) std::cerr << "bg2phs: warning: " << flagged << " steps violate the dissipation inequality\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compiles multi-bond graphs to input-state-output port-Hamiltonian models"};
  app.require_subcommand(1);

  CommonFlags compile_f, check_f, emit_f, oracle_f;
  for (CommonFlags* f : {&compile_f, &check_f, &emit_f, &oracle_f}) bg2phs_options_init(&f->options);

  std::string compile_stage, report_path;
  bool compile_timings = false;
  auto* c = app.add_subcommand("compile", "compile a bond graph to a model");
  add_common(c, compile_f);
  c->add_option("--emit", compile_stage, "dump an intermediate stage instead of the model");
  c->add_option("--report", report_path, "also write the compile report here");
  c->add_flag("--timings", compile_timings, "record wall-clock timings in the report");

  auto* k = app.add_subcommand("check", "run the existence checks only");
  add_common(k, check_f);

  std::string emit_stage;
  auto* e = app.add_subcommand("emit", "dump one pipeline stage");
  add_common(e, emit_f);
  e->add_option("stage", emit_stage, "graph, elementary, gamma, lambda, dirac or explicit")->required();

  int points = 5;
  auto* o = app.add_subcommand("oracle-compare", "compare the composed structure with the brute-force oracle");
  add_common(o, oracle_f);
  o->add_option("--points", points, "random states to test")->capture_default_str();

  SimFlags sim;
  auto* s = app.add_subcommand("simulate", "integrate a compiled model with RK4");
  s->add_option("model", sim.model, "model JSON file")->required();
  s->add_option("--x0", sim.x0, "initial state, comma separated")->required();
  s->add_option("--u", sim.u, "input schedule 't0:u1,u2;t1:u1,u2' (zero before the first segment)");
  s->add_option("--t-end", sim.t_end, "final time")->capture_default_str();
  s->add_option("--dt", sim.dt, "step size")->capture_default_str();
  s->add_option("--out", sim.out, "CSV output path (default: standard output)");
  s->add_option("--param", sim.params, "parameter value, name=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : BG2PHS_ARGUMENT;
  }

  try {
    if (c->parsed()) {
      compile_f.options.timings = compile_timings ? 1 : 0;
      return compile(compile_f, compile_stage, report_path);
    }
    if (k->parsed()) return check(check_f);
    if (e->parsed()) return emit(emit_f, emit_stage);
    if (o->parsed()) return oracle_compare(oracle_f, points);
    if (s->parsed()) return simulate(sim);
  } catch (const Failure& f) {
    std::cerr << "bg2phs: " << f.what() << "\n";
    return f.code();
  }
  return BG2PHS_ARGUMENT;
}
