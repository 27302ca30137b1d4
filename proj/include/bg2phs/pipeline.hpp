#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "bg2phs/dirac.hpp"
#include "bg2phs/model_io.hpp"
#include "bg2phs/phs.hpp"

namespace bg2phs {

struct CompileOptions {
  std::uint64_t seed = 0;
  int rank_trials = 20;
  int sample_points = 100;
  bool timings = false;  // wall-clock timings make reports non-reproducible
};

enum class Stage { Graph, Elementary, Gamma, Lambda, Dirac, Checks, Explicit, Model };

const char* stage_name(Stage s);
std::optional<Stage> stage_from_name(std::string_view name);

enum class Outcome { Ok, DependentSources, DependentStorages, NoResistiveSplitting };

struct CompileResult {
  Outcome outcome = Outcome::Ok;
  std::string message;  // failure text for non-Ok outcomes
  Stage reached = Stage::Graph;
  std::optional<ComposedDirac> composed;
  CheckReport necessary;
  CheckReport sufficient;
  std::optional<ExplicitDirac> explicit_form;
  std::optional<ResistiveForm> resistive;
  std::optional<PhsModel> model;
  ojson report;
};

/// Runs the compiler up to and including `stop`. Gate failures end the run
/// early with the corresponding outcome; other problems throw Error.
CompileResult run_pipeline(const BondGraph& bg, const CompileOptions& options, Stage stop = Stage::Model);

/// Dump of one pipeline stage. Throws Error(StageUnreachable) when an
/// earlier gate failed.
ojson emit_stage(const BondGraph& bg, const CompileOptions& options, Stage stage);

/// Labels of the resistive columns, "<element>_<component>".
std::vector<std::string> resistive_column_labels(const BondGraph& bg);

}  // namespace bg2phs
