/* C interface to the bond graph to port-Hamiltonian compiler. */
#ifndef BG2PHS_H
#define BG2PHS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct bg2phs_graph bg2phs_graph;
typedef struct bg2phs_model bg2phs_model;

/* Return codes. The first five double as CLI exit codes. */
typedef enum bg2phs_status {
  BG2PHS_OK = 0,
  BG2PHS_INPUT = 1,
  BG2PHS_DEPENDENT_SOURCES = 2,
  BG2PHS_DEPENDENT_STORAGES = 3,
  BG2PHS_NO_RESISTIVE_SPLITTING = 4,
  BG2PHS_ORACLE_MISMATCH = 5,
  BG2PHS_INTERNAL = 6,
  BG2PHS_SIMULATION = 7,
  BG2PHS_ARGUMENT = 8
} bg2phs_status;

typedef struct bg2phs_options {
  uint64_t seed;
  int rank_trials;
  int sample_points;
  int timings; /* nonzero: add wall-clock timings to reports */
} bg2phs_options;

/* seed 0, 20 rank trials, 100 sample points, no timings */
void bg2phs_options_init(bg2phs_options* options);

/* Message and error kind for the last failure on this thread. */
const char* bg2phs_last_error(void);
const char* bg2phs_last_error_kind(void);

void bg2phs_string_free(char* s);

int bg2phs_graph_parse(const char* json, bg2phs_graph** out);
void bg2phs_graph_free(bg2phs_graph* graph);

/* Runs the whole compiler. On the three gate failures the model is left
   NULL, the status is 2, 3 or 4 and the report is still produced. Either
   output pointer may be NULL. */
int bg2phs_compile(const bg2phs_graph* graph, const bg2phs_options* options, bg2phs_model** out_model,
                   char** out_report);

/* Stops after the two rank gates. */
int bg2phs_check(const bg2phs_graph* graph, const bg2phs_options* options, char** out_report);

/* stage: graph, elementary, gamma, lambda, dirac, explicit */
int bg2phs_emit(const bg2phs_graph* graph, const bg2phs_options* options, const char* stage, char** out_json);

int bg2phs_model_parse(const char* json, bg2phs_model** out);
int bg2phs_model_to_json(const bg2phs_model* model, char** out_json);
size_t bg2phs_model_state_count(const bg2phs_model* model);
size_t bg2phs_model_input_count(const bg2phs_model* model);
void bg2phs_model_free(bg2phs_model* model);

typedef struct bg2phs_sim_request {
  const double* x0;
  size_t x0_len;
  /* piecewise-constant input: segment k starts at seg_start[k] and holds
     seg_values[k * inputs .. (k + 1) * inputs - 1]; zero before the first */
  const double* seg_start;
  const double* seg_values;
  size_t seg_count;
  double t_end;
  double dt;
  const char* const* param_names;
  const double* param_values;
  size_t param_count;
} bg2phs_sim_request;

/* CSV columns t, x..., y..., H, supplied_power. out_flagged receives the
   number of steps failing the dissipation inequality. */
int bg2phs_simulate(const bg2phs_model* model, const bg2phs_sim_request* request, char** out_csv,
                    size_t* out_flagged);

/* Compares the composed kernel with the brute-force oracle at `points`
   random states. Returns 5 if any principal angle exceeds 1e-8; the JSON
   lists the largest angle per point. */
int bg2phs_oracle_compare(const bg2phs_graph* graph, const bg2phs_options* options, int points,
                          char** out_json);

#ifdef __cplusplus
}
#endif

#endif
