#ifndef SUPPLY_H
#define SUPPLY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SupplyStatus {
  SUPPLY_STATUS_OK = 0,
  SUPPLY_STATUS_NULL_POINTER = 1,
  SUPPLY_STATUS_INVALID_ARGUMENT = 2,
  SUPPLY_STATUS_INFEASIBLE = 3,
  SUPPLY_STATUS_PARSE = 4,
  SUPPLY_STATUS_IO = 5,
  SUPPLY_STATUS_INTERNAL = 6,
} SupplyStatus;

// A finished plan.
typedef struct SupplyPlan SupplyPlan;

// Planner configuration: energy model, link budget and MCS table.
typedef struct SupplyPlanner SupplyPlanner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a planner with the built-in parameter set. Free with
// [`supply_planner_free`].
struct SupplyPlanner *supply_planner_new(void);

// # Safety
// `planner` must come from [`supply_planner_new`] and not be used afterwards.
void supply_planner_free(struct SupplyPlanner *planner);

// Loads UAV parameters from a `key = value` file.
//
// # Safety
// `planner` must be valid; `path` must be a NUL-terminated string.
enum SupplyStatus supply_planner_load_params(struct SupplyPlanner *planner, const char *path);

// Loads an MCS table CSV.
//
// # Safety
// `planner` must be valid; `path` must be a NUL-terminated string.
enum SupplyStatus supply_planner_load_mcs(struct SupplyPlanner *planner, const char *path);

// Overrides the scenario altitude. NaN restores the scenario's own value.
//
// # Safety
// `planner` must be valid.
enum SupplyStatus supply_planner_set_altitude(struct SupplyPlanner *planner, double altitude);

// Sets the SNR margin applied on top of every MCS threshold, dB.
//
// # Safety
// `planner` must be valid.
enum SupplyStatus supply_planner_set_margin(struct SupplyPlanner *planner, double margin_db);

// Plans a scenario given as JSON. On success `*out` receives a plan to be
// released with [`supply_plan_free`].
//
// # Safety
// `planner` must be valid, `scenario_json` NUL-terminated and `out` writable.
enum SupplyStatus supply_planner_plan_json(const struct SupplyPlanner *planner,
                                           const char *scenario_json,
                                           struct SupplyPlan **out);

// # Safety
// `plan` must come from [`supply_planner_plan_json`] and not be used afterwards.
void supply_plan_free(struct SupplyPlan *plan);

// # Safety
// `plan` must be valid and `out` writable.
enum SupplyStatus supply_plan_fap_count(const struct SupplyPlan *plan, size_t *out);

// Planned and all-hover energy per hour, J.
//
// # Safety
// `plan` must be valid and both outputs writable.
enum SupplyStatus supply_plan_energies(const struct SupplyPlan *plan,
                                       double *supply_j,
                                       double *hover_j);

// Serializes the plan document. Release `*out` with [`supply_string_free`].
//
// # Safety
// `plan` must be valid and `out` writable.
enum SupplyStatus supply_plan_to_json(const struct SupplyPlan *plan, char **out);

// # Safety
// `s` must come from this library and not be used afterwards.
void supply_string_free(char *s);

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *supply_last_error_message(void);

// SNR in dB at `distance` metres under the planner's link budget.
//
// # Safety
// `planner` must be valid and `out` writable.
enum SupplyStatus supply_snr_db(const struct SupplyPlanner *planner, double distance, double *out);

// Largest link distance serving `required_rate` Mbit/s with `n_sharing`
// users on the channel.
//
// # Safety
// `planner` must be valid and `out` writable.
enum SupplyStatus supply_max_distance(const struct SupplyPlanner *planner,
                                      double required_rate,
                                      size_t n_sharing,
                                      double *out);

// Propulsion power, W, at `speed` m/s on a turn of `radius` m. An infinite
// radius means straight flight.
//
// # Safety
// `planner` must be valid and `out` writable.
enum SupplyStatus supply_circular_power(const struct SupplyPlanner *planner,
                                        double speed,
                                        double radius,
                                        double *out);

// Energy per hour of hovering, J.
//
// # Safety
// `planner` must be valid and `out` writable.
enum SupplyStatus supply_hover_energy_per_hour(const struct SupplyPlanner *planner, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUPPLY_H */
