#ifndef PREVTRIAL_H
#define PREVTRIAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PREVTRIAL_DESIGN_LAYER 0

#define PREVTRIAL_DESIGN_COMPARE 1

#define PREVTRIAL_DESIGN_COMBINE 2

#define PREVTRIAL_MODEL_EXPONENTIAL 0

#define PREVTRIAL_MODEL_LINEAR 1

#define PREVTRIAL_DROPOUT_TOTAL 0

#define PREVTRIAL_DROPOUT_ANNUAL 1

#define PREVTRIAL_PARAMETER_PE 0

#define PREVTRIAL_PARAMETER_AIR 1

typedef enum PrevtrialStatus {
  PREVTRIAL_STATUS_OK = 0,
  /**
   * Null pointer, invalid UTF-8 or an out-of-range enum code.
   */
  PREVTRIAL_STATUS_INVALID_ARGUMENT = 1,
  PREVTRIAL_STATUS_VALIDATION = 2,
  PREVTRIAL_STATUS_IO = 3,
  PREVTRIAL_STATUS_NON_CONVERGENCE = 4,
  PREVTRIAL_STATUS_PANIC = 5,
} PrevtrialStatus;

/**
 * Opaque virus panel.
 */
typedef struct PrevtrialPanel PrevtrialPanel;

/**
 * Opaque bnAb regimen.
 */
typedef struct PrevtrialRegimen PrevtrialRegimen;

/**
 * Plain-data trial design. Fill with `prevtrial_design_default` first.
 */
typedef struct PrevtrialDesign {
  uint32_t kind;
  double pe_null;
  double pe_alt;
  double one_sided_alpha;
  double power;
  double followup_years;
  double accrual_years;
  double dropout;
  uint32_t dropout_mode;
  uint32_t allocation_arm1;
  uint32_t allocation_arm2;
  uint32_t model;
} PrevtrialDesign;

typedef struct PrevtrialSampleSize {
  uint64_t events;
  uint64_t n_total;
  uint64_t n_arm1;
  uint64_t n_arm2;
  double event_probability_arm1;
  double event_probability_arm2;
} PrevtrialSampleSize;

typedef struct PrevtrialPower {
  double rejection_rate;
  double mc_halfwidth_95;
  uint64_t replicates;
  uint64_t no_event_replicates;
} PrevtrialPower;

typedef struct PrevtrialEfficacy {
  double rate_ratio;
  double theta_c;
  double point;
  double ci_low;
  double ci_high;
  double ui_low;
  double ui_high;
} PrevtrialEfficacy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next prevtrial call on the same thread.
 */
const char *prevtrial_last_error(void);

/**
 * Library defaults: Layer, H0 PE 0, H1 PE 0.5, one-sided alpha 0.025,
 * power 0.9, two years of follow-up, 10% total dropout, 1:1, linear model.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `PrevtrialDesign`.
 */
enum PrevtrialStatus prevtrial_design_default(struct PrevtrialDesign *out);

/**
 * # Safety
 * `design` must be null or valid; `out` must be null or writable.
 */
enum PrevtrialStatus prevtrial_required_events(const struct PrevtrialDesign *design, uint64_t *out);

/**
 * # Safety
 * `design` must be null or valid; `out` must be null or writable.
 */
enum PrevtrialStatus prevtrial_sample_size(const struct PrevtrialDesign *design,
                                           double incidence_arm1,
                                           double incidence_arm2,
                                           struct PrevtrialSampleSize *out);

/**
 * Monte Carlo power of the one-sided log-rank test. Results depend only on
 * the inputs and `seed`, not on the thread count.
 *
 * # Safety
 * `design` must be null or valid; `out` must be null or writable.
 */
enum PrevtrialStatus prevtrial_power(const struct PrevtrialDesign *design,
                                     double incidence_arm1,
                                     double incidence_arm2,
                                     uint64_t n_total,
                                     uint64_t replicates,
                                     uint64_t seed,
                                     struct PrevtrialPower *out);

/**
 * Efficacy of the experimental arm against a counterfactual placebo, with
 * the sampling interval at `theta_low` and the interval over
 * `[theta_low, theta_high]`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum PrevtrialStatus prevtrial_counterfactual(uint64_t experimental_events,
                                              double experimental_person_years,
                                              uint64_t control_events,
                                              double control_person_years,
                                              double theta_low,
                                              double theta_high,
                                              uint32_t parameter,
                                              struct PrevtrialEfficacy *out);

/**
 * Loads a virus panel CSV (`virus_id,antibody,ic80_ug_ml[,hill_slope]`).
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or writable.
 */
enum PrevtrialStatus prevtrial_panel_open(const char *path, struct PrevtrialPanel **out);

/**
 * # Safety
 * `panel` must be null or a handle from `prevtrial_panel_open` not yet freed.
 */
void prevtrial_panel_free(struct PrevtrialPanel *panel);

/**
 * Number of distinct viruses, or 0 for a null handle.
 *
 * # Safety
 * `panel` must be null or a live handle.
 */
uint64_t prevtrial_panel_virus_count(const struct PrevtrialPanel *panel);

/**
 * Parses a regimen from JSON text.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out` must be null or writable.
 */
enum PrevtrialStatus prevtrial_regimen_from_json(const char *json, struct PrevtrialRegimen **out);

/**
 * # Safety
 * `regimen` must be null or a handle from `prevtrial_regimen_from_json` not yet freed.
 */
void prevtrial_regimen_free(struct PrevtrialRegimen *regimen);

/**
 * Mean AUC of the predicted ID80 curve over the panel.
 *
 * # Safety
 * Handles must be null or live; `out` must be null or writable.
 */
enum PrevtrialStatus prevtrial_regimen_score(const struct PrevtrialRegimen *regimen,
                                             const struct PrevtrialPanel *panel,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREVTRIAL_H */
