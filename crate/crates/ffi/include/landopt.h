#ifndef LANDOPT_H
#define LANDOPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Number of land types in a usage or delta array.
 */
#define LANDOPT_N_TYPES 12

/*
 Number of entries in a recommendation array.
 */
#define LANDOPT_N_MODIFIABLE 8

typedef enum LandoptStatus {
  LANDOPT_STATUS_OK = 0,
  LANDOPT_STATUS_NULL_POINTER = 1,
  /*
   Bad input value, e.g. fractions that do not sum to one or a non-UTF-8 string.
   */
  LANDOPT_STATUS_INVALID_ARGUMENT = 2,
  LANDOPT_STATUS_IO = 3,
  /*
   A file or JSON string could not be parsed into a model.
   */
  LANDOPT_STATUS_PARSE = 4,
  /*
   A Rust panic was caught at the boundary.
   */
  LANDOPT_STATUS_INTERNAL = 5,
} LandoptStatus;

/*
 A loaded ELUC predictor.
 */
typedef struct LandoptPredictor LandoptPredictor;

/*
 A loaded prescriptor network.
 */
typedef struct LandoptPrescriptor LandoptPrescriptor;

/*
 One cell in one year.
 */
typedef struct LandoptContext {
  double lat;
  double lon;
  /*
   Hectares.
   */
  double area;
  int32_t year;
  double fractions[LANDOPT_N_TYPES];
  double nonland;
} LandoptContext;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL if the last
 call succeeded. The pointer stays valid until the next landopt call on
 the same thread.
 */
const char *landopt_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *landopt_version(void);

/*
 Loads a predictor saved as JSON at `path`.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LandoptStatus landopt_predictor_load(const char *path, struct LandoptPredictor **out);

/*
 Builds a predictor from its JSON text.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LandoptStatus landopt_predictor_from_json(const char *json, struct LandoptPredictor **out);

/*
 The predictor's model id, valid as long as the handle is.

 # Safety
 `predictor` must be a live handle or NULL.
 */
const char *landopt_predictor_model_id(const struct LandoptPredictor *predictor);

/*
 Predicted ELUC (tC/ha) of applying `delta` (12 entries) to `context`.

 # Safety
 Pointers must be valid; `delta` must point to 12 doubles.
 */
enum LandoptStatus landopt_predictor_predict(const struct LandoptPredictor *predictor,
                                             const struct LandoptContext *context,
                                             const double *delta,
                                             double *out_eluc);

/*
 Releases a predictor. NULL is ignored.

 # Safety
 `predictor` must come from this library and not be used afterwards.
 */
void landopt_predictor_free(struct LandoptPredictor *predictor);

/*
 Loads a prescriptor saved as JSON at `path`.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LandoptStatus landopt_prescriptor_load(const char *path, struct LandoptPrescriptor **out);

/*
 Builds a prescriptor from its JSON text.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LandoptStatus landopt_prescriptor_from_json(const char *json, struct LandoptPrescriptor **out);

/*
 The prescriptor's id, valid as long as the handle is.

 # Safety
 `prescriptor` must be a live handle or NULL.
 */
const char *landopt_prescriptor_id(const struct LandoptPrescriptor *prescriptor);

/*
 Writes the recommended fractions for the 8 modifiable types into
 `out_targets`. They sum to the context's modifiable budget.

 # Safety
 Pointers must be valid; `out_targets` must have room for 8 doubles.
 */
enum LandoptStatus landopt_prescriptor_prescribe(const struct LandoptPrescriptor *prescriptor,
                                                 const struct LandoptContext *context,
                                                 double *out_targets);

/*
 Prescribes for `context` and scores the result with `predictor`:
 predicted ELUC (tC/ha) and percent of land changed.

 # Safety
 All pointers must be valid.
 */
enum LandoptStatus landopt_prescriptor_evaluate(const struct LandoptPrescriptor *prescriptor,
                                                const struct LandoptPredictor *predictor,
                                                const struct LandoptContext *context,
                                                double *out_eluc,
                                                double *out_change);

/*
 Releases a prescriptor. NULL is ignored.

 # Safety
 `prescriptor` must come from this library and not be used afterwards.
 */
void landopt_prescriptor_free(struct LandoptPrescriptor *prescriptor);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANDOPT_H */
