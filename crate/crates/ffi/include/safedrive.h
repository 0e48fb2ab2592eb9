#ifndef SAFEDRIVE_H
#define SAFEDRIVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_NULL_POINTER = 1,
  SD_STATUS_INVALID_ARGUMENT = 2,
  SD_STATUS_PARSE = 3,
  SD_STATUS_IO = 4,
  SD_STATUS_BUFFER_TOO_SMALL = 5,
  SD_STATUS_PANIC = 6,
} SdStatus;

typedef enum SdVehicleClass {
  SD_VEHICLE_CLASS_SEDAN = 0,
  SD_VEHICLE_CLASS_TRUCK = 1,
  SD_VEHICLE_CLASS_BUS = 2,
  SD_VEHICLE_CLASS_MOTORCYCLE = 3,
  SD_VEHICLE_CLASS_VRU = 4,
  SD_VEHICLE_CLASS_OTHER = 5,
} SdVehicleClass;

typedef enum SdRiskLevel {
  SD_RISK_LEVEL_LOW = 0,
  SD_RISK_LEVEL_MEDIUM = 1,
  SD_RISK_LEVEL_HIGH = 2,
} SdRiskLevel;

typedef enum SdAction {
  SD_ACTION_ACCELERATE = 0,
  SD_ACTION_DECELERATE = 1,
  SD_ACTION_LANE_CHANGE_LEFT = 2,
  SD_ACTION_LANE_CHANGE_RIGHT = 3,
  SD_ACTION_TURN_LEFT = 4,
  SD_ACTION_TURN_RIGHT = 5,
  SD_ACTION_IDLE = 6,
} SdAction;

// Configuration, thresholds included. Opaque.
typedef struct SdConfig SdConfig;

// Vector store with the offline hash embedder. Opaque.
typedef struct SdStore SdStore;

// State of one road user. Angles in radians, lengths in meters, speed in
// m/s.
typedef struct SdVehicle {
  int64_t id;
  enum SdVehicleClass vehicle_class;
  double x;
  double y;
  double heading;
  double speed;
  double steering;
  double width;
  double length;
  double wheelbase;
} SdVehicle;

typedef struct SdQpr {
  double total;
  double front;
  double rear;
} SdQpr;

// `min_ttc` is `INFINITY` when nothing closes in.
typedef struct SdVerdict {
  bool safe;
  double min_ttc;
  double induced_decel;
} SdVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static nul-terminated string.
const char *sd_version(void);

// Copies the calling thread's last error message into `buf`.
//
// # Safety
// `buf` must have `cap` writable bytes; `len` may be null.
enum SdStatus sd_last_error(char *buf, size_t cap, size_t *len);

// Default configuration with the shipped thresholds.
//
// # Safety
// `out` must be a valid pointer.
enum SdStatus sd_config_new_default(struct SdConfig **out);

// Configuration from a JSON document. A `thresholds_path` is read relative
// to the working directory.
//
// # Safety
// `json` must be nul-terminated; `out` must be a valid pointer.
enum SdStatus sd_config_from_json(const char *json, struct SdConfig **out);

// # Safety
// `config` must come from `sd_config_*` and not be used afterwards.
void sd_config_free(struct SdConfig *config);

// Omnidirectional QPR of `ego` against `n` other vehicles.
//
// # Safety
// Pointers must be valid; `others` must hold `n` elements.
enum SdStatus sd_qpr_total(const struct SdConfig *config,
                           const struct SdVehicle *ego,
                           const struct SdVehicle *others,
                           size_t n,
                           struct SdQpr *out);

// Risk level of a QPR value under the configured thresholds.
//
// # Safety
// Pointers must be valid.
enum SdStatus sd_classify_risk(const struct SdConfig *config, double qpr, enum SdRiskLevel *out);

// Textual risk notification of a scene. Returns `BufferTooSmall` with the
// needed length in `len` when `cap` is insufficient.
//
// # Safety
// Pointers must be valid; `buf` must have `cap` writable bytes.
enum SdStatus sd_risk_notification(const struct SdConfig *config,
                                   const struct SdVehicle *ego,
                                   const struct SdVehicle *others,
                                   size_t n,
                                   char *buf,
                                   size_t cap,
                                   size_t *len);

// Nearest-rank 30th and 70th percentiles of `n` samples.
//
// # Safety
// `samples` must hold `n` values; outputs must be valid.
enum SdStatus sd_calibrate(const double *samples, size_t n, double *t_low, double *t_high);

// Safety-oracle verdict for `action` in a highway scene where the ego and
// every other vehicle carry their lane ids (`lanes[0]` is the ego's,
// `lanes[1..=n]` the others'; pass null when unknown).
//
// # Safety
// Pointers must be valid; `others` must hold `n` and `lanes` `n + 1`
// elements when non-null.
enum SdStatus sd_safety_check(const struct SdConfig *config,
                              const struct SdVehicle *ego,
                              const struct SdVehicle *others,
                              const int32_t *lanes,
                              size_t n,
                              enum SdAction action,
                              struct SdVerdict *out);

// Empty store with a hash embedder of `dimension` (0 selects the default).
//
// # Safety
// `out` must be a valid pointer.
enum SdStatus sd_store_new(size_t dimension, struct SdStore **out);

// Loads a store file written by `sd_store_save` or the library.
//
// # Safety
// `path` must be nul-terminated; `out` must be a valid pointer.
enum SdStatus sd_store_load(const char *path, struct SdStore **out);

// # Safety
// `store` must be a valid handle.
enum SdStatus sd_store_save(const struct SdStore *store, const char *path);

// # Safety
// `store` must come from `sd_store_new` or `sd_store_load` and not be used
// afterwards.
void sd_store_free(struct SdStore *store);

// Number of records, 0 for a null handle.
//
// # Safety
// `store` must be null or a valid handle.
size_t sd_store_len(const struct SdStore *store);

// Appends a correct-outcome record; its id is written to `id`.
//
// # Safety
// Strings must be nul-terminated; pointers valid.
enum SdStatus sd_store_add(struct SdStore *store,
                           const char *scene_text,
                           const char *reasoning,
                           enum SdAction action,
                           uint64_t *id);

// Up to `k` most similar records. Ids and cosine similarities go to
// `ids` and `similarities` (both `k` long); the count to `found`.
//
// # Safety
// `ids` and `similarities` must have `k` writable elements.
enum SdStatus sd_store_retrieve(const struct SdStore *store,
                                const char *query,
                                size_t k,
                                uint64_t *ids,
                                double *similarities,
                                size_t *found);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAFEDRIVE_H */
