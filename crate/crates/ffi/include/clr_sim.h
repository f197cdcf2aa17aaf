#ifndef CLR_SIM_H
#define CLR_SIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ClrStatus {
  CLR_STATUS_OK = 0,
  CLR_STATUS_NULL_POINTER = 1,
  CLR_STATUS_INVALID_UTF8 = 2,
  CLR_STATUS_CONFIG = 3,
  CLR_STATUS_SIMULATION = 4,
  CLR_STATUS_IO = 5,
  CLR_STATUS_OUT_OF_RANGE = 6,
  CLR_STATUS_UNAVAILABLE = 7,
  CLR_STATUS_PANIC = 8,
} ClrStatus;

typedef enum ClrCommandKind {
  CLR_COMMAND_KIND_ACT = 0,
  CLR_COMMAND_KIND_PRE = 1,
  CLR_COMMAND_KIND_RD = 2,
  CLR_COMMAND_KIND_WR = 3,
  CLR_COMMAND_KIND_REF = 4,
} ClrCommandKind;

typedef enum ClrRowMode {
  CLR_ROW_MODE_MAX_CAPACITY = 0,
  CLR_ROW_MODE_HIGH_PERFORMANCE = 1,
} ClrRowMode;

/**
 * Opaque physical address map.
 */
typedef struct ClrAddressMap ClrAddressMap;

/**
 * Opaque simulator configuration.
 */
typedef struct ClrConfig ClrConfig;

/**
 * Opaque result of one run.
 */
typedef struct ClrReport ClrReport;

/**
 * Energy breakdown in joules; `elapsed_s` is simulated time.
 */
typedef struct ClrEnergy {
  double act_pre;
  double read;
  double write;
  double refresh;
  double background;
  double total;
  double elapsed_s;
} ClrEnergy;

/**
 * Array timings of one row mode, nanoseconds.
 */
typedef struct ClrTiming {
  double t_rcd;
  double t_ras;
  double t_rp;
  double t_wr;
  double t_rfc;
  double t_refw_ms;
} ClrTiming;

typedef struct ClrIso {
  bool iso1;
  bool iso2;
} ClrIso;

typedef struct ClrCoord {
  uint32_t channel;
  uint32_t rank;
  uint32_t bankgroup;
  uint32_t bank;
  uint32_t row;
  uint32_t column;
  uint32_t byte;
} ClrCoord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Caller frees it
 * with `clr_string_free`.
 */
char *clr_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void clr_string_free(char *s);

struct ClrConfig *clr_config_default(void);

/**
 * Parses INI text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ClrStatus clr_config_from_str(const char *text, struct ClrConfig **out);

/**
 * Loads an INI file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ClrStatus clr_config_load(const char *path, struct ClrConfig **out);

/**
 * Sets `[section] key = value` and revalidates; the configuration is left
 * unchanged on failure.
 *
 * # Safety
 * `cfg` must be a live handle; strings must be NUL-terminated.
 */
enum ClrStatus clr_config_set(struct ClrConfig *cfg,
                              const char *section,
                              const char *key,
                              const char *value);

/**
 * Reloadable INI text of the configuration; NULL on a null handle.
 *
 * # Safety
 * `cfg` must be NULL or a live handle.
 */
char *clr_config_echo(const struct ClrConfig *cfg);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void clr_config_free(struct ClrConfig *cfg);

/**
 * Runs the configuration: the configured traces, or one synthetic trace per
 * core when none are set.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum ClrStatus clr_run(const struct ClrConfig *cfg, struct ClrReport **out);

/**
 * # Safety
 * `report` must be NULL or a handle not yet freed.
 */
void clr_report_free(struct ClrReport *report);

/**
 * # Safety
 * `report` must be NULL or a live handle.
 */
size_t clr_report_core_count(const struct ClrReport *report);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum ClrStatus clr_report_ipc(const struct ClrReport *report, size_t core, double *out);

/**
 * Sum of per-core IPC; NaN on a null handle.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
double clr_report_ipc_total(const struct ClrReport *report);

/**
 * Weighted speedup; `CLR_STATUS_UNAVAILABLE` for single-core runs.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum ClrStatus clr_report_weighted_speedup(const struct ClrReport *report, double *out);

/**
 * # Safety
 * `report` must be NULL or a live handle.
 */
double clr_report_row_hit_rate(const struct ClrReport *report);

/**
 * # Safety
 * `report` must be NULL or a live handle.
 */
double clr_report_capacity_percent(const struct ClrReport *report);

/**
 * # Safety
 * `report` must be NULL or a live handle.
 */
uint64_t clr_report_command_count(const struct ClrReport *report, enum ClrCommandKind kind);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum ClrStatus clr_report_energy(const struct ClrReport *report, struct ClrEnergy *out);

/**
 * The run's `stats.csv` text; NULL on a null handle.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
char *clr_report_stats_csv(const struct ClrReport *report);

/**
 * Writes the run's output files into `dir`.
 *
 * # Safety
 * `report` must be a live handle; `dir` a NUL-terminated path.
 */
enum ClrStatus clr_report_write(const struct ClrReport *report, const char *dir);

/**
 * Array timings of `mode` on the default DDR4 baseline.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ClrStatus clr_timing_for(enum ClrRowMode mode,
                              bool early_termination,
                              double t_refw_ms,
                              struct ClrTiming *out);

/**
 * ISO1/ISO2 levels to activate a row of `subarray` in `mode`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ClrStatus clr_iso_signals(uint64_t subarray, enum ClrRowMode mode, struct ClrIso *out);

/**
 * Address map of the configuration's topology, spec string and page size.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum ClrStatus clr_address_map_from_config(const struct ClrConfig *cfg, struct ClrAddressMap **out);

/**
 * # Safety
 * `map` must be a live handle and `out` a valid pointer.
 */
enum ClrStatus clr_address_map_decode(const struct ClrAddressMap *map,
                                      uint64_t addr,
                                      struct ClrCoord *out);

/**
 * # Safety
 * `map` and `coord` must be valid; `out` a valid pointer.
 */
enum ClrStatus clr_address_map_encode(const struct ClrAddressMap *map,
                                      const struct ClrCoord *coord,
                                      uint64_t *out);

/**
 * # Safety
 * `map` must be NULL or a handle not yet freed.
 */
void clr_address_map_free(struct ClrAddressMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLR_SIM_H */
